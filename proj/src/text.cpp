#include "shadowfix/text.hpp"

#include "shadowfix/error.hpp"

#include <openssl/evp.h>

#include <array>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace shadowfix {

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

}  // namespace

LineBuffer::LineBuffer(std::string_view text) {
    std::size_t pos = 0;
    while (pos < text.size()) {
        const auto nl = text.find('\n', pos);
        if (nl == std::string_view::npos) {
            lines_.emplace_back(text.substr(pos));
            eols_.emplace_back();
            break;
        }
        auto end = nl;
        if (end > pos && text[end - 1] == '\r') {
            --end;
        }
        lines_.emplace_back(text.substr(pos, end - pos));
        eols_.emplace_back(text.substr(end, nl + 1 - end));
        pos = nl + 1;
    }
}

std::string_view LineBuffer::dominant_eol() const noexcept {
    std::size_t lf = 0;
    std::size_t crlf = 0;
    for (const auto& eol : eols_) {
        if (eol == "\n") {
            ++lf;
        } else if (eol == "\r\n") {
            ++crlf;
        }
    }
    return crlf > lf ? std::string_view{"\r\n"} : std::string_view{"\n"};
}

std::string LineBuffer::join(const LineRange& range) const {
    std::string out;
    for (auto n = range.first; n <= range.last; ++n) {
        if (n != range.first) {
            out += '\n';
        }
        out += line(n);
    }
    return out;
}

void LineBuffer::replace(const LineRange& range, const std::vector<std::string>& replacement) {
    if (range.first < 1 || range.last < range.first || range.last > lines_.size()) {
        throw Error("line range out of bounds");
    }
    splice(range.first, range.size(), replacement);
}

void LineBuffer::splice(std::size_t first, std::size_t count, const std::vector<std::string>& replacement) {
    if (first < 1 || first - 1 + count > lines_.size()) {
        throw Error("line range out of bounds");
    }
    const auto begin = first - 1;
    const std::string fallback{dominant_eol()};
    const bool at_end = begin + count == lines_.size();

    std::vector<std::string> eols;
    eols.reserve(replacement.size());
    for (std::size_t i = 0; i < replacement.size(); ++i) {
        if (i + 1 == replacement.size() && count > 0) {
            eols.push_back(eols_[begin + count - 1]);
        } else if (i + 1 < count) {
            eols.push_back(eols_[begin + i]);
        } else if (i + 1 == replacement.size() && at_end && begin > 0) {
            // Appending after an unterminated last line: the old last line
            // gains a terminator and the new one keeps the original ending.
            eols.push_back(eols_[begin - 1]);
            if (eols_[begin - 1].empty()) {
                eols_[begin - 1] = fallback;
            }
        } else {
            eols.push_back(fallback);
        }
    }
    if (replacement.empty() && count > 0 && at_end && begin > 0) {
        eols_[begin - 1] = eols_[begin + count - 1];
    }

    const auto b = static_cast<std::ptrdiff_t>(begin);
    const auto e = static_cast<std::ptrdiff_t>(begin + count);
    lines_.erase(lines_.begin() + b, lines_.begin() + e);
    eols_.erase(eols_.begin() + b, eols_.begin() + e);
    lines_.insert(lines_.begin() + b, replacement.begin(), replacement.end());
    eols_.insert(eols_.begin() + b, eols.begin(), eols.end());
}

std::string LineBuffer::str() const {
    std::string out;
    for (std::size_t i = 0; i < lines_.size(); ++i) {
        out += lines_[i];
        out += eols_[i];
    }
    return out;
}

std::vector<std::string> split_lines(std::string_view text) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (pos < text.size()) {
        const auto nl = text.find('\n', pos);
        if (nl == std::string_view::npos) {
            out.emplace_back(text.substr(pos));
            break;
        }
        auto end = nl;
        if (end > pos && text[end - 1] == '\r') {
            --end;
        }
        out.emplace_back(text.substr(pos, end - pos));
        pos = nl + 1;
    }
    return out;
}

std::string join_lines(const std::vector<std::string>& lines, std::string_view sep) {
    std::string out;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        if (i != 0) {
            out += sep;
        }
        out += lines[i];
    }
    return out;
}

std::vector<std::string_view> tokenize(std::string_view text) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && is_space(text[i])) {
            ++i;
        }
        const auto start = i;
        while (i < text.size() && !is_space(text[i])) {
            ++i;
        }
        if (i > start) {
            out.push_back(text.substr(start, i - start));
        }
    }
    return out;
}

std::size_t count_tokens(std::string_view text) {
    std::size_t n = 0;
    bool in_token = false;
    for (char c : text) {
        if (is_space(c)) {
            in_token = false;
        } else if (!in_token) {
            in_token = true;
            ++n;
        }
    }
    return n;
}

std::string normalize_whitespace(std::string_view text) {
    std::string out;
    for (auto token : tokenize(text)) {
        if (!out.empty()) {
            out += ' ';
        }
        out += token;
    }
    return out;
}

std::string_view trim(std::string_view text) {
    while (!text.empty() && is_space(text.front())) {
        text.remove_prefix(1);
    }
    while (!text.empty() && is_space(text.back())) {
        text.remove_suffix(1);
    }
    return text;
}

std::string trim_right(std::string_view text) {
    while (!text.empty() && is_space(text.back())) {
        text.remove_suffix(1);
    }
    return std::string{text};
}

std::string sha256_hex(std::string_view data) {
    std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
    unsigned int length = 0;
    if (EVP_Digest(data.data(), data.size(), digest.data(), &length, EVP_sha256(), nullptr) != 1) {
        throw Error("sha256 failed");
    }
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(length * 2);
    for (unsigned int i = 0; i < length; ++i) {
        out += hex[digest[i] >> 4];
        out += hex[digest[i] & 0xf];
    }
    return out;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("cannot open " + path);
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, std::string_view contents) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error("cannot write " + path);
    }
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) {
        throw Error("short write to " + path);
    }
}

Instant now_ms() { return std::chrono::time_point_cast<Millis>(Clock::now()); }

std::string format_iso8601(Instant t) {
    using namespace std::chrono;
    const auto day = floor<days>(t);
    const year_month_day ymd{day};
    const hh_mm_ss hms{t - day};
    char buf[40];
    const auto ms = hms.subseconds().count();
    if (ms == 0) {
        std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02dZ", static_cast<int>(ymd.year()),
                      static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                      static_cast<int>(hms.hours().count()), static_cast<int>(hms.minutes().count()),
                      static_cast<int>(hms.seconds().count()));
    } else {
        std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02d:%02d:%02d.%03dZ", static_cast<int>(ymd.year()),
                      static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()),
                      static_cast<int>(hms.hours().count()), static_cast<int>(hms.minutes().count()),
                      static_cast<int>(hms.seconds().count()), static_cast<int>(ms));
    }
    return buf;
}

std::optional<Instant> parse_iso8601(std::string_view text) {
    using namespace std::chrono;
    auto number = [&](std::size_t pos, std::size_t len) -> std::optional<int> {
        if (pos + len > text.size()) {
            return std::nullopt;
        }
        int value = 0;
        const auto* first = text.data() + pos;
        const auto [ptr, ec] = std::from_chars(first, first + len, value);
        if (ec != std::errc{} || ptr != first + len) {
            return std::nullopt;
        }
        return value;
    };
    auto expect = [&](std::size_t pos, char c) { return pos < text.size() && text[pos] == c; };

    if (text.size() < 20 || !expect(4, '-') || !expect(7, '-') || !(expect(10, 'T') || expect(10, ' ')) ||
        !expect(13, ':') || !expect(16, ':')) {
        return std::nullopt;
    }
    const auto y = number(0, 4);
    const auto mo = number(5, 2);
    const auto d = number(8, 2);
    const auto h = number(11, 2);
    const auto mi = number(14, 2);
    const auto s = number(17, 2);
    if (!y || !mo || !d || !h || !mi || !s || *h > 23 || *mi > 59 || *s > 60) {
        return std::nullopt;
    }
    std::size_t pos = 19;
    int millis = 0;
    if (expect(pos, '.')) {
        ++pos;
        int digits = 0;
        while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) {
            if (digits < 3) {
                millis = millis * 10 + (text[pos] - '0');
            }
            ++digits;
            ++pos;
        }
        if (digits == 0) {
            return std::nullopt;
        }
        for (int i = digits; i < 3; ++i) {
            millis *= 10;
        }
    }
    const auto rest = text.substr(pos);
    if (rest != "Z" && rest != "+00:00") {
        return std::nullopt;
    }
    const year_month_day ymd{year{*y}, month{static_cast<unsigned>(*mo)}, day{static_cast<unsigned>(*d)}};
    if (!ymd.ok()) {
        return std::nullopt;
    }
    return Instant{sys_days{ymd}.time_since_epoch() + hours{*h} + minutes{*mi} + seconds{*s} + Millis{millis}};
}

}  // namespace shadowfix
