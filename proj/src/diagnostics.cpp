#include "shadowfix/diagnostics.hpp"

#include <charconv>
#include <set>
#include <tuple>

namespace shadowfix::diagnostics {

std::string_view to_string(Severity s) noexcept {
    switch (s) {
    case Severity::error:
        return "error";
    case Severity::static_check:
        return "static-check";
    }
    return "error";
}

std::optional<Severity> parse_severity(std::string_view s) noexcept {
    if (s == "error") {
        return Severity::error;
    }
    if (s == "static-check") {
        return Severity::static_check;
    }
    return std::nullopt;
}

void to_json(nlohmann::json& j, const CompileError& e) {
    j = nlohmann::json{{"file", e.file},
                       {"line", e.line},
                       {"message", e.message},
                       {"severity", std::string(to_string(e.severity))},
                       {"category", e.category},
                       {"raw", e.raw}};
    j["column"] = e.column ? nlohmann::json(*e.column) : nlohmann::json(nullptr);
}

void from_json(const nlohmann::json& j, CompileError& e) {
    e.file = j.at("file").get<std::string>();
    e.line = j.at("line").get<std::size_t>();
    if (j.contains("column") && !j.at("column").is_null()) {
        e.column = j.at("column").get<std::size_t>();
    } else {
        e.column.reset();
    }
    e.message = j.at("message").get<std::string>();
    e.severity = parse_severity(j.value("severity", "error")).value_or(Severity::error);
    e.category = j.value("category", "");
    e.raw = j.value("raw", "");
}

void to_json(nlohmann::json& j, const LogPattern& p) {
    j = nlohmann::json{{"name", p.name},
                       {"regex", p.regex},
                       {"severity", std::string(to_string(p.severity))},
                       {"file_group", p.file_group},
                       {"line_group", p.line_group},
                       {"column_group", p.column_group},
                       {"message_group", p.message_group}};
}

void from_json(const nlohmann::json& j, LogPattern& p) {
    p.name = j.value("name", "");
    p.regex = j.at("regex").get<std::string>();
    p.severity = parse_severity(j.value("severity", "static-check")).value_or(Severity::static_check);
    p.file_group = j.value("file_group", 1);
    p.line_group = j.value("line_group", 2);
    p.column_group = j.value("column_group", 0);
    p.message_group = j.value("message_group", 3);
}

LogGrammar::LogGrammar() : LogGrammar(default_patterns()) {}

LogGrammar::LogGrammar(std::vector<LogPattern> patterns) : patterns_(std::move(patterns)) {
    compiled_.reserve(patterns_.size());
    for (const auto& p : patterns_) {
        try {
            compiled_.emplace_back(p.regex, std::regex::ECMAScript | std::regex::optimize);
        } catch (const std::regex_error& e) {
            throw TaxonomyError("log pattern '" + p.name + "': " + e.what());
        }
    }
}

std::vector<LogPattern> LogGrammar::default_patterns() {
    return {
        {"ld-undefined-reference", R"(^(\S.*?):(\d+): (undefined reference to .+)$)", Severity::error, 1, 2, 0, 3},
        {"static-check", R"(^(\S.*?):(\d+):(?:(\d+):)? static[- ]check(?: violation)?: (.+)$)", Severity::static_check,
         1, 2, 3, 4},
        {"cppcheck-legacy", R"(^\[(.+?):(\d+)\]: \((?:error|warning|style|performance|portability)\) (.+)$)",
         Severity::static_check, 1, 2, 0, 3},
    };
}

namespace {

const std::regex& compiler_line() {
    static const std::regex re(R"(^(\S.*?):(\d+):(?:(\d+):)?\s*(fatal error|error|warning|note|remark):\s?(.*)$)",
                               std::regex::ECMAScript | std::regex::optimize);
    return re;
}

std::optional<std::size_t> to_positive(const std::ssub_match& m) {
    if (!m.matched) {
        return std::nullopt;
    }
    std::size_t value = 0;
    const auto s = m.str();
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc{} || ptr != s.data() + s.size() || value == 0) {
        return std::nullopt;
    }
    return value;
}

bool starts_with(std::string_view s, std::string_view prefix) { return s.substr(0, prefix.size()) == prefix; }

enum class LineKind { error, warning, note, continuation, other };

struct Classified {
    LineKind kind = LineKind::other;
    CompileError error;
};

Classified classify(const std::string& line, const LogGrammar& grammar) {
    Classified out;
    if (line.empty()) {
        return out;
    }
    if (line.front() == ' ' || line.front() == '\t' || starts_with(line, "In file included from")) {
        out.kind = LineKind::continuation;
        return out;
    }
    // Cheap filter before running regexes: every shape needs ":<digit>".
    bool maybe = false;
    for (std::size_t i = 0; i + 1 < line.size(); ++i) {
        if (line[i] == ':' && line[i + 1] >= '0' && line[i + 1] <= '9') {
            maybe = true;
            break;
        }
    }
    if (!maybe) {
        return out;
    }

    std::smatch m;
    if (std::regex_match(line, m, compiler_line())) {
        const auto kind = m[4].str();
        if (kind == "note" || kind == "remark") {
            out.kind = LineKind::note;
            return out;
        }
        if (kind == "warning") {
            out.kind = LineKind::warning;
            return out;
        }
        const auto line_no = to_positive(m[2]);
        if (!line_no) {
            return out;
        }
        out.kind = LineKind::error;
        out.error.file = m[1].str();
        out.error.line = *line_no;
        out.error.column = to_positive(m[3]);
        out.error.message = m[5].str();
        out.error.severity = Severity::error;
        return out;
    }

    const auto& patterns = grammar.patterns();
    const auto& compiled = grammar.compiled();
    for (std::size_t i = 0; i < compiled.size(); ++i) {
        if (!std::regex_match(line, m, compiled[i])) {
            continue;
        }
        const auto& p = patterns[i];
        auto group = [&](int g) -> std::ssub_match {
            if (g <= 0 || static_cast<std::size_t>(g) >= m.size()) {
                return {};
            }
            return m[static_cast<std::size_t>(g)];
        };
        const auto line_no = to_positive(group(p.line_group));
        if (!line_no || !group(p.file_group).matched) {
            continue;
        }
        out.kind = LineKind::error;
        out.error.file = group(p.file_group).str();
        out.error.line = *line_no;
        out.error.column = to_positive(group(p.column_group));
        out.error.message = group(p.message_group).str();
        out.error.severity = p.severity;
        return out;
    }
    return out;
}

}  // namespace

std::vector<CompileError> parse_log(std::string_view log, const LogGrammar& grammar) {
    std::vector<CompileError> errors;
    // Byte span of the current error group within `log`.
    std::optional<std::size_t> group_start;
    std::size_t group_end = 0;

    auto close_group = [&] {
        if (group_start) {
            errors.back().raw = std::string(log.substr(*group_start, group_end - *group_start));
            group_start.reset();
        }
    };

    std::size_t pos = 0;
    while (pos < log.size()) {
        auto nl = log.find('\n', pos);
        if (nl == std::string_view::npos) {
            nl = log.size();
        }
        auto end = nl;
        if (end > pos && log[end - 1] == '\r') {
            --end;
        }
        const std::string line(log.substr(pos, end - pos));
        auto c = classify(line, grammar);

        switch (c.kind) {
        case LineKind::error:
            close_group();
            errors.push_back(std::move(c.error));
            group_start = pos;
            group_end = end;
            break;
        case LineKind::note:
        case LineKind::continuation:
            if (group_start) {
                group_end = end;
            }
            break;
        case LineKind::warning:
        case LineKind::other:
            close_group();
            break;
        }
        pos = nl + 1;
    }
    close_group();
    return errors;
}

std::vector<CompileError> parse_and_categorize(std::string_view log, const Taxonomy& taxonomy,
                                               const LogGrammar& grammar) {
    auto errors = parse_log(log, grammar);
    for (auto& e : errors) {
        e.category = taxonomy.categorize(e).id;
    }
    return errors;
}

std::vector<CompileError> select_primary_errors(std::span<const CompileError> errors, std::size_t cap) {
    if (cap < 1) {
        throw std::invalid_argument("select_primary_errors: cap must be >= 1");
    }
    std::vector<CompileError> out;
    std::set<std::tuple<std::string, std::size_t, std::string>> seen;
    for (const auto& e : errors) {
        if (out.size() == cap) {
            break;
        }
        if (seen.emplace(e.file, e.line, e.message).second) {
            out.push_back(e);
        }
    }
    return out;
}

}  // namespace shadowfix::diagnostics
