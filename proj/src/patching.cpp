#include "shadowfix/patching.hpp"

#include <algorithm>

namespace shadowfix::patching {

void to_json(nlohmann::json& j, const Snippet& s) {
    j = nlohmann::json{{"file", s.file},
                       {"span", {s.span.first, s.span.last}},
                       {"core", {s.core.first, s.core.last}},
                       {"text", s.text}};
}

void from_json(const nlohmann::json& j, Snippet& s) {
    s.file = j.at("file").get<std::string>();
    s.span = {j.at("span").at(0).get<std::size_t>(), j.at("span").at(1).get<std::size_t>()};
    s.core = {j.at("core").at(0).get<std::size_t>(), j.at("core").at(1).get<std::size_t>()};
    s.text = j.at("text").get<std::string>();
}

namespace {

// Net parenthesis depth change of a line, ignoring string/char literals and
// line comments.
int paren_delta(std::string_view line) {
    int depth = 0;
    char quote = 0;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quote) {
            if (c == '\\') {
                ++i;
            } else if (c == quote) {
                quote = 0;
            }
            continue;
        }
        if (c == '"' || c == '\'') {
            quote = c;
        } else if (c == '/' && i + 1 < line.size() && line[i + 1] == '/') {
            break;
        } else if (c == '(') {
            ++depth;
        } else if (c == ')') {
            --depth;
        }
    }
    return depth;
}

bool continues(std::string_view line) {
    const auto t = trim_right(line);
    return !t.empty() && t.back() == '\\';
}

}  // namespace

Snippet extract_snippet(std::string_view source, const diagnostics::CompileError& error, std::size_t context) {
    const LineBuffer buf(source);
    if (error.line < 1 || error.line > buf.size()) {
        throw PatchError(PatchErrc::line_out_of_range, error.file + ":" + std::to_string(error.line) +
                                                           " is outside a " + std::to_string(buf.size()) +
                                                           "-line file");
    }
    Snippet s;
    s.file = error.file;
    s.span.first = error.line > context ? error.line - context : 1;
    s.span.last = std::min(buf.size(), error.line + context);

    auto last = error.line;
    int depth = paren_delta(buf.line(last));
    bool backslash = continues(buf.line(last));
    while ((depth > 0 || backslash) && last < s.span.last) {
        ++last;
        depth += paren_delta(buf.line(last));
        backslash = continues(buf.line(last));
    }
    s.core = {error.line, last};
    s.text = buf.join(s.span);
    return s;
}

namespace {

// Inverse of join_lines: "a\n" is two lines, "" is one empty line.
std::vector<std::string> replacement_lines(std::string_view text) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (true) {
        const auto nl = text.find('\n', pos);
        auto line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        if (!line.empty() && line.back() == '\r') {
            line.remove_suffix(1);
        }
        out.emplace_back(line);
        if (nl == std::string_view::npos) {
            return out;
        }
        pos = nl + 1;
    }
}

}  // namespace

std::string apply_patch(std::string_view source, const Patch& patch) {
    LineBuffer buf(source);
    const auto& span = patch.span;
    if (span.first < 1 || span.last < span.first || span.last > buf.size()) {
        throw PatchError(PatchErrc::span_out_of_range, patch.file + ": lines " + std::to_string(span.first) + "-" +
                                                           std::to_string(span.last) + " outside a " +
                                                           std::to_string(buf.size()) + "-line file");
    }
    buf.replace(span, replacement_lines(patch.replacement));
    return buf.str();
}

bool exact_match(std::string_view candidate, std::string_view reference) {
    return tokenize(candidate) == tokenize(reference);
}

std::string_view to_string(FixLabel l) noexcept {
    switch (l) {
    case FixLabel::exact:
        return "exact";
    case FixLabel::plausible:
        return "plausible";
    case FixLabel::implausible:
        return "implausible";
    case FixLabel::unlabeled:
        return "unlabeled";
    }
    return "unlabeled";
}

std::optional<FixLabel> parse_fix_label(std::string_view s) noexcept {
    for (auto l : {FixLabel::exact, FixLabel::plausible, FixLabel::implausible, FixLabel::unlabeled}) {
        if (to_string(l) == s) {
            return l;
        }
    }
    return std::nullopt;
}

FixClassification classify_fix(std::string_view candidate, const std::optional<std::string>& historical,
                               const std::optional<FixLabel>& manual_label) {
    if (historical && exact_match(candidate, *historical)) {
        return {FixLabel::exact, LabelSource::automatic};
    }
    if (manual_label) {
        return {*manual_label, LabelSource::manual};
    }
    return {FixLabel::unlabeled, LabelSource::none};
}

std::vector<ManualLabel> parse_manual_labels(std::string_view text) {
    std::vector<ManualLabel> out;
    std::size_t number = 0;
    for (const auto& line : split_lines(text)) {
        ++number;
        if (trim(line).empty()) {
            continue;
        }
        try {
            const auto j = nlohmann::json::parse(line);
            ManualLabel l;
            l.session_id = j.at("session_id").get<std::string>();
            l.attempt = j.at("attempt").get<int>();
            const auto label = j.at("label").get<std::string>();
            const auto parsed = parse_fix_label(label);
            if (!parsed || *parsed == FixLabel::unlabeled) {
                throw Error("unknown label '" + label + "'");
            }
            l.label = *parsed;
            l.reviewer = j.at("reviewer").get<std::string>();
            out.push_back(std::move(l));
        } catch (const nlohmann::json::exception& e) {
            throw Error("label file line " + std::to_string(number) + ": " + e.what());
        } catch (const Error& e) {
            throw Error("label file line " + std::to_string(number) + ": " + e.what());
        }
    }
    return out;
}

std::vector<ManualLabel> load_manual_labels(const std::string& path) { return parse_manual_labels(read_file(path)); }

}  // namespace shadowfix::patching
