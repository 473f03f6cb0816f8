#include "shadowfix/prompting.hpp"

#include <algorithm>

namespace shadowfix::prompting {

namespace {

// Keep in sync with data/prompt_template.txt (checked by a unit test).
constexpr const char* kBuiltinTemplate = R"(%label full_source ### FULL SOURCE FILE
%label error_log ### ERROR LOG
%label erroneous_snippet ### ERRONEOUS CODE
%label human_fix_example ### HUMAN FIX EXAMPLE
### INSTRUCTION
You are an experienced C/C++ engineer on an embedded software product.
The code below breaks the continuous integration build of {{target_file}}.
Write the code that replaces the erroneous lines so that the file compiles.
Reply with the replacement code only: no explanation, no surrounding context.

{{full_source}}{{error_log}}{{erroneous_snippet}}{{human_fix_example}}### REPLACEMENT TARGET
{{target}}
)";

std::optional<InputKind> parse_kind(std::string_view s) {
    for (auto k : kAllInputKinds) {
        if (to_string(k) == s) {
            return k;
        }
    }
    return std::nullopt;
}

const std::set<std::string>& known_placeholders() {
    static const std::set<std::string> names{"target_file",       "target",           "full_source", "error_log",
                                             "erroneous_snippet", "human_fix_example"};
    return names;
}

}  // namespace

std::string_view to_string(InputKind k) noexcept {
    switch (k) {
    case InputKind::full_source:
        return "full_source";
    case InputKind::error_log:
        return "error_log";
    case InputKind::erroneous_snippet:
        return "erroneous_snippet";
    case InputKind::human_fix_example:
        return "human_fix_example";
    }
    return "full_source";
}

PromptRecipe recipe(int number) {
    using K = InputKind;
    switch (number) {
    case 0:
        return {0, {K::full_source}};
    case 1:
        return {1, {K::error_log}};
    case 2:
        return {2, {K::erroneous_snippet}};
    case 3:
        return {3, {K::error_log, K::erroneous_snippet}};
    case 4:
        return {4, {K::erroneous_snippet, K::human_fix_example}};
    case 5:
        return {5, {K::error_log, K::human_fix_example}};
    case 6:
        return {6, {K::error_log, K::erroneous_snippet, K::human_fix_example}};
    default:
        throw PromptError(PromptErrc::unknown_recipe, "unknown prompt recipe " + std::to_string(number));
    }
}

std::set<InputKind> recipe_inputs(int number) { return recipe(number).inputs(); }

const PromptTemplate& PromptTemplate::builtin() {
    static const PromptTemplate t = parse(kBuiltinTemplate);
    return t;
}

PromptTemplate PromptTemplate::parse(std::string_view text) {
    PromptTemplate t;
    t.labels_ = {{InputKind::full_source, "### FULL SOURCE FILE"},
                 {InputKind::error_log, "### ERROR LOG"},
                 {InputKind::erroneous_snippet, "### ERRONEOUS CODE"},
                 {InputKind::human_fix_example, "### HUMAN FIX EXAMPLE"}};

    std::size_t pos = 0;
    while (pos < text.size() && text.substr(pos, 7) == "%label ") {
        auto nl = text.find('\n', pos);
        if (nl == std::string_view::npos) {
            nl = text.size();
        }
        const auto directive = text.substr(pos + 7, nl - pos - 7);
        const auto space = directive.find(' ');
        const auto kind = parse_kind(directive.substr(0, space));
        if (!kind || space == std::string_view::npos) {
            throw PromptError(PromptErrc::bad_template, "bad %label directive: " + std::string(directive));
        }
        t.labels_[*kind] = std::string(trim(directive.substr(space + 1)));
        pos = std::min(text.size(), nl + 1);
    }
    t.body_ = std::string(text.substr(pos));

    std::set<std::string> seen;
    std::size_t at = 0;
    while ((at = t.body_.find("{{", at)) != std::string::npos) {
        const auto close = t.body_.find("}}", at);
        if (close == std::string::npos) {
            throw PromptError(PromptErrc::bad_template, "unterminated placeholder");
        }
        const auto name = t.body_.substr(at + 2, close - at - 2);
        if (!known_placeholders().count(name)) {
            throw PromptError(PromptErrc::bad_template, "unknown placeholder {{" + name + "}}");
        }
        seen.insert(name);
        at = close + 2;
    }
    for (auto k : kAllInputKinds) {
        if (!seen.count(std::string(to_string(k)))) {
            throw PromptError(PromptErrc::bad_template, "template lacks {{" + std::string(to_string(k)) + "}}");
        }
    }
    return t;
}

PromptTemplate PromptTemplate::load(const std::string& path) { return parse(read_file(path)); }

std::string PromptTemplate::render(const std::map<std::string, std::string>& values) const {
    std::string out;
    std::size_t pos = 0;
    while (true) {
        const auto open = body_.find("{{", pos);
        if (open == std::string::npos) {
            out.append(body_, pos);
            break;
        }
        const auto close = body_.find("}}", open);
        out.append(body_, pos, open - pos);
        const auto it = values.find(body_.substr(open + 2, close - open - 2));
        if (it != values.end()) {
            out += it->second;
        }
        pos = close + 2;
    }
    return out;
}

namespace {

std::string section(const std::string& label, std::string_view body) {
    std::string out = label;
    out += '\n';
    out += body;
    if (!body.empty() && body.back() != '\n') {
        out += '\n';
    }
    out += '\n';
    return out;
}

std::string range_text(const LineRange& r) {
    return r.first == r.last ? std::to_string(r.first) : std::to_string(r.first) + "-" + std::to_string(r.last);
}

// Lines of target_file that must survive source truncation.
std::vector<std::size_t> anchor_lines(const PromptInputs& in) {
    std::vector<std::size_t> lines;
    for (const auto& e : in.errors) {
        if (e.file == in.target_file) {
            lines.push_back(e.line);
        }
    }
    if (in.target_lines) {
        for (auto l = in.target_lines->first; l <= in.target_lines->last; ++l) {
            lines.push_back(l);
        }
    }
    if (lines.empty()) {
        lines.push_back(1);
    }
    std::sort(lines.begin(), lines.end());
    lines.erase(std::unique(lines.begin(), lines.end()), lines.end());
    return lines;
}

std::string windowed_source(const PromptInputs& in, std::size_t radius) {
    const auto lines = split_lines(in.source);
    const auto n = lines.size();
    std::vector<bool> keep(n, false);
    for (auto anchor : anchor_lines(in)) {
        const auto lo = anchor > radius ? anchor - radius : 1;
        const auto hi = std::min(n, anchor + radius);
        for (auto l = lo; l <= hi; ++l) {
            keep[l - 1] = true;
        }
    }
    std::string out;
    std::size_t l = 0;
    while (l < n) {
        if (keep[l]) {
            out += lines[l];
            out += '\n';
            ++l;
            continue;
        }
        const auto start = l;
        while (l < n && !keep[l]) {
            ++l;
        }
        out += "// ... lines " + range_text({start + 1, l}) + " omitted ...\n";
    }
    return out;
}

std::string first_lines(std::string_view text, std::size_t count) {
    auto lines = split_lines(text);
    if (lines.size() > count) {
        lines.resize(count);
    }
    return join_lines(lines);
}

std::string snippet_section(const std::vector<patching::Snippet>& snippets) {
    std::string out;
    for (const auto& s : snippets) {
        if (!out.empty()) {
            out += '\n';
        }
        out += "// " + s.file + " lines " + range_text(s.span) + " (error at line " + range_text(s.core) + ")\n";
        out += s.text;
        out += '\n';
    }
    return out;
}

std::string example_section(const fixmine::FixExample& e) {
    std::string out = "// category: " + e.category + "\n// before:\n";
    out += e.faulty_segment;
    out += "\n// after:\n";
    out += e.fixed_segment;
    out += '\n';
    return out;
}

void require(bool ok, InputKind kind, int recipe_number) {
    if (!ok) {
        throw PromptError(PromptErrc::missing_input, "recipe " + std::to_string(recipe_number) + " needs " +
                                                         std::string(to_string(kind)) + " but none is available");
    }
}

std::string render(const PromptRecipe& recipe, const PromptInputs& in, const PromptTemplate& tmpl,
                   const Truncation& cut) {
    std::map<std::string, std::string> values;
    values["target_file"] = in.target_file.empty() ? std::string("the failing file") : in.target_file;
    if (in.target_lines) {
        values["target"] = "Replace line(s) " + range_text(*in.target_lines) + " of " + in.target_file + ".";
    } else if (!in.target_file.empty()) {
        values["target"] = "Replace the erroneous code in " + in.target_file + ".";
    } else {
        values["target"] = "Replace the erroneous code.";
    }

    if (recipe.has(InputKind::full_source)) {
        const auto body = cut.source_radius ? windowed_source(in, *cut.source_radius) : in.source;
        values["full_source"] = section(tmpl.label(InputKind::full_source), body);
    }
    if (recipe.has(InputKind::error_log)) {
        const auto body = cut.log_lines ? first_lines(in.log_excerpt, *cut.log_lines) : in.log_excerpt;
        values["error_log"] = section(tmpl.label(InputKind::error_log), body);
    }
    if (recipe.has(InputKind::erroneous_snippet)) {
        values["erroneous_snippet"] = section(tmpl.label(InputKind::erroneous_snippet), snippet_section(in.snippets));
    }
    if (recipe.has(InputKind::human_fix_example)) {
        values["human_fix_example"] = section(tmpl.label(InputKind::human_fix_example), example_section(*in.example));
    }
    return tmpl.render(values);
}

}  // namespace

Prompt assemble(const PromptRecipe& recipe, PromptInputs inputs, const PromptTemplate& tmpl) {
    const int n = recipe.number();
    if (recipe.has(InputKind::full_source)) {
        require(!inputs.target_file.empty() && !inputs.source.empty(), InputKind::full_source, n);
    }
    if (recipe.has(InputKind::error_log)) {
        require(!trim(inputs.log_excerpt).empty(), InputKind::error_log, n);
    }
    if (recipe.has(InputKind::erroneous_snippet)) {
        require(!inputs.snippets.empty(), InputKind::erroneous_snippet, n);
    }
    if (recipe.has(InputKind::human_fix_example)) {
        require(inputs.example.has_value(), InputKind::human_fix_example, n);
    }
    auto text = render(recipe, inputs, tmpl, {});
    return Prompt{recipe, std::move(text), std::move(inputs), tmpl, {}};
}

BudgetResult token_budget_check(const Prompt& prompt, std::size_t limit) {
    if (limit == 0) {
        throw std::invalid_argument("token_budget_check: limit must be positive");
    }
    if (count_tokens(prompt.text) <= limit) {
        return {false, prompt};
    }
    const auto& in = prompt.context;
    auto fits = [&](const Truncation& cut) {
        return count_tokens(render(prompt.recipe, in, prompt.tmpl, cut)) <= limit;
    };
    auto finish = [&](const Truncation& cut) {
        Prompt out = prompt;
        out.text = render(prompt.recipe, in, prompt.tmpl, cut);
        out.truncation = cut;
        return BudgetResult{true, std::move(out)};
    };

    Truncation cut;
    if (prompt.recipe.has(InputKind::full_source)) {
        // Largest radius that fits; token count is monotone in the radius.
        const auto n = split_lines(in.source).size();
        cut.source_radius = 0;
        if (fits(cut)) {
            std::size_t lo = 0;
            std::size_t hi = n;
            while (lo < hi) {
                const auto mid = lo + (hi - lo + 1) / 2;
                if (fits(Truncation{mid, std::nullopt})) {
                    lo = mid;
                } else {
                    hi = mid - 1;
                }
            }
            cut.source_radius = lo;
            return finish(cut);
        }
    }
    if (prompt.recipe.has(InputKind::error_log)) {
        const auto n = std::max<std::size_t>(1, split_lines(in.log_excerpt).size());
        cut.log_lines = 1;
        if (fits(cut)) {
            std::size_t lo = 1;
            std::size_t hi = n;
            while (lo < hi) {
                const auto mid = lo + (hi - lo + 1) / 2;
                if (fits(Truncation{cut.source_radius, mid})) {
                    lo = mid;
                } else {
                    hi = mid - 1;
                }
            }
            cut.log_lines = lo;
            return finish(cut);
        }
    }
    throw PromptError(PromptErrc::budget_impossible, "prompt needs more than " + std::to_string(limit) +
                                                         " tokens even after truncation");
}

std::string prompt_digest(const Prompt& prompt) { return sha256_hex(prompt.text); }

std::size_t count_data_sections(const Prompt& prompt) {
    std::size_t n = 0;
    for (const auto& line : split_lines(prompt.text)) {
        for (auto k : kAllInputKinds) {
            if (line == prompt.tmpl.label(k)) {
                ++n;
            }
        }
    }
    return n;
}

}  // namespace shadowfix::prompting
