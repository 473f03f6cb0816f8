#pragma once

#include "shadowfix/diagnostics.hpp"
#include "shadowfix/error.hpp"
#include "shadowfix/fixmine.hpp"
#include "shadowfix/patching.hpp"
#include "shadowfix/text.hpp"

#include <array>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace shadowfix::prompting {

enum class InputKind { full_source, error_log, erroneous_snippet, human_fix_example };

inline constexpr std::array<InputKind, 4> kAllInputKinds{InputKind::full_source, InputKind::error_log,
                                                        InputKind::erroneous_snippet, InputKind::human_fix_example};

[[nodiscard]] std::string_view to_string(InputKind k) noexcept;

enum class PromptErrc { unknown_recipe, missing_input, budget_impossible, bad_template };
using PromptError = CodedError<PromptErrc>;

inline constexpr int kRecipeCount = 7;

/// One of the seven fixed input combinations. Only obtainable through
/// recipe(), so every recipe in circulation is one of the table rows.
class PromptRecipe {
public:
    [[nodiscard]] int number() const noexcept { return number_; }
    [[nodiscard]] const std::set<InputKind>& inputs() const noexcept { return inputs_; }
    [[nodiscard]] bool has(InputKind k) const noexcept { return inputs_.count(k) != 0; }

    friend PromptRecipe recipe(int number);

private:
    PromptRecipe(int number, std::set<InputKind> inputs) : number_(number), inputs_(std::move(inputs)) {}

    int number_;
    std::set<InputKind> inputs_;
};

/// Throws PromptError(unknown_recipe) outside 0..6.
[[nodiscard]] PromptRecipe recipe(int number);
[[nodiscard]] std::set<InputKind> recipe_inputs(int number);

/// Instruction template. Text format:
///
///     %label <kind> <section header>     (optional, one per data kind)
///     ...body with {{placeholders}}...
///
/// Placeholders: {{target_file}}, {{target}}, and one per data kind
/// ({{full_source}}, {{error_log}}, {{erroneous_snippet}},
/// {{human_fix_example}}), each expanding to "<header>\n<body>\n\n" or to
/// nothing when the recipe omits that input.
class PromptTemplate {
public:
    static const PromptTemplate& builtin();
    static PromptTemplate parse(std::string_view text);
    static PromptTemplate load(const std::string& path);

    [[nodiscard]] const std::string& label(InputKind k) const { return labels_.at(k); }
    [[nodiscard]] const std::string& body() const noexcept { return body_; }

    [[nodiscard]] std::string render(const std::map<std::string, std::string>& values) const;

private:
    std::map<InputKind, std::string> labels_;
    std::string body_;
};

/// Everything a prompt may draw on. The shadow job fills all fields it can;
/// the recipe decides which are rendered.
struct PromptInputs {
    std::string target_file;
    /// Full text of target_file.
    std::string source;
    /// Body of the error-log section.
    std::string log_excerpt;
    std::vector<diagnostics::CompileError> errors;
    std::vector<patching::Snippet> snippets;
    std::optional<fixmine::FixExample> example;
    /// Lines the returned code will replace.
    std::optional<LineRange> target_lines;
};

/// Reductions applied by token_budget_check.
struct Truncation {
    /// Full source reduced to windows of this radius around error lines.
    std::optional<std::size_t> source_radius;
    /// Error log cut to its first N lines.
    std::optional<std::size_t> log_lines;

    friend bool operator==(const Truncation&, const Truncation&) = default;
};

struct Prompt {
    PromptRecipe recipe;
    std::string text;
    PromptInputs context;
    PromptTemplate tmpl;
    Truncation truncation;
};

/// Renders the recipe's sections in fixed order. Throws
/// PromptError(missing_input) when a section the recipe needs has no data.
[[nodiscard]] Prompt assemble(const PromptRecipe& recipe, PromptInputs inputs,
                              const PromptTemplate& tmpl = PromptTemplate::builtin());

struct BudgetResult {
    bool truncated = false;
    Prompt prompt;
};

/// Fits a prompt into `limit` whitespace tokens: first narrows the full
/// source to windows around the error lines, then shortens the error log.
/// Snippet and example sections are never cut. Throws
/// PromptError(budget_impossible) when even that does not fit.
[[nodiscard]] BudgetResult token_budget_check(const Prompt& prompt, std::size_t limit);

/// SHA-256 of the prompt text.
[[nodiscard]] std::string prompt_digest(const Prompt& prompt);

/// Number of data-section headers present in `text`.
[[nodiscard]] std::size_t count_data_sections(const Prompt& prompt);

}  // namespace shadowfix::prompting
