#pragma once

#include "shadowfix/diagnostics.hpp"
#include "shadowfix/error.hpp"
#include "shadowfix/text.hpp"

#include <nlohmann/json.hpp>

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace shadowfix::patching {

enum class PatchErrc { line_out_of_range, span_out_of_range };
using PatchError = CodedError<PatchErrc>;

/// The lines around a diagnostic. `core` is what a patch replaces; the rest
/// of `span` is context shown to the model.
struct Snippet {
    std::string file;
    LineRange span;
    LineRange core;
    std::string text;

    friend bool operator==(const Snippet&, const Snippet&) = default;
};

void to_json(nlohmann::json& j, const Snippet& s);
void from_json(const nlohmann::json& j, Snippet& s);

struct PatchOrigin {
    std::string model;
    int iteration = 0;
};

struct Patch {
    std::string file;
    LineRange span;
    std::string replacement;
    PatchOrigin origin;
};

/// Lines [line - context, line + context] clipped to the file. The core
/// starts at the diagnostic line and grows downward while the statement is
/// visibly continued (trailing backslash or open parentheses), bounded by
/// the span.
[[nodiscard]] Snippet extract_snippet(std::string_view source, const diagnostics::CompileError& error,
                                      std::size_t context = 3);

/// Returns `source` with the lines of `patch.span` replaced by the lines of
/// `patch.replacement`. Bytes outside the span are preserved exactly,
/// including line endings. The replacement splits at every newline, so
/// "a\n" is two lines (the second empty) and "" is one empty line.
[[nodiscard]] std::string apply_patch(std::string_view source, const Patch& patch);

/// Case-sensitive comparison of whitespace-delimited token sequences.
[[nodiscard]] bool exact_match(std::string_view candidate, std::string_view reference);

enum class FixLabel { exact, plausible, implausible, unlabeled };
enum class LabelSource { automatic, manual, none };

[[nodiscard]] std::string_view to_string(FixLabel l) noexcept;
[[nodiscard]] std::optional<FixLabel> parse_fix_label(std::string_view s) noexcept;

struct FixClassification {
    FixLabel label = FixLabel::unlabeled;
    LabelSource source = LabelSource::none;

    friend bool operator==(const FixClassification&, const FixClassification&) = default;
};

/// exact when `historical` token-matches; otherwise the manual label if
/// given; otherwise unlabeled (pending review).
[[nodiscard]] FixClassification classify_fix(std::string_view candidate, const std::optional<std::string>& historical,
                                             const std::optional<FixLabel>& manual_label);

/// One reviewer verdict on one repair attempt.
struct ManualLabel {
    std::string session_id;
    int attempt = 0;
    FixLabel label = FixLabel::unlabeled;
    std::string reviewer;
};

/// Reads the JSON-lines label file ({session_id, attempt, label, reviewer}).
/// Throws Error naming the offending line.
[[nodiscard]] std::vector<ManualLabel> load_manual_labels(const std::string& path);
[[nodiscard]] std::vector<ManualLabel> parse_manual_labels(std::string_view text);

}  // namespace shadowfix::patching
