#pragma once

#include "shadowfix/error.hpp"

#include <nlohmann/json.hpp>

#include <cstddef>
#include <optional>
#include <regex>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace shadowfix::diagnostics {

enum class Severity { error, static_check };

[[nodiscard]] std::string_view to_string(Severity s) noexcept;
[[nodiscard]] std::optional<Severity> parse_severity(std::string_view s) noexcept;

struct CompileError {
    std::string file;
    std::size_t line = 1;
    std::optional<std::size_t> column;
    std::string message;
    Severity severity = Severity::error;
    /// Taxonomy id; empty until categorized.
    std::string category;
    /// The diagnostic line plus any folded note/caret lines, verbatim from the log.
    std::string raw;

    friend bool operator==(const CompileError&, const CompileError&) = default;
};

void to_json(nlohmann::json& j, const CompileError& e);
void from_json(const nlohmann::json& j, CompileError& e);

class TaxonomyError : public Error {
public:
    using Error::Error;
};

struct ErrorCategory {
    std::string id;
    std::string description;
    bool dependency_related = false;
    /// ECMAScript regexes searched against the message. Empty means "match
    /// anything", which combined with `applies_to` scopes a category to one
    /// severity.
    std::vector<std::string> patterns;
    std::optional<Severity> applies_to;
    bool catch_all = false;
};

/// An ordered, validated list of categories. The first match wins; the
/// single catch-all entry is used when nothing else matches.
class Taxonomy {
public:
    explicit Taxonomy(std::vector<ErrorCategory> categories);

    /// The 14-entry taxonomy shipped in data/taxonomy.json.
    static const Taxonomy& builtin();
    static Taxonomy from_json(const nlohmann::json& j);
    static Taxonomy load(const std::string& path);

    [[nodiscard]] nlohmann::json to_json() const;

    [[nodiscard]] const std::vector<ErrorCategory>& categories() const noexcept { return categories_; }
    [[nodiscard]] std::size_t size() const noexcept { return categories_.size(); }
    [[nodiscard]] const ErrorCategory* find(std::string_view id) const noexcept;
    [[nodiscard]] const ErrorCategory& catch_all() const noexcept { return categories_[catch_all_]; }

    [[nodiscard]] const ErrorCategory& categorize(const CompileError& error) const;

private:
    std::vector<ErrorCategory> categories_;
    std::vector<std::vector<std::regex>> compiled_;
    std::size_t catch_all_ = 0;
};

[[nodiscard]] const ErrorCategory& categorize(const CompileError& error, const Taxonomy& taxonomy);

/// A diagnostic shape beyond the built-in compiler grammar, e.g. a static
/// checker's report line. Group indices refer to `regex` capture groups;
/// 0 means "not captured".
struct LogPattern {
    std::string name;
    std::string regex;
    Severity severity = Severity::static_check;
    int file_group = 1;
    int line_group = 2;
    int column_group = 0;
    int message_group = 3;
};

void to_json(nlohmann::json& j, const LogPattern& p);
void from_json(const nlohmann::json& j, LogPattern& p);

/// Parser configuration: compiled extra patterns applied after the
/// compiler grammar fails to match a line.
class LogGrammar {
public:
    LogGrammar();
    explicit LogGrammar(std::vector<LogPattern> patterns);

    /// Linker "file:line: undefined reference" lines plus a generic
    /// `file:line[:col]: static-check: msg` and cppcheck's legacy template.
    static std::vector<LogPattern> default_patterns();

    [[nodiscard]] const std::vector<LogPattern>& patterns() const noexcept { return patterns_; }
    [[nodiscard]] const std::vector<std::regex>& compiled() const noexcept { return compiled_; }

private:
    std::vector<LogPattern> patterns_;
    std::vector<std::regex> compiled_;
};

/// Extracts error and static-check diagnostics in log order. Warnings and
/// unrecognized lines are skipped; note, caret and include-trace lines that
/// follow an error are folded into its `raw`. Categories are left empty.
[[nodiscard]] std::vector<CompileError> parse_log(std::string_view log, const LogGrammar& grammar = LogGrammar{});

/// parse_log followed by categorize on each entry.
[[nodiscard]] std::vector<CompileError> parse_and_categorize(std::string_view log, const Taxonomy& taxonomy,
                                                             const LogGrammar& grammar = LogGrammar{});

/// At most `cap` errors, earliest first, skipping repeats of an earlier
/// (file, line, message).
[[nodiscard]] std::vector<CompileError> select_primary_errors(std::span<const CompileError> errors,
                                                              std::size_t cap = 3);

}  // namespace shadowfix::diagnostics
