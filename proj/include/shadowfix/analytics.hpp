#pragma once

#include "shadowfix/error.hpp"
#include "shadowfix/patching.hpp"
#include "shadowfix/shadow.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace shadowfix::analytics {

enum class AnalyticsErrc { degenerate_comparison, inconsistent_sample, bad_input };
using AnalyticsError = CodedError<AnalyticsErrc>;

/// Samples per group needed to tell success proportions p1 and p2 apart:
/// ceil(16 p(1-p) / (p1-p2)^2) with p the mean of p1 and p2. Results within
/// 1e-9 (relative) of an integer are taken as that integer, so that
/// rounding noise in the division does not add a sample.
/// Throws AnalyticsError(degenerate_comparison) when p1 == p2 and
/// AnalyticsError(bad_input) outside [0, 1].
[[nodiscard]] std::uint64_t sample_size(double p1, double p2);

/// 100 * num / den rounded half-up. den must be positive.
[[nodiscard]] int percent_half_up(std::size_t num, std::size_t den);

/// sum / n rounded half-up. n must be positive.
[[nodiscard]] std::size_t mean_half_up(std::size_t sum, std::size_t n);

enum class GroupBy { model, recipe };

/// Integer percentages; a cell is absent when its group has no sessions.
struct PassRateTable {
    std::string row_header;
    std::vector<std::string> rows;
    std::vector<std::string> columns;
    /// (row index, column index) -> percentage.
    std::map<std::pair<std::size_t, std::size_t>, int> cells;

    [[nodiscard]] std::optional<int> at(std::size_t row, std::size_t column) const;
};

/// Share of sessions per group whose passing attempt came at an iteration
/// no later than `iteration_cap`. One row.
[[nodiscard]] PassRateTable pass_rate(std::span<const shadow::RepairSession> sessions, GroupBy group_by,
                                      int iteration_cap);

/// pass_rate for each cap in `caps`, one row per cap.
[[nodiscard]] PassRateTable pass_rate_table(std::span<const shadow::RepairSession> sessions, GroupBy group_by,
                                            const std::vector<int>& caps);

/// Recipes down, models across, at one iteration cap.
[[nodiscard]] PassRateTable recipe_model_table(std::span<const shadow::RepairSession> sessions, int iteration_cap);

/// Every column non-decreasing from the first row down.
[[nodiscard]] bool column_monotone(const PassRateTable& table);

struct ReviewerCounts {
    std::string reviewer;
    std::size_t exact = 0;
    std::size_t plausible = 0;
    std::size_t implausible = 0;

    [[nodiscard]] std::size_t total() const noexcept { return exact + plausible + implausible; }

    friend bool operator==(const ReviewerCounts&, const ReviewerCounts&) = default;
};

struct ClassificationSummary {
    std::vector<ReviewerCounts> reviewers;
    /// Per-column mean over reviewers, rounded half-up.
    ReviewerCounts average{"average"};
    std::size_t sample_size = 0;
};

/// Tallies each reviewer's labels. Throws
/// AnalyticsError(inconsistent_sample) when reviewers labeled different
/// (session, attempt) sets or one attempt twice.
[[nodiscard]] ClassificationSummary classification_summary(std::span<const patching::ManualLabel> labels);

/// Same from ready-made tallies; every reviewer must have the same total.
[[nodiscard]] ClassificationSummary summarize_counts(std::vector<ReviewerCounts> reviewers);

/// Labels of passing attempts: exact when the candidate token-matches the
/// session's historical fix, else the first reviewer label for that
/// attempt, else unlabeled.
[[nodiscard]] std::map<patching::FixLabel, std::size_t> classify_passing(
    std::span<const shadow::RepairSession> sessions, std::span<const patching::ManualLabel> labels);

struct HistogramRow {
    std::string bucket;
    std::size_t pass_count = 0;
    std::size_t fail_count = 0;

    friend bool operator==(const HistogramRow&, const HistogramRow&) = default;
};

/// Non-empty buckets of session total durations, in time order.
[[nodiscard]] std::vector<HistogramRow> time_histogram(std::span<const shadow::RepairSession> sessions,
                                                       int overflow_minutes = 60);

[[nodiscard]] std::string render_text(const PassRateTable& table);
[[nodiscard]] std::string render_csv(const PassRateTable& table);
[[nodiscard]] std::string render_text(const ClassificationSummary& summary);
[[nodiscard]] std::string render_csv(const ClassificationSummary& summary);
[[nodiscard]] std::string render_text(const std::vector<HistogramRow>& histogram);
[[nodiscard]] std::string render_csv(const std::vector<HistogramRow>& histogram);

}  // namespace shadowfix::analytics
