#include "shadowfix/analytics.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>
#include <tuple>

namespace shadowfix::analytics {

std::uint64_t sample_size(double p1, double p2) {
    if (!(p1 >= 0.0 && p1 <= 1.0) || !(p2 >= 0.0 && p2 <= 1.0)) {
        throw AnalyticsError(AnalyticsErrc::bad_input, fmt::format("proportions must lie in [0, 1], got {} and {}", p1, p2));
    }
    if (p1 == p2) {
        throw AnalyticsError(AnalyticsErrc::degenerate_comparison,
                             fmt::format("p1 and p2 are both {}; no sample size separates them", p1));
    }
    const double mean = (p1 + p2) / 2.0;
    const double diff = p1 - p2;
    const double n = 16.0 * mean * (1.0 - mean) / (diff * diff);
    if (!(n < 9.0e18)) {
        throw AnalyticsError(AnalyticsErrc::bad_input, "sample size does not fit in 64 bits");
    }
    const double nearest = std::round(n);
    if (std::abs(n - nearest) <= 1e-9 * std::max(1.0, nearest)) {
        return static_cast<std::uint64_t>(nearest);
    }
    return static_cast<std::uint64_t>(std::ceil(n));
}

int percent_half_up(std::size_t num, std::size_t den) {
    if (den == 0) {
        throw std::invalid_argument("percentage of an empty group");
    }
    return static_cast<int>((200 * num + den) / (2 * den));
}

std::size_t mean_half_up(std::size_t sum, std::size_t n) {
    if (n == 0) {
        throw std::invalid_argument("mean of nothing");
    }
    return (2 * sum + n) / (2 * n);
}

std::optional<int> PassRateTable::at(std::size_t row, std::size_t column) const {
    const auto it = cells.find({row, column});
    if (it == cells.end()) {
        return std::nullopt;
    }
    return it->second;
}

namespace {

std::string group_key(const shadow::RepairSession& s, GroupBy g) {
    return g == GroupBy::model ? s.model : std::to_string(s.recipe);
}

bool passed_within(const shadow::RepairSession& s, int cap) {
    const auto at = s.passed_at();
    return at && *at <= cap;
}

// Models in first-seen order; recipes numerically.
std::vector<std::string> group_columns(std::span<const shadow::RepairSession> sessions, GroupBy g) {
    std::vector<std::string> out;
    if (g == GroupBy::recipe) {
        std::set<int> recipes;
        for (const auto& s : sessions) {
            recipes.insert(s.recipe);
        }
        for (int r : recipes) {
            out.push_back(std::to_string(r));
        }
        return out;
    }
    for (const auto& s : sessions) {
        if (std::find(out.begin(), out.end(), s.model) == out.end()) {
            out.push_back(s.model);
        }
    }
    return out;
}

}  // namespace

PassRateTable pass_rate(std::span<const shadow::RepairSession> sessions, GroupBy group_by, int iteration_cap) {
    return pass_rate_table(sessions, group_by, {iteration_cap});
}

PassRateTable pass_rate_table(std::span<const shadow::RepairSession> sessions, GroupBy group_by,
                              const std::vector<int>& caps) {
    PassRateTable t;
    t.row_header = "iterations";
    t.columns = group_columns(sessions, group_by);
    for (int cap : caps) {
        if (cap < 1) {
            throw AnalyticsError(AnalyticsErrc::bad_input, "iteration cap must be at least 1");
        }
        t.rows.push_back(std::to_string(cap));
    }
    for (std::size_t c = 0; c < t.columns.size(); ++c) {
        std::size_t total = 0;
        std::vector<std::size_t> passed(caps.size(), 0);
        for (const auto& s : sessions) {
            if (group_key(s, group_by) != t.columns[c]) {
                continue;
            }
            ++total;
            for (std::size_t r = 0; r < caps.size(); ++r) {
                passed[r] += passed_within(s, caps[r]) ? 1 : 0;
            }
        }
        for (std::size_t r = 0; r < caps.size() && total > 0; ++r) {
            t.cells[{r, c}] = percent_half_up(passed[r], total);
        }
    }
    return t;
}

PassRateTable recipe_model_table(std::span<const shadow::RepairSession> sessions, int iteration_cap) {
    PassRateTable t;
    t.row_header = "recipe";
    t.columns = group_columns(sessions, GroupBy::model);
    t.rows = group_columns(sessions, GroupBy::recipe);
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        for (std::size_t c = 0; c < t.columns.size(); ++c) {
            std::size_t total = 0;
            std::size_t passed = 0;
            for (const auto& s : sessions) {
                if (s.model == t.columns[c] && std::to_string(s.recipe) == t.rows[r]) {
                    ++total;
                    passed += passed_within(s, iteration_cap) ? 1 : 0;
                }
            }
            if (total > 0) {
                t.cells[{r, c}] = percent_half_up(passed, total);
            }
        }
    }
    return t;
}

bool column_monotone(const PassRateTable& table) {
    for (std::size_t c = 0; c < table.columns.size(); ++c) {
        std::optional<int> prev;
        for (std::size_t r = 0; r < table.rows.size(); ++r) {
            const auto v = table.at(r, c);
            if (!v) {
                continue;
            }
            if (prev && *v < *prev) {
                return false;
            }
            prev = v;
        }
    }
    return true;
}

namespace {

void count(ReviewerCounts& rc, patching::FixLabel label) {
    switch (label) {
    case patching::FixLabel::exact:
        ++rc.exact;
        break;
    case patching::FixLabel::plausible:
        ++rc.plausible;
        break;
    case patching::FixLabel::implausible:
        ++rc.implausible;
        break;
    case patching::FixLabel::unlabeled:
        throw AnalyticsError(AnalyticsErrc::bad_input, "reviewer '" + rc.reviewer + "' left an attempt unlabeled");
    }
}

}  // namespace

ClassificationSummary classification_summary(std::span<const patching::ManualLabel> labels) {
    std::vector<std::string> order;
    std::map<std::string, ReviewerCounts> tallies;
    std::map<std::string, std::set<std::pair<std::string, int>>> samples;
    for (const auto& l : labels) {
        if (tallies.count(l.reviewer) == 0) {
            order.push_back(l.reviewer);
            tallies[l.reviewer].reviewer = l.reviewer;
        }
        if (!samples[l.reviewer].emplace(l.session_id, l.attempt).second) {
            throw AnalyticsError(AnalyticsErrc::inconsistent_sample,
                                 fmt::format("reviewer '{}' labeled {} attempt {} twice", l.reviewer, l.session_id,
                                             l.attempt));
        }
        count(tallies[l.reviewer], l.label);
    }
    for (const auto& name : order) {
        if (samples[name] != samples[order.front()]) {
            throw AnalyticsError(AnalyticsErrc::inconsistent_sample,
                                 fmt::format("reviewers '{}' and '{}' labeled different attempts", order.front(), name));
        }
    }
    std::vector<ReviewerCounts> reviewers;
    for (const auto& name : order) {
        reviewers.push_back(tallies[name]);
    }
    return summarize_counts(std::move(reviewers));
}

ClassificationSummary summarize_counts(std::vector<ReviewerCounts> reviewers) {
    ClassificationSummary s;
    if (reviewers.empty()) {
        return s;
    }
    s.sample_size = reviewers.front().total();
    std::size_t exact = 0;
    std::size_t plausible = 0;
    std::size_t implausible = 0;
    for (const auto& r : reviewers) {
        if (r.total() != s.sample_size) {
            throw AnalyticsError(AnalyticsErrc::inconsistent_sample,
                                 fmt::format("reviewer '{}' labeled {} attempts, '{}' labeled {}", r.reviewer,
                                             r.total(), reviewers.front().reviewer, s.sample_size));
        }
        exact += r.exact;
        plausible += r.plausible;
        implausible += r.implausible;
    }
    const auto n = reviewers.size();
    s.average = {"average", mean_half_up(exact, n), mean_half_up(plausible, n), mean_half_up(implausible, n)};
    s.reviewers = std::move(reviewers);
    return s;
}

std::map<patching::FixLabel, std::size_t> classify_passing(std::span<const shadow::RepairSession> sessions,
                                                           std::span<const patching::ManualLabel> labels) {
    std::map<std::pair<std::string, int>, patching::FixLabel> manual;
    for (const auto& l : labels) {
        manual.try_emplace({l.session_id, l.attempt}, l.label);
    }
    std::map<patching::FixLabel, std::size_t> out;
    for (const auto& s : sessions) {
        const auto at = s.passed_at();
        if (!at || !s.attempts.back().candidate) {
            continue;
        }
        std::optional<patching::FixLabel> label;
        if (const auto it = manual.find({s.session_id, *at}); it != manual.end()) {
            label = it->second;
        }
        ++out[patching::classify_fix(s.attempts.back().candidate->text, s.historical_fix, label).label];
    }
    return out;
}

std::vector<HistogramRow> time_histogram(std::span<const shadow::RepairSession> sessions, int overflow_minutes) {
    std::map<int, HistogramRow> by_lower;
    for (const auto& s : sessions) {
        const auto label = shadow::bucket_of(s.total_duration, overflow_minutes);
        auto& row = by_lower[shadow::bucket_lower_minutes(label)];
        row.bucket = label;
        (s.final == shadow::Outcome::pass ? row.pass_count : row.fail_count) += 1;
    }
    std::vector<HistogramRow> out;
    for (auto& [lower, row] : by_lower) {
        out.push_back(std::move(row));
    }
    return out;
}

namespace {

std::string aligned(const std::vector<std::vector<std::string>>& grid) {
    std::vector<std::size_t> widths;
    for (const auto& row : grid) {
        widths.resize(std::max(widths.size(), row.size()), 0);
        for (std::size_t i = 0; i < row.size(); ++i) {
            widths[i] = std::max(widths[i], row[i].size());
        }
    }
    std::string out;
    for (const auto& row : grid) {
        std::string line;
        for (std::size_t i = 0; i < row.size(); ++i) {
            line += i == 0 ? fmt::format("{:<{}}", row[i], widths[i]) : fmt::format("  {:>{}}", row[i], widths[i]);
        }
        out += trim_right(line) + "\n";
    }
    return out;
}

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) {
        return s;
    }
    std::string out = "\"";
    for (char c : s) {
        out += c == '"' ? std::string("\"\"") : std::string(1, c);
    }
    return out + "\"";
}

std::string csv(const std::vector<std::vector<std::string>>& grid) {
    std::string out;
    for (const auto& row : grid) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            out += (i ? "," : "") + csv_field(row[i]);
        }
        out += "\n";
    }
    return out;
}

std::vector<std::vector<std::string>> grid_of(const PassRateTable& t) {
    std::vector<std::vector<std::string>> g;
    g.emplace_back();
    g.back().push_back(t.row_header);
    g.back().insert(g.back().end(), t.columns.begin(), t.columns.end());
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        g.emplace_back();
        g.back().push_back(t.rows[r]);
        for (std::size_t c = 0; c < t.columns.size(); ++c) {
            const auto v = t.at(r, c);
            g.back().push_back(v ? std::to_string(*v) : std::string());
        }
    }
    return g;
}

std::vector<std::vector<std::string>> grid_of(const ClassificationSummary& s) {
    std::vector<std::vector<std::string>> g{{"reviewer", "exact", "plausible", "implausible"}};
    auto add = [&](const ReviewerCounts& r) {
        g.push_back({r.reviewer, std::to_string(r.exact), std::to_string(r.plausible), std::to_string(r.implausible)});
    };
    for (const auto& r : s.reviewers) {
        add(r);
    }
    if (!s.reviewers.empty()) {
        add(s.average);
    }
    return g;
}

std::vector<std::vector<std::string>> grid_of(const std::vector<HistogramRow>& h) {
    std::vector<std::vector<std::string>> g{{"bucket_minutes", "pass", "fail"}};
    for (const auto& r : h) {
        g.push_back({r.bucket, std::to_string(r.pass_count), std::to_string(r.fail_count)});
    }
    return g;
}

}  // namespace

std::string render_text(const PassRateTable& table) { return aligned(grid_of(table)); }
std::string render_csv(const PassRateTable& table) { return csv(grid_of(table)); }
std::string render_text(const ClassificationSummary& summary) { return aligned(grid_of(summary)); }
std::string render_csv(const ClassificationSummary& summary) { return csv(grid_of(summary)); }
std::string render_text(const std::vector<HistogramRow>& histogram) { return aligned(grid_of(histogram)); }
std::string render_csv(const std::vector<HistogramRow>& histogram) { return csv(grid_of(histogram)); }

}  // namespace shadowfix::analytics
