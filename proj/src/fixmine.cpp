#include "shadowfix/fixmine.hpp"

#include <algorithm>
#include <limits>
#include <random>
#include <set>
#include <stdexcept>
#include <tuple>

namespace shadowfix::fixmine {

std::string find_first_success(std::span<const BuildRecord> archive, std::string_view failing) {
    const auto it = std::find_if(archive.begin(), archive.end(),
                                 [&](const BuildRecord& r) { return r.build_id == failing; });
    if (it == archive.end()) {
        throw std::invalid_argument("build '" + std::string(failing) + "' is not in the archive");
    }
    if (it->outcome != Outcome::fail) {
        throw std::invalid_argument("build '" + std::string(failing) + "' did not fail");
    }
    for (auto next = std::next(it); next != archive.end(); ++next) {
        if (next->outcome == Outcome::pass && next->timestamp > it->timestamp) {
            return next->build_id;
        }
    }
    throw MiningError(MiningErrc::no_subsequent_success,
                      "no passing build follows '" + std::string(failing) + "'");
}

namespace {

// Above this many DP cells the middle section is reported as one hunk.
constexpr std::size_t kMaxDiffCells = std::size_t{1} << 26;

enum class Op : unsigned char { equal, remove, insert };

std::vector<Op> edit_script(const std::vector<std::string>& a, const std::vector<std::string>& b) {
    std::size_t prefix = 0;
    while (prefix < a.size() && prefix < b.size() && a[prefix] == b[prefix]) {
        ++prefix;
    }
    std::size_t suffix = 0;
    while (suffix < a.size() - prefix && suffix < b.size() - prefix &&
           a[a.size() - 1 - suffix] == b[b.size() - 1 - suffix]) {
        ++suffix;
    }
    const auto n = a.size() - prefix - suffix;
    const auto m = b.size() - prefix - suffix;

    std::vector<Op> ops(prefix, Op::equal);
    if ((n + 1) * (m + 1) > kMaxDiffCells) {
        ops.insert(ops.end(), n, Op::remove);
        ops.insert(ops.end(), m, Op::insert);
    } else {
        // lcs[i][j] = LCS length of a[prefix+i..] and b[prefix+j..]
        std::vector<std::uint32_t> lcs((n + 1) * (m + 1), 0);
        auto at = [&](std::size_t i, std::size_t j) -> std::uint32_t& { return lcs[i * (m + 1) + j]; };
        for (std::size_t i = n; i-- > 0;) {
            for (std::size_t j = m; j-- > 0;) {
                at(i, j) = a[prefix + i] == b[prefix + j] ? at(i + 1, j + 1) + 1
                                                          : std::max(at(i + 1, j), at(i, j + 1));
            }
        }
        std::size_t i = 0;
        std::size_t j = 0;
        while (i < n || j < m) {
            if (i < n && j < m && a[prefix + i] == b[prefix + j]) {
                ops.push_back(Op::equal);
                ++i;
                ++j;
            } else if (j == m || (i < n && at(i + 1, j) >= at(i, j + 1))) {
                ops.push_back(Op::remove);
                ++i;
            } else {
                ops.push_back(Op::insert);
                ++j;
            }
        }
    }
    ops.insert(ops.end(), suffix, Op::equal);
    return ops;
}

}  // namespace

std::vector<Hunk> diff_lines(const std::vector<std::string>& before, const std::vector<std::string>& after,
                             std::size_t merge_gap) {
    struct Run {
        std::size_t old_begin, old_end, new_begin, new_end;
    };
    std::vector<Run> runs;
    std::size_t i = 0;
    std::size_t j = 0;
    bool open = false;
    for (const auto op : edit_script(before, after)) {
        if (op == Op::equal) {
            open = false;
            ++i;
            ++j;
            continue;
        }
        if (!open) {
            runs.push_back({i, i, j, j});
            open = true;
        }
        if (op == Op::remove) {
            runs.back().old_end = ++i;
        } else {
            runs.back().new_end = ++j;
        }
    }

    std::vector<Run> merged;
    for (const auto& r : runs) {
        if (!merged.empty() && r.old_begin - merged.back().old_end <= merge_gap) {
            merged.back().old_end = r.old_end;
            merged.back().new_end = r.new_end;
        } else {
            merged.push_back(r);
        }
    }

    std::vector<Hunk> hunks;
    hunks.reserve(merged.size());
    for (const auto& r : merged) {
        hunks.push_back({r.old_begin + 1, r.old_end - r.old_begin, r.new_begin + 1, r.new_end - r.new_begin});
    }
    return hunks;
}

std::size_t nearest_hunk(std::span<const Hunk> hunks, std::size_t line) {
    if (hunks.empty()) {
        throw std::invalid_argument("nearest_hunk: no hunks");
    }
    auto distance = [line](const Hunk& h) -> std::size_t {
        if (h.old_count == 0) {
            // Insertion between lines old_first - 1 and old_first.
            if (line >= h.old_first) {
                return line - h.old_first;
            }
            return h.old_first - 1 - line;
        }
        const auto last = h.old_first + h.old_count - 1;
        if (line < h.old_first) {
            return h.old_first - line;
        }
        if (line > last) {
            return line - last;
        }
        return 0;
    };
    std::size_t best = 0;
    auto best_distance = std::numeric_limits<std::size_t>::max();
    for (std::size_t k = 0; k < hunks.size(); ++k) {
        const auto d = distance(hunks[k]);
        if (d < best_distance) {
            best = k;
            best_distance = d;
        }
    }
    return best;
}

void to_json(nlohmann::json& j, const FixExample& e) {
    j = nlohmann::json{{"category", e.category},
                       {"faulty_segment", e.faulty_segment},
                       {"fixed_segment", e.fixed_segment},
                       {"file", e.file},
                       {"failing_build", e.failing_build},
                       {"fixing_build", e.fixing_build},
                       {"faulty_first", e.faulty_first},
                       {"faulty_count", e.faulty_count},
                       {"fixed_count", e.fixed_count},
                       {"hunk_count", e.hunk_count}};
}

void from_json(const nlohmann::json& j, FixExample& e) {
    e.category = j.at("category").get<std::string>();
    e.faulty_segment = j.at("faulty_segment").get<std::string>();
    e.fixed_segment = j.at("fixed_segment").get<std::string>();
    e.file = j.value("file", "");
    e.failing_build = j.value("failing_build", "");
    e.fixing_build = j.value("fixing_build", "");
    e.faulty_first = j.value("faulty_first", std::size_t{1});
    e.faulty_count = j.value("faulty_count", std::size_t{0});
    e.fixed_count = j.value("fixed_count", std::size_t{0});
    e.hunk_count = j.value("hunk_count", std::size_t{1});
}

FixExample derive_segment(std::string_view failing_text, std::string_view fixing_text, std::size_t error_line) {
    const auto before = split_lines(failing_text);
    const auto after = split_lines(fixing_text);
    const auto hunks = diff_lines(before, after);
    if (hunks.empty()) {
        throw MiningError(MiningErrc::files_identical, "file unchanged between builds");
    }
    const auto& h = hunks[nearest_hunk(hunks, error_line)];

    auto slice = [](const std::vector<std::string>& lines, std::size_t first, std::size_t count) {
        std::string out;
        for (std::size_t k = 0; k < count; ++k) {
            if (k != 0) {
                out += '\n';
            }
            out += lines[first - 1 + k];
        }
        return out;
    };

    FixExample e;
    e.faulty_segment = slice(before, h.old_first, h.old_count);
    e.fixed_segment = slice(after, h.new_first, h.new_count);
    e.faulty_first = h.old_first;
    e.faulty_count = h.old_count;
    e.fixed_count = h.new_count;
    e.hunk_count = hunks.size();
    if (normalize_whitespace(e.faulty_segment) == normalize_whitespace(e.fixed_segment)) {
        throw MiningError(MiningErrc::whitespace_only, "nearest change is whitespace only");
    }
    return e;
}

FixExample derive_fix_example(const Archive& archive, const BuildRecord& failing, const BuildRecord& fixing,
                              const diagnostics::CompileError& error) {
    const auto before = archive.read_source(failing, error.file);
    const auto after = archive.read_source(fixing, error.file);
    if (!before || !after) {
        throw MiningError(MiningErrc::file_missing, "'" + error.file + "' missing from snapshot of " +
                                                        (before ? fixing.build_id : failing.build_id));
    }
    auto e = derive_segment(*before, *after, error.line);
    e.category = error.category;
    e.file = error.file;
    e.failing_build = failing.build_id;
    e.fixing_build = fixing.build_id;
    return e;
}

std::string reconstruct_fixed(std::string_view failing_text, const FixExample& example) {
    std::vector<std::string> lines;
    if (example.fixed_count > 0) {
        std::string_view rest = example.fixed_segment;
        while (true) {
            const auto nl = rest.find('\n');
            lines.emplace_back(rest.substr(0, nl));
            if (nl == std::string_view::npos) {
                break;
            }
            rest.remove_prefix(nl + 1);
        }
    }
    LineBuffer buf(failing_text);
    buf.splice(example.faulty_first, example.faulty_count, lines);
    return buf.str();
}

std::vector<FixExample> mine_examples(const Archive& archive, const diagnostics::Taxonomy& taxonomy,
                                      const diagnostics::LogGrammar& grammar) {
    std::vector<FixExample> out;
    const auto& records = archive.records();
    for (const auto& failing : records) {
        if (failing.outcome != Outcome::fail) {
            continue;
        }
        std::string fixing_id;
        try {
            fixing_id = find_first_success(records, failing.build_id);
        } catch (const MiningError&) {
            continue;
        }
        const auto& fixing = archive.get(fixing_id);
        const auto errors = diagnostics::parse_and_categorize(archive.read_log(failing), taxonomy, grammar);

        std::set<std::tuple<std::string, std::size_t, std::size_t>> seen;
        for (const auto& error : diagnostics::select_primary_errors(errors)) {
            try {
                auto e = derive_fix_example(archive, failing, fixing, error);
                if (seen.emplace(e.file, e.faulty_first, e.faulty_count).second) {
                    out.push_back(std::move(e));
                }
            } catch (const MiningError&) {
                continue;
            }
        }
    }
    return out;
}

namespace {

std::size_t pick_index(std::mt19937_64& rng, std::size_t n) {
    // Rejection sampling keeps the draw uniform and identical across
    // standard library implementations.
    const auto bound = static_cast<std::uint64_t>(n);
    const auto limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t x = 0;
    do {
        x = rng();
    } while (x >= limit);
    return static_cast<std::size_t>(x % bound);
}

}  // namespace

ExampleCatalog select_catalog(const std::vector<FixExample>& examples, const diagnostics::Taxonomy& taxonomy,
                              std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    ExampleCatalog catalog;
    for (const auto& category : taxonomy.categories()) {
        std::vector<const FixExample*> pool;
        for (const auto& e : examples) {
            if (e.category == category.id) {
                pool.push_back(&e);
            }
        }
        if (!pool.empty()) {
            catalog.emplace(category.id, *pool[pick_index(rng, pool.size())]);
        }
    }
    return catalog;
}

ExampleCatalog build_example_catalog(const Archive& archive, const diagnostics::Taxonomy& taxonomy,
                                     std::uint64_t seed, const diagnostics::LogGrammar& grammar) {
    return select_catalog(mine_examples(archive, taxonomy, grammar), taxonomy, seed);
}

nlohmann::json catalog_to_json(const ExampleCatalog& catalog, std::uint64_t seed) {
    auto examples = nlohmann::json::object();
    for (const auto& [category, example] : catalog) {
        examples[category] = example;
    }
    return {{"seed", seed}, {"examples", std::move(examples)}};
}

ExampleCatalog catalog_from_json(const nlohmann::json& j) {
    ExampleCatalog catalog;
    for (const auto& [category, example] : j.at("examples").items()) {
        catalog.emplace(category, example.get<FixExample>());
    }
    return catalog;
}

void save_catalog(const fs::path& path, const ExampleCatalog& catalog, std::uint64_t seed) {
    write_file(path.string(), catalog_to_json(catalog, seed).dump(2) + "\n");
}

ExampleCatalog load_catalog(const fs::path& path) {
    try {
        return catalog_from_json(nlohmann::json::parse(read_file(path.string())));
    } catch (const nlohmann::json::exception& e) {
        throw Error(path.string() + ": " + e.what());
    }
}

}  // namespace shadowfix::fixmine
