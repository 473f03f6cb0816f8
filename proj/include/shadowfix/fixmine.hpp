#pragma once

#include "shadowfix/diagnostics.hpp"
#include "shadowfix/error.hpp"
#include "shadowfix/text.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace shadowfix::fixmine {

namespace fs = std::filesystem;

enum class Outcome { pass, fail };

[[nodiscard]] std::string_view to_string(Outcome o) noexcept;
[[nodiscard]] std::optional<Outcome> parse_outcome(std::string_view s) noexcept;

struct BuildRecord {
    std::string build_id;
    std::string commit_id;
    Instant timestamp{};
    Outcome outcome = Outcome::fail;
    fs::path log_path;
    fs::path snapshot_path;
};

class ArchiveError : public Error {
public:
    using Error::Error;
};

/// Read-only view of a build-history archive:
///
///     <root>/order.txt                  build ids, oldest first
///     <root>/builds/<id>/meta.json      {build_id, commit_id, timestamp, outcome}
///     <root>/builds/<id>/log.txt
///     <root>/builds/<id>/src/...        full source snapshot
class Archive {
public:
    static Archive load(const fs::path& root);

    [[nodiscard]] const fs::path& root() const noexcept { return root_; }
    /// Sorted by (timestamp, build_id).
    [[nodiscard]] const std::vector<BuildRecord>& records() const noexcept { return records_; }
    [[nodiscard]] const BuildRecord* find(std::string_view build_id) const noexcept;
    [[nodiscard]] const BuildRecord& get(std::string_view build_id) const;

    [[nodiscard]] std::string read_log(const BuildRecord& record) const;
    /// Contents of `file` (relative to the snapshot root); nullopt when the
    /// file is absent or the path escapes the snapshot.
    [[nodiscard]] std::optional<std::string> read_source(const BuildRecord& record, std::string_view file) const;

private:
    fs::path root_;
    std::vector<BuildRecord> records_;
};

/// Resolves `file` under `root`, rejecting absolute paths and `..` escapes.
[[nodiscard]] std::optional<fs::path> resolve_within(const fs::path& root, std::string_view file);

/// Populates an archive directory. order.txt is rewritten after every add.
class ArchiveWriter {
public:
    explicit ArchiveWriter(fs::path root);

    /// Copies `snapshot_dir` recursively into the build's src/.
    void add(const BuildRecord& meta, std::string_view log, const fs::path& snapshot_dir);
    /// Writes `files` (relative path -> contents) as the build's src/.
    void add(const BuildRecord& meta, std::string_view log, const std::map<std::string, std::string>& files);

private:
    fs::path prepare(const BuildRecord& meta, std::string_view log);
    void write_order();

    fs::path root_;
    std::vector<std::pair<Instant, std::string>> order_;
};

enum class MiningErrc { no_subsequent_success, files_identical, file_missing, whitespace_only };
using MiningError = CodedError<MiningErrc>;

/// Earliest record after `failing` (strictly later timestamp) whose outcome
/// is pass. Throws MiningError(no_subsequent_success) when there is none and
/// std::invalid_argument when `failing` is absent or did not fail.
[[nodiscard]] std::string find_first_success(std::span<const BuildRecord> archive, std::string_view failing);

/// One contiguous region of change between two versions of a file.
/// `old_first`/`new_first` are 1-based; a zero count marks a pure insertion
/// (or deletion) before that line.
struct Hunk {
    std::size_t old_first = 1;
    std::size_t old_count = 0;
    std::size_t new_first = 1;
    std::size_t new_count = 0;

    friend bool operator==(const Hunk&, const Hunk&) = default;
};

/// Line-level LCS diff. Changed runs separated by at most `merge_gap`
/// unchanged lines are merged into one hunk.
[[nodiscard]] std::vector<Hunk> diff_lines(const std::vector<std::string>& before,
                                           const std::vector<std::string>& after, std::size_t merge_gap = 1);

/// Index of the hunk nearest to `line` (distance 0 inside the hunk's old
/// range); ties go to the earlier hunk.
[[nodiscard]] std::size_t nearest_hunk(std::span<const Hunk> hunks, std::size_t line);

struct FixExample {
    std::string category;
    std::string faulty_segment;
    std::string fixed_segment;
    std::string file;
    std::string failing_build;
    std::string fixing_build;
    /// Location of faulty_segment in the failing file (count may be 0).
    std::size_t faulty_first = 1;
    std::size_t faulty_count = 0;
    std::size_t fixed_count = 0;
    /// Number of hunks in the file diff; the example alone reproduces the
    /// fixing file only when this is 1.
    std::size_t hunk_count = 1;

    friend bool operator==(const FixExample&, const FixExample&) = default;
};

void to_json(nlohmann::json& j, const FixExample& e);
void from_json(const nlohmann::json& j, FixExample& e);

/// Text-level core of derive_fix_example: diff the two versions of a file
/// and cut out the hunk nearest to `error_line`.
[[nodiscard]] FixExample derive_segment(std::string_view failing_text, std::string_view fixing_text,
                                        std::size_t error_line);

[[nodiscard]] FixExample derive_fix_example(const Archive& archive, const BuildRecord& failing,
                                            const BuildRecord& fixing, const diagnostics::CompileError& error);

/// Splices `example.fixed_segment` over the faulty lines of `failing_text`.
[[nodiscard]] std::string reconstruct_fixed(std::string_view failing_text, const FixExample& example);

/// Every example minable from the archive: for each failing build, its
/// primary errors (max 3) diffed against the first later passing build.
/// Failures without a later pass, cross-file fixes and whitespace-only
/// changes are skipped.
[[nodiscard]] std::vector<FixExample> mine_examples(const Archive& archive, const diagnostics::Taxonomy& taxonomy,
                                                    const diagnostics::LogGrammar& grammar = {});

using ExampleCatalog = std::map<std::string, FixExample>;

/// One example per category, drawn uniformly at random under `seed`.
[[nodiscard]] ExampleCatalog select_catalog(const std::vector<FixExample>& examples,
                                            const diagnostics::Taxonomy& taxonomy, std::uint64_t seed);

[[nodiscard]] ExampleCatalog build_example_catalog(const Archive& archive, const diagnostics::Taxonomy& taxonomy,
                                                   std::uint64_t seed, const diagnostics::LogGrammar& grammar = {});

[[nodiscard]] nlohmann::json catalog_to_json(const ExampleCatalog& catalog, std::uint64_t seed);
[[nodiscard]] ExampleCatalog catalog_from_json(const nlohmann::json& j);
void save_catalog(const fs::path& path, const ExampleCatalog& catalog, std::uint64_t seed);
[[nodiscard]] ExampleCatalog load_catalog(const fs::path& path);

}  // namespace shadowfix::fixmine
