#pragma once

#include "shadowfix/shadow.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

namespace shadowfix::cli {

namespace fs = std::filesystem;

enum ExitCode : int { kOk = 0, kExhausted = 1, kUsage = 2 };

/// Settings for `repair`, `mine`, `prompt`. Relative paths in a config file
/// resolve against the file's directory.
struct RunConfig {
    fs::path archive;
    std::optional<fs::path> taxonomy;
    std::optional<fs::path> template_path;
    /// Mined on the fly from the archive when absent.
    std::optional<fs::path> catalog;
    /// {"kind": "replay" | "stochastic" | "wire", ...}
    nlohmann::json backend = nlohmann::json::object();
    int recipe = 6;
    std::string model = "codellama";
    int max_iterations = shadow::kDefaultMaxIterations;
    shadow::CIConfig ci;
    fs::path results = "results.jsonl";
    std::uint64_t seed = 0;
    bool stack_patches = false;
    std::optional<std::size_t> token_limit;
    std::size_t context_lines = 3;
    fs::path workspace_root;
};

/// Example:
///
///     {"archive": "archive", "backend": {"kind": "replay", "fixture": "replay.json"},
///      "recipe": 6, "model": "codellama", "max_iterations": 5, "seed": 7,
///      "ci": {"command": ["make"], "timeout_seconds": 120},
///      "results": "results.jsonl"}
///
/// Throws shadow::ConfigError.
[[nodiscard]] RunConfig parse_run_config(const nlohmann::json& j, const fs::path& base_dir);
[[nodiscard]] RunConfig load_run_config(const fs::path& path);

/// Referenced paths exist, recipe in 0..6, max_iterations in 1..10.
/// Throws shadow::ConfigError.
void validate(const RunConfig& config);

/// Entry point of the `shadowfix` tool; returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace shadowfix::cli
