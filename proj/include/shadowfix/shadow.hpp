#pragma once

#include "shadowfix/backend.hpp"
#include "shadowfix/diagnostics.hpp"
#include "shadowfix/error.hpp"
#include "shadowfix/fixmine.hpp"
#include "shadowfix/prompting.hpp"
#include "shadowfix/text.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace shadowfix::shadow {

namespace fs = std::filesystem;
using fixmine::Outcome;

class WorkspaceError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

/// How to run the shadow CI inside a workspace.
struct CIConfig {
    std::vector<std::string> command;
    int timeout_seconds = 300;
    /// Added to (or overriding) the inherited environment.
    std::map<std::string, std::string> env;
    /// Relative to the workspace root.
    std::string workdir;
};

void to_json(nlohmann::json& j, const CIConfig& c);
void from_json(const nlohmann::json& j, CIConfig& c);

/// stage_reached tokens.
namespace stage {
inline constexpr std::string_view complete = "complete";
inline constexpr std::string_view ci_failed = "ci-failed";
inline constexpr std::string_view timeout = "timeout";
inline constexpr std::string_view launch_failed = "launch-failed";
inline constexpr std::string_view prompt = "prompt";
inline constexpr std::string_view generate = "generate";
inline constexpr std::string_view patch = "patch";
inline constexpr std::string_view no_target = "no-target";
}  // namespace stage

struct CIVerdict {
    Outcome outcome = Outcome::fail;
    std::string stage_reached;
    std::string log;
    Millis duration{0};

    friend bool operator==(const CIVerdict&, const CIVerdict&) = default;
};

/// Runs `ci.command` in `workspace`/`ci.workdir`. pass iff the command exits
/// with status 0 before the timeout; stdout and stderr are captured together.
/// Throws ConfigError for an empty command or a workdir outside the workspace.
[[nodiscard]] CIVerdict run_ci(const fs::path& workspace, const CIConfig& ci);

struct RepairAttempt {
    int iteration = 1;
    std::string prompt_digest;
    std::optional<backend::PatchCandidate> candidate;
    CIVerdict verdict;
    Instant started{};
    Instant ended{};
    /// Why the attempt stopped before CI, empty otherwise.
    std::string error;

    [[nodiscard]] Millis duration() const noexcept { return ended - started; }

    friend bool operator==(const RepairAttempt&, const RepairAttempt&) = default;
};

struct RepairSession {
    std::string session_id;
    std::string failing_build;
    std::string model;
    int recipe = 0;
    std::vector<RepairAttempt> attempts;
    Outcome final = Outcome::fail;
    Millis total_duration{0};
    /// The historical fix for the failing build, when the archive has one.
    std::optional<std::string> historical_fix;

    /// Iteration of the passing attempt, if any.
    [[nodiscard]] std::optional<int> passed_at() const noexcept;

    friend bool operator==(const RepairSession&, const RepairSession&) = default;
};

void to_json(nlohmann::json& j, const RepairSession& s);
void from_json(const nlohmann::json& j, RepairSession& s);

/// One JSON object per line.
void append_session(const fs::path& results, const RepairSession& session);
[[nodiscard]] std::vector<RepairSession> parse_sessions(std::string_view jsonl);
/// Throws Error naming the offending line.
[[nodiscard]] std::vector<RepairSession> load_sessions(const fs::path& results);

inline constexpr int kDefaultMaxIterations = 5;
inline constexpr int kIterationCeiling = 10;

struct SessionOptions {
    int max_iterations = kDefaultMaxIterations;
    int iteration_ceiling = kIterationCeiling;
    /// Patch the previous attempt's tree and re-prompt from its CI log
    /// instead of restarting from the failing snapshot.
    bool stack_patches = false;
    std::size_t context_lines = 3;
    std::size_t max_errors = 3;
    std::optional<std::size_t> token_limit;
    /// Parent for workspaces; the system temp directory when empty.
    fs::path workspace_root;
    /// Leave workspaces on disk after the session.
    bool keep_workspaces = false;
};

/// Read-only collaborators shared by concurrent sessions.
struct SessionContext {
    const fixmine::Archive& archive;
    const diagnostics::Taxonomy& taxonomy;
    const diagnostics::LogGrammar& grammar;
    const fixmine::ExampleCatalog& catalog;
    const prompting::PromptTemplate& tmpl;
    backend::Backend& backend;
    CIConfig ci;
};

using ProgressFn = std::function<void(const RepairSession&, const RepairAttempt&)>;

[[nodiscard]] std::string session_id(std::string_view build_id, std::string_view model, int recipe);

/// Everything a prompt can draw on for one failing tree and its log.
[[nodiscard]] prompting::PromptInputs gather_inputs(const fs::path& tree, std::string_view log,
                                                    const SessionContext& ctx, const SessionOptions& opts);

/// Iterates prompt -> generate -> patch -> CI until a pass or the iteration
/// cap. Backend, prompt and CI failures are recorded as failed attempts.
/// Throws ConfigError for bad options or a build that did not fail, and
/// WorkspaceError when the snapshot cannot be copied.
[[nodiscard]] RepairSession run_session(const fixmine::BuildRecord& failing, int recipe,
                                        const backend::ModelConfig& model, const SessionContext& ctx,
                                        const SessionOptions& opts = {}, const ProgressFn& progress = {});

/// Private copy of a directory tree, removed on destruction.
class Workspace {
public:
    Workspace(const fs::path& source, const fs::path& parent, bool keep = false);
    ~Workspace();
    Workspace(const Workspace&) = delete;
    Workspace& operator=(const Workspace&) = delete;

    [[nodiscard]] const fs::path& path() const noexcept { return path_; }

private:
    fs::path path_;
    bool keep_;
};

/// Fix-time histogram bucket: 2-minute buckets below 10 minutes, then
/// 5-minute buckets, with everything at or past `overflow_minutes` in one
/// final bucket. Labels look like "[2,4)" and "[60,inf)".
[[nodiscard]] std::string bucket_of(Millis duration, int overflow_minutes = 60);

/// Lower bound in minutes of a bucket label, for ordering.
[[nodiscard]] int bucket_lower_minutes(std::string_view label);

}  // namespace shadowfix::shadow
