#pragma once

#include "shadowfix/error.hpp"
#include "shadowfix/prompting.hpp"
#include "shadowfix/text.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace shadowfix::backend {

struct ModelConfig {
    std::string name;
    std::uint64_t parameter_size = 7'000'000'000;
    bool trained_on_code = false;
    /// Wire backend only.
    std::string endpoint;
    std::size_t max_tokens = 4096;
    double temperature = 0.2;
    bool local_only = true;
};

void to_json(nlohmann::json& j, const ModelConfig& m);
void from_json(const nlohmann::json& j, ModelConfig& m);

/// The four 7B-class models of the study: codet5p, codellama, falcon, bloom.
[[nodiscard]] const std::vector<ModelConfig>& model_registry();
[[nodiscard]] std::optional<ModelConfig> find_model(std::string_view name);

struct PatchCandidate {
    std::string text;
    std::string model;
    Millis latency{0};
    int iteration = 1;

    friend bool operator==(const PatchCandidate&, const PatchCandidate&) = default;
};

enum class BackendErrc { unavailable, empty_completion, invalid_config };
using BackendError = CodedError<BackendErrc>;

struct GenerateRequest {
    const prompting::Prompt& prompt;
    const ModelConfig& model;
    int iteration = 1;
    std::string session_id;
    std::string build_id;
};

/// A patch generator. Implementations are safe to share between
/// concurrently running sessions.
class Backend {
public:
    virtual ~Backend() = default;

    [[nodiscard]] virtual std::string_view kind() const noexcept = 0;

    /// Returns the sanitized replacement segment. Throws BackendError
    /// (unavailable, empty_completion); never mutates the prompt.
    [[nodiscard]] PatchCandidate generate(const GenerateRequest& request);

protected:
    /// Raw model output for the request.
    [[nodiscard]] virtual std::string complete(const GenerateRequest& request) = 0;
};

/// Strips Markdown fences, leading prose lines and surrounding blank lines;
/// keeps indentation and interior blank lines.
[[nodiscard]] std::string sanitize_completion(std::string_view raw);

enum class BackendKind { wire, replay, stochastic };

[[nodiscard]] std::optional<BackendKind> parse_backend_kind(std::string_view s) noexcept;
[[nodiscard]] std::string_view to_string(BackendKind k) noexcept;

/// Builds a backend from its JSON configuration:
///
///   replay:     {"fixture": path}
///   stochastic: {"seed": n, "success_probability": q,
///                "ground_truth": {build_id: fix} | "ground_truth_file": path}
///   wire:       {"endpoint": "http://127.0.0.1:8080/v1/completions",
///                "timeout_seconds": 60, "max_inflight": 1,
///                "fields": {"prompt": .., "max_tokens": .., "temperature": ..},
///                "model_field": "", "response_pointer": "/text",
///                "local_only": true}
///
/// Throws BackendError(invalid_config).
[[nodiscard]] std::shared_ptr<Backend> register_backend(BackendKind kind, const nlohmann::json& config);

/// Reads the kind from config["kind"].
[[nodiscard]] std::shared_ptr<Backend> make_backend(const nlohmann::json& config);

/// Replay fixture: {"entries": [{"digest": hex, "iteration": n, "completion": text}]}.
/// An entry without "iteration" answers every iteration of that digest.
struct ReplayEntry {
    std::string digest;
    std::optional<int> iteration;
    std::string completion;
};

[[nodiscard]] nlohmann::json replay_fixture_json(const std::vector<ReplayEntry>& entries);

/// Per-attempt success draw of the stochastic backend: a pure function of
/// (seed, session_id, iteration).
[[nodiscard]] double stochastic_draw(std::uint64_t seed, std::string_view session_id, int iteration) noexcept;

struct ParsedUrl {
    std::string host;
    int port = 80;
    std::string path;
};

/// Accepts http://host[:port][/path]. Throws BackendError(invalid_config).
[[nodiscard]] ParsedUrl parse_endpoint(std::string_view url);
[[nodiscard]] bool is_loopback_host(std::string_view host) noexcept;

}  // namespace shadowfix::backend
