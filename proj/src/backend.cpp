#include "shadowfix/backend.hpp"

#include "wire_backend.hpp"

#include <cctype>
#include <chrono>
#include <regex>

namespace shadowfix::backend {

void to_json(nlohmann::json& j, const ModelConfig& m) {
    j = nlohmann::json{{"name", m.name},
                       {"parameter_size", m.parameter_size},
                       {"trained_on_code", m.trained_on_code},
                       {"endpoint", m.endpoint},
                       {"max_tokens", m.max_tokens},
                       {"temperature", m.temperature},
                       {"local_only", m.local_only}};
}

void from_json(const nlohmann::json& j, ModelConfig& m) {
    m.name = j.at("name").get<std::string>();
    m.parameter_size = j.value("parameter_size", std::uint64_t{7'000'000'000});
    m.trained_on_code = j.value("trained_on_code", false);
    m.endpoint = j.value("endpoint", "");
    m.max_tokens = j.value("max_tokens", std::size_t{4096});
    m.temperature = j.value("temperature", 0.2);
    m.local_only = j.value("local_only", true);
    if (m.max_tokens == 0 || m.temperature < 0.0) {
        throw BackendError(BackendErrc::invalid_config, "model '" + m.name + "': bad max_tokens or temperature");
    }
}

const std::vector<ModelConfig>& model_registry() {
    static const std::vector<ModelConfig> models{
        {"codet5p", 7'000'000'000, true, "", 4096, 0.2, true},
        {"codellama", 7'000'000'000, true, "", 4096, 0.2, true},
        {"falcon", 7'000'000'000, false, "", 4096, 0.2, true},
        {"bloom", 7'000'000'000, false, "", 4096, 0.2, true},
    };
    return models;
}

std::optional<ModelConfig> find_model(std::string_view name) {
    for (const auto& m : model_registry()) {
        if (m.name == name) {
            return m;
        }
    }
    return std::nullopt;
}

PatchCandidate Backend::generate(const GenerateRequest& request) {
    const auto start = std::chrono::steady_clock::now();
    auto raw = complete(request);
    const auto elapsed = std::chrono::duration_cast<Millis>(std::chrono::steady_clock::now() - start);
    auto text = sanitize_completion(raw);
    if (trim(text).empty()) {
        throw BackendError(BackendErrc::empty_completion, "model returned no usable code");
    }
    return PatchCandidate{std::move(text), request.model.name, elapsed, request.iteration};
}

namespace {

bool is_fence(std::string_view line) { return trim(line).substr(0, 3) == "```"; }

bool is_prose(std::string_view line) {
    const auto t = trim(line);
    if (t.empty()) {
        return false;
    }
    if (t.substr(0, 4) == "### ") {
        return true;
    }
    if (!std::isupper(static_cast<unsigned char>(t.front()))) {
        return false;
    }
    for (char c : t) {
        if (c == ';' || c == '{' || c == '}' || c == '#' || c == '=') {
            return false;
        }
    }
    if (t.back() == ':' || t.back() == '.') {
        return true;
    }
    static const std::regex opener(
        R"(^(Here|Sure|Certainly|Okay|OK|The|This|Below|Fixed|Fix|Replace|Replacement|Answer|Output|Corrected|Explanation|Note)\b)");
    return std::regex_search(std::string(t), opener);
}

}  // namespace

std::string sanitize_completion(std::string_view raw) {
    auto lines = split_lines(raw);

    std::size_t open = 0;
    while (open < lines.size() && !is_fence(lines[open])) {
        ++open;
    }
    if (open < lines.size()) {
        std::size_t close = open + 1;
        while (close < lines.size() && !is_fence(lines[close])) {
            ++close;
        }
        lines = std::vector<std::string>(lines.begin() + static_cast<std::ptrdiff_t>(open + 1),
                                         lines.begin() + static_cast<std::ptrdiff_t>(close));
    } else {
        std::size_t first = 0;
        while (first < lines.size() && (trim(lines[first]).empty() || is_prose(lines[first]))) {
            ++first;
        }
        lines.erase(lines.begin(), lines.begin() + static_cast<std::ptrdiff_t>(first));
    }

    while (!lines.empty() && trim(lines.front()).empty()) {
        lines.erase(lines.begin());
    }
    while (!lines.empty() && trim(lines.back()).empty()) {
        lines.pop_back();
    }
    return trim_right(join_lines(lines));
}

std::optional<BackendKind> parse_backend_kind(std::string_view s) noexcept {
    if (s == "wire") {
        return BackendKind::wire;
    }
    if (s == "replay") {
        return BackendKind::replay;
    }
    if (s == "stochastic") {
        return BackendKind::stochastic;
    }
    return std::nullopt;
}

std::string_view to_string(BackendKind k) noexcept {
    switch (k) {
    case BackendKind::wire:
        return "wire";
    case BackendKind::replay:
        return "replay";
    case BackendKind::stochastic:
        return "stochastic";
    }
    return "wire";
}

nlohmann::json replay_fixture_json(const std::vector<ReplayEntry>& entries) {
    auto list = nlohmann::json::array();
    for (const auto& e : entries) {
        nlohmann::json item{{"digest", e.digest}, {"completion", e.completion}};
        if (e.iteration) {
            item["iteration"] = *e.iteration;
        }
        list.push_back(std::move(item));
    }
    return {{"entries", std::move(list)}};
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::string_view s) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

class ReplayBackend final : public Backend {
public:
    explicit ReplayBackend(const nlohmann::json& fixture) {
        for (const auto& item : fixture.at("entries")) {
            auto digest = item.at("digest").get<std::string>();
            auto completion = item.at("completion").get<std::string>();
            if (item.contains("iteration") && !item.at("iteration").is_null()) {
                exact_[{digest, item.at("iteration").get<int>()}] = std::move(completion);
            } else {
                any_iteration_[std::move(digest)] = std::move(completion);
            }
        }
    }

    [[nodiscard]] std::string_view kind() const noexcept override { return "replay"; }

protected:
    std::string complete(const GenerateRequest& request) override {
        const auto digest = prompting::prompt_digest(request.prompt);
        if (const auto it = exact_.find({digest, request.iteration}); it != exact_.end()) {
            return it->second;
        }
        if (const auto it = any_iteration_.find(digest); it != any_iteration_.end()) {
            return it->second;
        }
        throw BackendError(BackendErrc::unavailable, "no replay entry for prompt " + digest.substr(0, 12) +
                                                         " iteration " + std::to_string(request.iteration));
    }

private:
    std::map<std::pair<std::string, int>, std::string> exact_;
    std::map<std::string, std::string> any_iteration_;
};

class StochasticBackend final : public Backend {
public:
    StochasticBackend(std::uint64_t seed, double q, std::map<std::string, std::string> truth)
        : seed_(seed), q_(q), truth_(std::move(truth)) {}

    [[nodiscard]] std::string_view kind() const noexcept override { return "stochastic"; }

protected:
    std::string complete(const GenerateRequest& request) override {
        if (stochastic_draw(seed_, request.session_id, request.iteration) < q_) {
            const auto it = truth_.find(request.build_id);
            if (it == truth_.end()) {
                throw BackendError(BackendErrc::unavailable, "no ground truth for build '" + request.build_id + "'");
            }
            return it->second;
        }
        return unchanged_core(request.prompt.context);
    }

private:
    // A failed draw proposes the erroneous lines verbatim, which leaves the
    // build as broken as before.
    static std::string unchanged_core(const prompting::PromptInputs& in) {
        if (in.target_lines && !in.source.empty()) {
            const LineBuffer buf(in.source);
            if (in.target_lines->last <= buf.size()) {
                return buf.join(*in.target_lines);
            }
        }
        return "/* no change */";
    }

    std::uint64_t seed_;
    double q_;
    std::map<std::string, std::string> truth_;
};

nlohmann::json read_json_file(const std::string& path) {
    try {
        return nlohmann::json::parse(read_file(path));
    } catch (const std::exception& e) {
        throw BackendError(BackendErrc::invalid_config, path + ": " + e.what());
    }
}

}  // namespace

double stochastic_draw(std::uint64_t seed, std::string_view session_id, int iteration) noexcept {
    auto x = splitmix64(seed);
    x = splitmix64(x ^ fnv1a(session_id));
    x = splitmix64(x ^ static_cast<std::uint64_t>(iteration));
    return static_cast<double>(x >> 11) * 0x1.0p-53;
}

std::shared_ptr<Backend> register_backend(BackendKind kind, const nlohmann::json& config) {
    if (!config.is_object()) {
        throw BackendError(BackendErrc::invalid_config, "backend config must be an object");
    }
    try {
        switch (kind) {
        case BackendKind::replay: {
            if (config.contains("entries")) {
                return std::make_shared<ReplayBackend>(config);
            }
            if (!config.contains("fixture")) {
                throw BackendError(BackendErrc::invalid_config, "replay backend needs a fixture path");
            }
            return std::make_shared<ReplayBackend>(read_json_file(config.at("fixture").get<std::string>()));
        }
        case BackendKind::stochastic: {
            if (!config.contains("seed") || !config.contains("success_probability")) {
                throw BackendError(BackendErrc::invalid_config, "stochastic backend needs seed and success_probability");
            }
            const auto q = config.at("success_probability").get<double>();
            if (!(q >= 0.0 && q <= 1.0)) {
                throw BackendError(BackendErrc::invalid_config,
                                   "success_probability " + std::to_string(q) + " is outside [0, 1]");
            }
            std::map<std::string, std::string> truth;
            if (config.contains("ground_truth")) {
                truth = config.at("ground_truth").get<std::map<std::string, std::string>>();
            } else if (config.contains("ground_truth_file")) {
                truth = read_json_file(config.at("ground_truth_file").get<std::string>())
                            .get<std::map<std::string, std::string>>();
            } else {
                throw BackendError(BackendErrc::invalid_config, "stochastic backend needs a ground-truth table");
            }
            return std::make_shared<StochasticBackend>(config.at("seed").get<std::uint64_t>(), q, std::move(truth));
        }
        case BackendKind::wire:
            return detail::make_wire_backend(config);
        }
    } catch (const nlohmann::json::exception& e) {
        throw BackendError(BackendErrc::invalid_config, std::string("backend config: ") + e.what());
    }
    throw BackendError(BackendErrc::invalid_config, "unknown backend kind");
}

std::shared_ptr<Backend> make_backend(const nlohmann::json& config) {
    const auto name = config.is_object() ? config.value("kind", "") : std::string{};
    const auto kind = parse_backend_kind(name);
    if (!kind) {
        throw BackendError(BackendErrc::invalid_config, "unknown backend kind '" + name + "'");
    }
    return register_backend(*kind, config);
}

ParsedUrl parse_endpoint(std::string_view url) {
    static const std::regex re(R"(^http://(\[[0-9A-Fa-f:.]+\]|[A-Za-z0-9.\-]+)(?::(\d{1,5}))?(/[^\s]*)?$)");
    std::cmatch m;
    if (!std::regex_match(url.begin(), url.end(), m, re)) {
        throw BackendError(BackendErrc::invalid_config, "malformed endpoint URL '" + std::string(url) + "'");
    }
    ParsedUrl out;
    out.host = m[1].str();
    if (out.host.front() == '[') {
        out.host = out.host.substr(1, out.host.size() - 2);
    }
    if (m[2].matched) {
        out.port = std::stoi(m[2].str());
        if (out.port < 1 || out.port > 65535) {
            throw BackendError(BackendErrc::invalid_config, "port out of range in '" + std::string(url) + "'");
        }
    }
    out.path = m[3].matched ? m[3].str() : std::string("/v1/completions");
    return out;
}

bool is_loopback_host(std::string_view host) noexcept {
    return host == "localhost" || host == "::1" || host.substr(0, 4) == "127.";
}

}  // namespace shadowfix::backend
