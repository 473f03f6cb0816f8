#include "shadowfix/shadow.hpp"

#include <fstream>
#include <mutex>

namespace shadowfix::shadow {

namespace {

Outcome outcome_field(const nlohmann::json& j, const char* key) {
    const auto text = j.at(key).get<std::string>();
    const auto o = fixmine::parse_outcome(text);
    if (!o) {
        throw Error(std::string("bad ") + key + " '" + text + "'");
    }
    return *o;
}

Instant instant_field(const nlohmann::json& j, const char* key) {
    const auto text = j.at(key).get<std::string>();
    const auto t = parse_iso8601(text);
    if (!t) {
        throw Error(std::string("bad ") + key + " timestamp '" + text + "'");
    }
    return *t;
}

nlohmann::json attempt_json(const RepairAttempt& a) {
    nlohmann::json j{{"iteration", a.iteration},
                     {"prompt_digest", a.prompt_digest},
                     {"candidate", nullptr},
                     {"verdict",
                      {{"outcome", fixmine::to_string(a.verdict.outcome)},
                       {"stage_reached", a.verdict.stage_reached},
                       {"log", a.verdict.log},
                       {"duration_ms", a.verdict.duration.count()}}},
                     {"started", format_iso8601(a.started)},
                     {"ended", format_iso8601(a.ended)},
                     {"error", a.error}};
    if (a.candidate) {
        j["candidate"] = {{"text", a.candidate->text},
                          {"model", a.candidate->model},
                          {"latency_ms", a.candidate->latency.count()},
                          {"iteration", a.candidate->iteration}};
    }
    return j;
}

RepairAttempt attempt_from(const nlohmann::json& j) {
    RepairAttempt a;
    a.iteration = j.at("iteration").get<int>();
    a.prompt_digest = j.value("prompt_digest", "");
    if (const auto& c = j.at("candidate"); !c.is_null()) {
        a.candidate = backend::PatchCandidate{c.at("text").get<std::string>(), c.at("model").get<std::string>(),
                                              Millis{c.at("latency_ms").get<std::int64_t>()},
                                              c.at("iteration").get<int>()};
    }
    const auto& v = j.at("verdict");
    a.verdict.outcome = outcome_field(v, "outcome");
    a.verdict.stage_reached = v.at("stage_reached").get<std::string>();
    a.verdict.log = v.value("log", "");
    a.verdict.duration = Millis{v.at("duration_ms").get<std::int64_t>()};
    a.started = instant_field(j, "started");
    a.ended = instant_field(j, "ended");
    a.error = j.value("error", "");
    return a;
}

}  // namespace

void to_json(nlohmann::json& j, const RepairSession& s) {
    auto attempts = nlohmann::json::array();
    for (const auto& a : s.attempts) {
        attempts.push_back(attempt_json(a));
    }
    j = nlohmann::json{{"session_id", s.session_id},
                       {"failing_build", s.failing_build},
                       {"model", s.model},
                       {"recipe", s.recipe},
                       {"final", fixmine::to_string(s.final)},
                       {"total_duration_ms", s.total_duration.count()},
                       {"historical_fix", s.historical_fix ? nlohmann::json(*s.historical_fix) : nlohmann::json()},
                       {"attempts", std::move(attempts)}};
}

void from_json(const nlohmann::json& j, RepairSession& s) {
    s.session_id = j.at("session_id").get<std::string>();
    s.failing_build = j.at("failing_build").get<std::string>();
    s.model = j.at("model").get<std::string>();
    s.recipe = j.at("recipe").get<int>();
    s.final = outcome_field(j, "final");
    s.total_duration = Millis{j.at("total_duration_ms").get<std::int64_t>()};
    s.historical_fix.reset();
    if (j.contains("historical_fix") && !j.at("historical_fix").is_null()) {
        s.historical_fix = j.at("historical_fix").get<std::string>();
    }
    s.attempts.clear();
    for (const auto& a : j.at("attempts")) {
        s.attempts.push_back(attempt_from(a));
    }
    for (std::size_t i = 0; i < s.attempts.size(); ++i) {
        if (s.attempts[i].iteration != static_cast<int>(i) + 1) {
            throw Error("session " + s.session_id + ": attempt iterations are not consecutive from 1");
        }
    }
}

void append_session(const fs::path& results, const RepairSession& session) {
    static std::mutex mutex;
    const std::lock_guard lock(mutex);
    std::ofstream out(results, std::ios::binary | std::ios::app);
    if (!out) {
        throw Error("cannot open " + results.string() + " for appending");
    }
    out << nlohmann::json(session).dump() << '\n';
    if (!out) {
        throw Error("cannot write " + results.string());
    }
}

std::vector<RepairSession> parse_sessions(std::string_view jsonl) {
    std::vector<RepairSession> out;
    std::size_t number = 0;
    for (const auto& line : split_lines(jsonl)) {
        ++number;
        if (trim(line).empty()) {
            continue;
        }
        try {
            out.push_back(nlohmann::json::parse(line).get<RepairSession>());
        } catch (const std::exception& e) {
            throw Error("results line " + std::to_string(number) + ": " + e.what());
        }
    }
    return out;
}

std::vector<RepairSession> load_sessions(const fs::path& results) {
    if (!fs::is_regular_file(results)) {
        throw Error("results file " + results.string() + " not found");
    }
    return parse_sessions(read_file(results.string()));
}

}  // namespace shadowfix::shadow
