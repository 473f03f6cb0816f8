#include "corpus.hpp"

#include "shadowfix/cli.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <set>
#include <sstream>

namespace shadowfix::acceptance {

namespace {

constexpr const char* kCompile = "g++ -std=c++17 -Werror=switch -fsyntax-only -I. main.cpp";
// Passes iff main.cpp matches the fixed version; otherwise replays the
// compiler output recorded for the broken tree.
constexpr const char* kScripted = "sha256sum -c --status .ci/expected.sha256 || { cat .ci/failure.log; exit 1; }";

struct CliResult {
    int code = 0;
    std::string out;
    std::string err;
};

CliResult shadowfix_cli(std::vector<std::string> args) {
    args.insert(args.begin(), "shadowfix");
    std::vector<const char*> argv;
    for (const auto& a : args) {
        argv.push_back(a.c_str());
    }
    std::ostringstream out;
    std::ostringstream err;
    const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

void stage_tree(const fs::path& from, const fs::path& to, const CorpusCase& c) {
    fs::create_directories(to);
    fs::copy(from, to, fs::copy_options::recursive);
    fs::create_directories(to / ".ci");
    write_file((to / ".ci/expected.sha256").string(),
               sha256_hex(read_file((c.fixed / "main.cpp").string())) + "  main.cpp\n");
    write_file((to / ".ci/failure.log").string(), c.canned_log);
}

// The lines of `fixed` that take the place of `target` in `broken`, or
// nullopt when the two files also differ outside the target.
std::optional<std::string> replacement_for(const std::string& broken, const std::string& fixed, LineRange target) {
    const auto b = split_lines(broken);
    const auto f = split_lines(fixed);
    if (target.last > b.size() || target.first < 1) {
        return std::nullopt;
    }
    const std::size_t head = target.first - 1;
    const std::size_t tail = b.size() - target.last;
    if (f.size() < head + tail || !std::equal(b.begin(), b.begin() + static_cast<long>(head), f.begin()) ||
        !std::equal(b.end() - static_cast<long>(tail), b.end(), f.end() - static_cast<long>(tail))) {
        return std::nullopt;
    }
    return join_lines({f.begin() + static_cast<long>(head), f.end() - static_cast<long>(tail)});
}

}  // namespace

std::vector<CorpusCase> load_corpus(const fs::path& root) {
    std::vector<CorpusCase> out;
    for (const auto& entry : fs::directory_iterator(root)) {
        if (!entry.is_directory()) {
            continue;
        }
        CorpusCase c;
        c.name = entry.path().filename().string();
        c.broken = entry.path() / "broken";
        c.fixed = entry.path() / "fixed";
        c.canned_log = read_file((entry.path() / "broken.log").string());
        c.category = nlohmann::json::parse(read_file((entry.path() / "case.json").string())).at("category");
        out.push_back(std::move(c));
    }
    std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.name < b.name; });
    return out;
}

shadow::CIConfig corpus_ci(CIMode mode) {
    shadow::CIConfig ci;
    ci.command = {"/bin/sh", "-c", mode == CIMode::compiler ? kCompile : kScripted};
    ci.timeout_seconds = 60;
    return ci;
}

bool have_compiler() {
    const fs::path here = fs::temp_directory_path();
    return shadow::run_ci(here, shadow::CIConfig{{"g++", "--version"}, 30, {}, ""}).outcome == fixmine::Outcome::pass;
}

CorpusRun run_corpus(const std::vector<CorpusCase>& corpus, CIMode mode, const fs::path& work) {
    const auto start = std::chrono::steady_clock::now();
    CorpusRun run;
    run.cases = corpus.size();
    const auto ci = corpus_ci(mode);

    // Archive: each case fails, then its fix lands a minute later.
    const auto archive_dir = work / "archive";
    {
        fixmine::ArchiveWriter writer(archive_dir);
        auto t = *parse_iso8601("2024-03-01T09:00:00Z");
        for (const auto& c : corpus) {
            const auto broken = work / "stage" / c.name / "broken";
            const auto fixed = work / "stage" / c.name / "fixed";
            stage_tree(c.broken, broken, c);
            stage_tree(c.fixed, fixed, c);

            std::string log = c.canned_log;
            if (mode == CIMode::compiler) {
                const auto v = shadow::run_ci(broken, ci);
                if (v.outcome == fixmine::Outcome::pass) {
                    run.problems.push_back(c.name + ": broken tree compiles");
                }
                log = v.log;
            }
            if (shadow::run_ci(fixed, ci).outcome != fixmine::Outcome::pass) {
                run.problems.push_back(c.name + ": fixed tree does not pass CI");
            }

            fixmine::BuildRecord r;
            r.build_id = c.name + "-fail";
            r.commit_id = c.name + "-1";
            r.timestamp = t;
            r.outcome = fixmine::Outcome::fail;
            writer.add(r, log, broken);
            r.build_id = c.name + "-fix";
            r.commit_id = c.name + "-2";
            r.timestamp = t + std::chrono::minutes(1);
            r.outcome = fixmine::Outcome::pass;
            writer.add(r, "", fixed);
            t += std::chrono::minutes(10);
        }
    }

    const auto archive = fixmine::Archive::load(archive_dir);
    const diagnostics::LogGrammar grammar;
    const fixmine::ExampleCatalog no_catalog;
    auto placeholder = backend::make_backend({{"kind", "replay"}, {"entries", nlohmann::json::array()}});
    const shadow::SessionContext ctx{archive,
                                     diagnostics::Taxonomy::builtin(),
                                     grammar,
                                     no_catalog,
                                     prompting::PromptTemplate::builtin(),
                                     *placeholder,
                                     ci};

    nlohmann::json config{{"archive", "archive"},
                          {"backend", {{"kind", "replay"}, {"fixture", "replay.json"}}},
                          {"recipe", 6},
                          {"model", "codellama"},
                          {"max_iterations", shadow::kDefaultMaxIterations},
                          {"seed", 1},
                          {"ci", ci},
                          {"results", "results.jsonl"},
                          {"workspace_root", "workspaces"}};
    const auto config_path = work / "run.json";
    write_file(config_path.string(), config.dump(2));
    write_file((work / "replay.json").string(), backend::replay_fixture_json({}).dump());

    std::set<std::string> categories;
    std::vector<backend::ReplayEntry> entries;
    std::vector<std::string> builds;
    for (const auto& c : corpus) {
        const auto& failing = archive.get(c.name + "-fail");
        const auto in = shadow::gather_inputs(failing.snapshot_path, archive.read_log(failing), ctx, {});
        if (in.errors.empty() || !in.target_lines) {
            run.problems.push_back(c.name + ": no error located in the log");
            continue;
        }
        if (in.errors.front().category != c.category) {
            run.problems.push_back(
                fmt::format("{}: categorized as {}, expected {}", c.name, in.errors.front().category, c.category));
        }
        categories.insert(in.errors.front().category);
        const auto fixed_text = read_file((c.fixed / in.target_file).string());
        const auto replacement = replacement_for(in.source, fixed_text, *in.target_lines);
        if (!replacement) {
            run.problems.push_back(c.name + ": fix lies outside the patch target");
            continue;
        }
        const auto digest = shadowfix_cli({"prompt", failing.build_id, "--digest", "--config", config_path.string()});
        if (digest.code != cli::kOk) {
            run.problems.push_back(c.name + ": prompt failed: " + digest.err);
            continue;
        }
        entries.push_back({std::string(trim(digest.out)), 1, "```cpp\n" + *replacement + "\n```"});
        builds.push_back(failing.build_id);
    }
    run.categories = categories.size();
    write_file((work / "replay.json").string(), backend::replay_fixture_json(entries).dump(2));

    std::vector<std::string> args{"repair"};
    args.insert(args.end(), builds.begin(), builds.end());
    args.insert(args.end(), {"--config", config_path.string()});
    const auto repair = shadowfix_cli(args);
    if (repair.code != cli::kOk) {
        run.problems.push_back(fmt::format("repair exited {}: {}{}", repair.code, repair.err, repair.out));
    }
    if (fs::exists(work / "results.jsonl")) {
        for (const auto& s : shadow::load_sessions(work / "results.jsonl")) {
            if (s.passed_at() == 1) {
                ++run.passed_first_try;
            }
        }
    }

    run.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return run;
}

}  // namespace shadowfix::acceptance
