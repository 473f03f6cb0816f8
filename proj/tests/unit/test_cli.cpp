#include "shadowfix/cli.hpp"

#include "enum_check.hpp"
#include "temp_dir.hpp"

#include <doctest.h>

#include <sstream>

using namespace shadowfix;
using fixmine::ArchiveWriter;
using fixmine::BuildRecord;
using fixmine::Outcome;
namespace fs = std::filesystem;

namespace {

struct Result {
    int code = 0;
    std::string out;
    std::string err;
};

Result shadowfix_cli(std::vector<std::string> args) {
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

std::size_t count_lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

constexpr const char* kLog = "src/db.cpp:2:5: error: enumeration value 'TYPE_I' not handled in switch\n";

std::string fixed_source() {
    return std::string("    // buggy code starts:\n") + testing::kEnumCheckFix +
           "\n    {        dbPrefix = \"rx3:\";    }\n    // buggy code ends:\n";
}

// b1 fails with the enum-check bug, b2 fixes it.
void write_archive(const fs::path& root) {
    ArchiveWriter w(root);
    BuildRecord r;
    r.build_id = "b1";
    r.commit_id = "c1";
    r.timestamp = *parse_iso8601("2024-05-01T08:00:00Z");
    r.outcome = Outcome::fail;
    w.add(r, kLog, std::map<std::string, std::string>{{"src/db.cpp", testing::kEnumCheckBug}});
    r.build_id = "b2";
    r.commit_id = "c2";
    r.timestamp += std::chrono::minutes(1);
    r.outcome = Outcome::pass;
    w.add(r, "", std::map<std::string, std::string>{{"src/db.cpp", fixed_source()}});
}

nlohmann::json config(double q) {
    return {{"archive", "archive"},
            {"backend",
             {{"kind", "stochastic"}, {"success_probability", q}, {"ground_truth", {{"b1", testing::kEnumCheckFix}}}}},
            {"recipe", 6},
            {"model", "codellama"},
            {"max_iterations", 3},
            {"seed", 7},
            {"ci", {{"command", {"/bin/sh", "-c", "grep -q 'TYPE_I))' src/db.cpp || { echo fail; exit 1; }"}}}},
            {"results", "results.jsonl"},
            {"workspace_root", "ws"}};
}

}  // namespace

TEST_CASE("parse-log") {
    const testing::TempDir dir;
    const auto log = dir / "build.log";
    write_file(log.string(), std::string(kLog) + "noise\nsrc/x.cpp:9:1: error: 'foo' was not declared in this scope\n");
    const auto r = shadowfix_cli({"parse-log", log.string()});
    CHECK(r.code == cli::kOk);
    CHECK(count_lines(r.out) == 3);
    CHECK(r.out.rfind("location", 0) == 0);
    CHECK(r.out.find("src/db.cpp:2") != std::string::npos);
    CHECK(r.out.find("unhandled-enum") != std::string::npos);
    CHECK(r.out.find("undeclared-identifier") != std::string::npos);

    write_file(log.string(), "");
    const auto empty = shadowfix_cli({"parse-log", log.string()});
    CHECK(empty.code == cli::kOk);
    CHECK(count_lines(empty.out) == 1);

    const auto missing = shadowfix_cli({"parse-log", (dir / "nope.log").string()});
    CHECK(missing.code == cli::kUsage);
    CHECK(missing.err.find("not found") != std::string::npos);
}

TEST_CASE("sample-size") {
    const auto r = shadowfix_cli({"sample-size", "0.25", "0.30"});
    CHECK(r.code == cli::kOk);
    CHECK(r.out == "1276\n");
    CHECK(shadowfix_cli({"sample-size", "0", "1"}).out == "4\n");
    const auto same = shadowfix_cli({"sample-size", "0.4", "0.4"});
    CHECK(same.code == cli::kUsage);
    CHECK(same.err.rfind("error: ", 0) == 0);
    CHECK(shadowfix_cli({"sample-size", "0.4"}).code == cli::kUsage);
    CHECK(shadowfix_cli({}).code == cli::kUsage);
    CHECK(shadowfix_cli({"frobnicate"}).code == cli::kUsage);
}

TEST_CASE("mine") {
    const testing::TempDir dir;
    write_archive(dir / "archive");
    const auto out = dir / "catalog.json";
    const auto r = shadowfix_cli({"mine", "--archive", (dir / "archive").string(), "-o", out.string()});
    CHECK(r.code == cli::kOk);
    CHECK(r.out.rfind("1 categories written", 0) == 0);
    const auto catalog = fixmine::load_catalog(out);
    REQUIRE(catalog.count("unhandled-enum") == 1);
    CHECK(patching::exact_match(catalog.at("unhandled-enum").fixed_segment, testing::kEnumCheckFix));

    fs::create_directories(dir / "empty");
    write_file((dir / "empty" / "order.txt").string(), "");
    const auto none = shadowfix_cli({"mine", "--archive", (dir / "empty").string(), "-o", out.string()});
    CHECK(none.code == cli::kOk);
    CHECK(none.out.rfind("0 categories written", 0) == 0);

    fs::create_directories(dir / "broken");
    const auto broken = shadowfix_cli({"mine", "--archive", (dir / "broken").string(), "-o", out.string()});
    CHECK(broken.code == cli::kUsage);
    CHECK(broken.err.find("order.txt") != std::string::npos);
}

TEST_CASE("run config parsing") {
    const testing::TempDir dir;
    const auto c = cli::parse_run_config(config(1.0), dir.path());
    CHECK(c.archive == dir / "archive");
    CHECK(c.results == dir / "results.jsonl");
    CHECK(c.recipe == 6);
    CHECK(c.max_iterations == 3);
    CHECK(c.seed == 7);
    CHECK(c.ci.command.size() == 3);

    auto unknown = config(1.0);
    unknown["colour"] = "blue";
    CHECK_THROWS_AS((void)cli::parse_run_config(unknown, dir.path()), shadow::ConfigError);

    auto bad_recipe = cli::parse_run_config(config(1.0), dir.path());
    write_archive(dir / "archive");
    CHECK_NOTHROW(cli::validate(bad_recipe));
    bad_recipe.recipe = 9;
    CHECK_THROWS_AS(cli::validate(bad_recipe), shadow::ConfigError);
    auto many = cli::parse_run_config(config(1.0), dir.path());
    many.max_iterations = 11;
    CHECK_THROWS_AS(cli::validate(many), shadow::ConfigError);
    auto lost = cli::parse_run_config(config(1.0), dir.path());
    lost.archive = dir / "elsewhere";
    CHECK_THROWS_AS(cli::validate(lost), shadow::ConfigError);
}

TEST_CASE("prompt, repair and report end to end") {
    const testing::TempDir dir;
    write_archive(dir / "archive");
    const auto cfg = dir / "run.json";
    write_file(cfg.string(), config(1.0).dump(2));

    const auto prompt = shadowfix_cli({"prompt", "b1", "--config", cfg.string()});
    CHECK(prompt.code == cli::kOk);
    CHECK(prompt.out.find("### HUMAN FIX EXAMPLE") != std::string::npos);
    const auto digest = shadowfix_cli({"prompt", "b1", "--config", cfg.string(), "--digest"});
    CHECK(digest.out == sha256_hex(prompt.out) + "\n");

    const auto ok = shadowfix_cli({"repair", "b1", "--config", cfg.string()});
    CHECK(ok.code == cli::kOk);
    CHECK(ok.out.find("[b1-codellama-r6] iteration 1: pass (complete,") != std::string::npos);
    CHECK(ok.out.find("[b1-codellama-r6] pass after 1 attempt(s)") != std::string::npos);

    write_file(cfg.string(), config(0.0).dump(2));
    const auto exhausted = shadowfix_cli({"repair", "b1", "--config", cfg.string(), "--max-iter", "2"});
    CHECK(exhausted.code == cli::kExhausted);
    CHECK(exhausted.out.find("fail after 2 attempt(s)") != std::string::npos);

    const auto sessions = shadow::load_sessions(dir / "results.jsonl");
    REQUIRE(sessions.size() == 2);
    CHECK(sessions[0].final == Outcome::pass);
    CHECK(sessions[1].final == Outcome::fail);
    CHECK(fs::is_empty(dir / "ws"));

    CHECK(shadowfix_cli({"repair", "b2", "--config", cfg.string()}).code == cli::kUsage);
    CHECK(shadowfix_cli({"repair", "zz", "--config", cfg.string()}).code == cli::kUsage);
    CHECK(shadowfix_cli({"repair", "b1", "--config", cfg.string(), "--recipe", "8"}).code == cli::kUsage);

    const auto labels = dir / "labels.jsonl";
    write_file(labels.string(),
               R"({"session_id": "b1-codellama-r6", "attempt": 1, "label": "exact", "reviewer": "dev1"})"
               "\n"
               R"({"session_id": "b1-codellama-r6", "attempt": 1, "label": "plausible", "reviewer": "dev2"})"
               "\n");
    const auto csv = dir / "csv";
    const auto report = shadowfix_cli({"report", "--results", (dir / "results.jsonl").string(), "--labels",
                                       labels.string(), "--csv-dir", csv.string()});
    CHECK(report.code == cli::kOk);
    CHECK(report.out.find("CI pass rate (%), recipe 6") != std::string::npos);
    CHECK(report.out.find("iterations  codellama\n1                  50\n") != std::string::npos);
    CHECK(report.out.find("Fix analysis (1 attempts per reviewer)") != std::string::npos);
    CHECK(report.out.find("  exact        1\n") != std::string::npos);
    CHECK(read_file((csv / "fix_analysis.csv").string()) ==
          "reviewer,exact,plausible,implausible\ndev1,1,0,0\ndev2,0,1,0\naverage,1,1,0\n");
    CHECK(fs::exists(csv / "pass_rate_recipe6.csv"));
    CHECK(fs::exists(csv / "fix_time.csv"));
}

TEST_CASE("parallel repair keeps input order") {
    const testing::TempDir dir;
    ArchiveWriter w(dir / "archive");
    BuildRecord r;
    r.timestamp = *parse_iso8601("2024-05-01T08:00:00Z");
    nlohmann::json truth;
    for (int i = 0; i < 4; ++i) {
        r.build_id = "f" + std::to_string(i);
        r.commit_id = r.build_id;
        r.outcome = Outcome::fail;
        r.timestamp += std::chrono::minutes(1);
        w.add(r, kLog, std::map<std::string, std::string>{{"src/db.cpp", testing::kEnumCheckBug}});
        truth[r.build_id] = testing::kEnumCheckFix;
    }
    auto c = config(1.0);
    c["backend"]["ground_truth"] = truth;
    c["recipe"] = 3;
    write_file((dir / "run.json").string(), c.dump());
    const auto res = shadowfix_cli(
        {"repair", "f0", "f1", "f2", "f3", "--parallel", "3", "--config", (dir / "run.json").string()});
    CHECK(res.code == cli::kOk);
    const auto sessions = shadow::load_sessions(dir / "results.jsonl");
    REQUIRE(sessions.size() == 4);
    for (int i = 0; i < 4; ++i) {
        CHECK(sessions[static_cast<std::size_t>(i)].failing_build == "f" + std::to_string(i));
        CHECK(sessions[static_cast<std::size_t>(i)].final == Outcome::pass);
    }
}

TEST_CASE("report edge cases") {
    const testing::TempDir dir;
    const auto results = dir / "results.jsonl";
    write_file(results.string(), "");
    const auto empty = shadowfix_cli({"report", "--results", results.string()});
    CHECK(empty.code == cli::kOk);
    CHECK(empty.out == "no sessions\n");

    write_file(results.string(), "\n{broken\n");
    const auto corrupt = shadowfix_cli({"report", "--results", results.string()});
    CHECK(corrupt.code == cli::kUsage);
    CHECK(corrupt.err.find("line 2") != std::string::npos);

    CHECK(shadowfix_cli({"report", "--results", (dir / "missing").string()}).code == cli::kUsage);

    const auto labels = dir / "labels.jsonl";
    std::string text;
    const std::pair<const char*, int> counts[] = {{"exact", 18}, {"plausible", 63}, {"implausible", 19}};
    int k = 0;
    for (const auto& [label, n] : counts) {
        for (int i = 0; i < n; ++i, ++k) {
            text += nlohmann::json{{"session_id", "s" + std::to_string(k)}, {"attempt", 1}, {"label", label},
                                   {"reviewer", "dev1"}}
                        .dump() +
                    "\n";
        }
    }
    write_file(results.string(), "");
    write_file(labels.string(), text);
    const auto table = shadowfix_cli({"report", "--results", results.string(), "--labels", labels.string()});
    CHECK(table.code == cli::kOk);
    CHECK(table.out.find("Fix analysis (100 attempts per reviewer)") != std::string::npos);
    CHECK(table.out.find("average      18         63           19") != std::string::npos);
}
