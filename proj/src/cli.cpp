#include "shadowfix/cli.hpp"

#include "shadowfix/analytics.hpp"
#include "shadowfix/backend.hpp"
#include "shadowfix/diagnostics.hpp"
#include "shadowfix/fixmine.hpp"
#include "shadowfix/patching.hpp"
#include "shadowfix/prompting.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>

#include <atomic>
#include <mutex>
#include <ostream>
#include <thread>

namespace shadowfix::cli {

namespace {

fs::path resolve(const fs::path& base, const std::string& p) {
    const fs::path path(p);
    return path.is_absolute() || base.empty() ? path : base / path;
}

}  // namespace

RunConfig parse_run_config(const nlohmann::json& j, const fs::path& base_dir) {
    if (!j.is_object()) {
        throw shadow::ConfigError("config must be a JSON object");
    }
    static const std::set<std::string> known{"archive",  "taxonomy", "template",       "catalog",        "backend",
                                             "recipe",   "model",    "max_iterations", "ci",             "results",
                                             "seed",     "stack_patches", "token_limit", "context_lines", "workspace_root"};
    for (const auto& [key, value] : j.items()) {
        if (known.count(key) == 0) {
            throw shadow::ConfigError("unknown config key '" + key + "'");
        }
    }
    RunConfig c;
    try {
        if (j.contains("archive")) {
            c.archive = resolve(base_dir, j.at("archive").get<std::string>());
        }
        if (j.contains("taxonomy")) {
            c.taxonomy = resolve(base_dir, j.at("taxonomy").get<std::string>());
        }
        if (j.contains("template")) {
            c.template_path = resolve(base_dir, j.at("template").get<std::string>());
        }
        if (j.contains("catalog")) {
            c.catalog = resolve(base_dir, j.at("catalog").get<std::string>());
        }
        if (j.contains("backend")) {
            c.backend = j.at("backend");
            for (const char* key : {"fixture", "ground_truth_file"}) {
                if (c.backend.is_object() && c.backend.contains(key)) {
                    c.backend[key] = resolve(base_dir, c.backend.at(key).get<std::string>()).string();
                }
            }
        }
        c.recipe = j.value("recipe", c.recipe);
        c.model = j.value("model", c.model);
        c.max_iterations = j.value("max_iterations", c.max_iterations);
        if (j.contains("ci")) {
            c.ci = j.at("ci").get<shadow::CIConfig>();
        }
        if (j.contains("results")) {
            c.results = resolve(base_dir, j.at("results").get<std::string>());
        }
        c.seed = j.value("seed", c.seed);
        c.stack_patches = j.value("stack_patches", c.stack_patches);
        if (j.contains("token_limit")) {
            c.token_limit = j.at("token_limit").get<std::size_t>();
        }
        c.context_lines = j.value("context_lines", c.context_lines);
        if (j.contains("workspace_root")) {
            c.workspace_root = resolve(base_dir, j.at("workspace_root").get<std::string>());
        }
    } catch (const nlohmann::json::exception& e) {
        throw shadow::ConfigError(std::string("config: ") + e.what());
    }
    return c;
}

RunConfig load_run_config(const fs::path& path) {
    if (!fs::is_regular_file(path)) {
        throw shadow::ConfigError("config file " + path.string() + " not found");
    }
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(path.string()));
    } catch (const nlohmann::json::exception& e) {
        throw shadow::ConfigError(path.string() + ": " + e.what());
    }
    return parse_run_config(j, path.parent_path());
}

void validate(const RunConfig& c) {
    auto must_exist = [](const fs::path& p, const char* what) {
        if (!fs::exists(p)) {
            throw shadow::ConfigError(std::string(what) + " " + p.string() + " not found");
        }
    };
    if (c.archive.empty()) {
        throw shadow::ConfigError("no archive configured");
    }
    must_exist(c.archive, "archive");
    if (c.taxonomy) {
        must_exist(*c.taxonomy, "taxonomy");
    }
    if (c.template_path) {
        must_exist(*c.template_path, "template");
    }
    if (c.catalog) {
        must_exist(*c.catalog, "catalog");
    }
    for (const char* key : {"fixture", "ground_truth_file"}) {
        if (c.backend.is_object() && c.backend.contains(key)) {
            must_exist(c.backend.at(key).get<std::string>(), key);
        }
    }
    if (c.recipe < 0 || c.recipe >= prompting::kRecipeCount) {
        throw shadow::ConfigError(fmt::format("recipe {} is outside 0..6", c.recipe));
    }
    if (c.max_iterations < 1 || c.max_iterations > shadow::kIterationCeiling) {
        throw shadow::ConfigError(fmt::format("max_iterations {} is outside 1..{}", c.max_iterations,
                                              shadow::kIterationCeiling));
    }
}

namespace {

// Collaborators loaded once and shared by all sessions of a run.
struct Pipeline {
    diagnostics::Taxonomy taxonomy;
    diagnostics::LogGrammar grammar;
    prompting::PromptTemplate tmpl;
    fixmine::Archive archive;
    fixmine::ExampleCatalog catalog;
};

Pipeline load_pipeline(const RunConfig& c) {
    Pipeline p{c.taxonomy ? diagnostics::Taxonomy::load(c.taxonomy->string()) : diagnostics::Taxonomy::builtin(),
               diagnostics::LogGrammar{},
               c.template_path ? prompting::PromptTemplate::load(c.template_path->string())
                               : prompting::PromptTemplate::builtin(),
               fixmine::Archive::load(c.archive),
               {}};
    p.catalog = c.catalog ? fixmine::load_catalog(*c.catalog)
                          : fixmine::build_example_catalog(p.archive, p.taxonomy, c.seed, p.grammar);
    return p;
}

backend::ModelConfig model_of(const RunConfig& c) {
    auto m = backend::find_model(c.model);
    if (!m) {
        std::string names;
        for (const auto& r : backend::model_registry()) {
            names += (names.empty() ? "" : ", ") + r.name;
        }
        throw shadow::ConfigError("unknown model '" + c.model + "' (known: " + names + ")");
    }
    return *m;
}

struct Overrides {
    std::string config;
    std::optional<int> recipe;
    std::optional<std::string> model;
    std::optional<int> max_iter;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> results;
    std::optional<std::string> archive;
};

void add_override_flags(CLI::App* cmd, Overrides& o) {
    cmd->add_option("--config", o.config, "Run configuration (JSON)");
    cmd->add_option("--recipe", o.recipe, "Prompt recipe 0-6");
    cmd->add_option("--model", o.model, "Model name");
    cmd->add_option("--max-iter", o.max_iter, "Iteration cap");
    cmd->add_option("--seed", o.seed, "Seed for example selection and the stochastic backend");
    cmd->add_option("--results", o.results, "Session results file (JSON lines)");
    cmd->add_option("--archive", o.archive, "Build-history archive directory");
}

RunConfig effective_config(const Overrides& o) {
    RunConfig c = o.config.empty() ? RunConfig{} : load_run_config(o.config);
    if (o.recipe) {
        c.recipe = *o.recipe;
    }
    if (o.model) {
        c.model = *o.model;
    }
    if (o.max_iter) {
        c.max_iterations = *o.max_iter;
    }
    if (o.seed) {
        c.seed = *o.seed;
    }
    if (o.results) {
        c.results = *o.results;
    }
    if (o.archive) {
        c.archive = *o.archive;
    }
    // The stochastic backend follows the run seed unless it pins its own
    // and no --seed was given.
    if (c.backend.is_object() && c.backend.value("kind", "") == "stochastic" &&
        (o.seed || !c.backend.contains("seed"))) {
        c.backend["seed"] = c.seed;
    }
    return c;
}

shadow::SessionOptions session_options(const RunConfig& c) {
    shadow::SessionOptions opts;
    opts.max_iterations = c.max_iterations;
    opts.stack_patches = c.stack_patches;
    opts.token_limit = c.token_limit;
    opts.context_lines = c.context_lines;
    opts.workspace_root = c.workspace_root;
    return opts;
}

int cmd_parse_log(const std::string& path, const std::optional<std::string>& taxonomy_path, std::ostream& out,
                  std::ostream& err) {
    if (!fs::is_regular_file(path)) {
        err << "error: log file " << path << " not found\n";
        return kUsage;
    }
    const auto taxonomy = taxonomy_path ? diagnostics::Taxonomy::load(*taxonomy_path) : diagnostics::Taxonomy::builtin();
    const auto errors = diagnostics::parse_and_categorize(read_file(path), taxonomy);

    std::vector<std::string> locations;
    std::size_t loc_w = std::string_view("location").size();
    std::size_t cat_w = std::string_view("category").size();
    for (const auto& e : errors) {
        locations.push_back(e.file + ":" + std::to_string(e.line) +
                            (e.column ? ":" + std::to_string(*e.column) : std::string()));
        loc_w = std::max(loc_w, locations.back().size());
        cat_w = std::max(cat_w, e.category.size());
    }
    out << trim_right(fmt::format("{:<{}}  {:<{}}  {}", "location", loc_w, "category", cat_w, "message")) << '\n';
    for (std::size_t i = 0; i < errors.size(); ++i) {
        out << trim_right(fmt::format("{:<{}}  {:<{}}  {}", locations[i], loc_w, errors[i].category, cat_w,
                                      errors[i].message))
            << '\n';
    }
    return kOk;
}

int cmd_mine(const Overrides& o, const std::string& output, std::ostream& out) {
    auto c = effective_config(o);
    if (c.archive.empty()) {
        throw shadow::ConfigError("no archive given (--archive or --config)");
    }
    const auto taxonomy = c.taxonomy ? diagnostics::Taxonomy::load(c.taxonomy->string()) : diagnostics::Taxonomy::builtin();
    const auto archive = fixmine::Archive::load(c.archive);
    const auto catalog = fixmine::build_example_catalog(archive, taxonomy, c.seed);
    fixmine::save_catalog(output, catalog, c.seed);
    out << fmt::format("{} categories written to {}\n", catalog.size(), output);
    for (const auto& [category, ex] : catalog) {
        out << fmt::format("  {:<22} {}:{} ({} -> {})\n", category, ex.file, ex.faulty_first, ex.failing_build,
                           ex.fixing_build);
    }
    return kOk;
}

int cmd_prompt(const Overrides& o, const std::string& build_id, bool digest_only, std::ostream& out) {
    auto c = effective_config(o);
    validate(c);
    const auto p = load_pipeline(c);
    const auto& failing = p.archive.get(build_id);
    auto backend_stub = backend::make_backend({{"kind", "replay"}, {"entries", nlohmann::json::array()}});
    const shadow::SessionContext ctx{p.archive, p.taxonomy, p.grammar, p.catalog, p.tmpl, *backend_stub, c.ci};
    const auto opts = session_options(c);
    const shadow::Workspace ws(failing.snapshot_path, opts.workspace_root);
    auto prompt = prompting::assemble(prompting::recipe(c.recipe),
                                      shadow::gather_inputs(ws.path(), p.archive.read_log(failing), ctx, opts), p.tmpl);
    if (c.token_limit) {
        prompt = prompting::token_budget_check(prompt, *c.token_limit).prompt;
    }
    if (digest_only) {
        out << prompting::prompt_digest(prompt) << '\n';
    } else {
        out << prompt.text;
    }
    return kOk;
}

int cmd_repair(const Overrides& o, const std::vector<std::string>& build_ids, unsigned parallel, std::ostream& out) {
    auto c = effective_config(o);
    validate(c);
    if (c.ci.command.empty()) {
        throw shadow::ConfigError("no CI command configured");
    }
    const auto p = load_pipeline(c);
    const auto model = model_of(c);
    auto backend = backend::make_backend(c.backend);
    const shadow::SessionContext ctx{p.archive, p.taxonomy, p.grammar, p.catalog, p.tmpl, *backend, c.ci};
    const auto opts = session_options(c);

    std::vector<const fixmine::BuildRecord*> builds;
    for (const auto& id : build_ids) {
        const auto* r = p.archive.find(id);
        if (r == nullptr) {
            throw shadow::ConfigError("build '" + id + "' is not in the archive");
        }
        if (r->outcome != fixmine::Outcome::fail) {
            throw shadow::ConfigError("build '" + id + "' did not fail");
        }
        builds.push_back(r);
    }

    std::mutex out_mutex;
    auto progress = [&](const shadow::RepairSession& s, const shadow::RepairAttempt& a) {
        const std::lock_guard lock(out_mutex);
        out << fmt::format("[{}] iteration {}: {} ({}, {} ms){}\n", s.session_id, a.iteration,
                           fixmine::to_string(a.verdict.outcome), a.verdict.stage_reached, a.duration().count(),
                           a.error.empty() ? "" : " " + a.error);
    };

    std::vector<std::optional<shadow::RepairSession>> sessions(builds.size());
    std::vector<std::string> failures(builds.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (auto i = next++; i < builds.size(); i = next++) {
            try {
                sessions[i] = shadow::run_session(*builds[i], c.recipe, model, ctx, opts, progress);
            } catch (const std::exception& e) {
                failures[i] = e.what();
            }
        }
    };
    {
        std::vector<std::jthread> pool;
        const auto n = std::max<std::size_t>(1, std::min<std::size_t>(parallel, builds.size()));
        for (std::size_t t = 0; t < n; ++t) {
            pool.emplace_back(worker);
        }
    }

    bool all_passed = true;
    for (std::size_t i = 0; i < builds.size(); ++i) {
        if (!sessions[i]) {
            throw shadow::WorkspaceError("build '" + builds[i]->build_id + "': " + failures[i]);
        }
        shadow::append_session(c.results, *sessions[i]);
        const auto& s = *sessions[i];
        out << fmt::format("[{}] {} after {} attempt(s), {} ms\n", s.session_id, fixmine::to_string(s.final),
                           s.attempts.size(), s.total_duration.count());
        all_passed = all_passed && s.final == fixmine::Outcome::pass;
    }
    return all_passed ? kOk : kExhausted;
}

void write_csv(const std::optional<std::string>& dir, const std::string& name, const std::string& body) {
    if (dir) {
        fs::create_directories(*dir);
        write_file((fs::path(*dir) / name).string(), body);
    }
}

int cmd_report(const std::string& results, const std::optional<std::string>& labels_path,
               const std::optional<std::string>& csv_dir, std::ostream& out) {
    const auto sessions = shadow::load_sessions(results);
    std::vector<patching::ManualLabel> labels;
    if (labels_path) {
        labels = patching::load_manual_labels(*labels_path);
    }
    if (sessions.empty() && labels.empty()) {
        out << "no sessions\n";
        return kOk;
    }

    if (!sessions.empty()) {
        int max_cap = 1;
        std::set<int> recipes;
        for (const auto& s : sessions) {
            max_cap = std::max(max_cap, static_cast<int>(s.attempts.size()));
            recipes.insert(s.recipe);
        }
        std::vector<int> caps;
        for (int k = 1; k <= max_cap; ++k) {
            caps.push_back(k);
        }
        for (int r : recipes) {
            std::vector<shadow::RepairSession> subset;
            std::copy_if(sessions.begin(), sessions.end(), std::back_inserter(subset),
                         [&](const shadow::RepairSession& s) { return s.recipe == r; });
            const auto table = analytics::pass_rate_table(subset, analytics::GroupBy::model, caps);
            out << fmt::format("CI pass rate (%), recipe {}\n", r) << analytics::render_text(table) << '\n';
            write_csv(csv_dir, fmt::format("pass_rate_recipe{}.csv", r), analytics::render_csv(table));
        }
        const auto by_recipe = analytics::recipe_model_table(sessions, 1);
        out << "CI pass rate (%) at 1 iteration, by recipe\n" << analytics::render_text(by_recipe) << '\n';
        write_csv(csv_dir, "pass_rate_by_recipe.csv", analytics::render_csv(by_recipe));

        const auto tally = analytics::classify_passing(sessions, labels);
        if (!tally.empty()) {
            out << "Passing fixes\n";
            for (const auto& [label, n] : tally) {
                out << fmt::format("  {:<12} {}\n", patching::to_string(label), n);
            }
            out << '\n';
        }

        const auto histogram = analytics::time_histogram(sessions);
        out << "Fix time (minutes)\n" << analytics::render_text(histogram) << '\n';
        write_csv(csv_dir, "fix_time.csv", analytics::render_csv(histogram));
    }

    if (!labels.empty()) {
        const auto summary = analytics::classification_summary(labels);
        out << fmt::format("Fix analysis ({} attempts per reviewer)\n", summary.sample_size)
            << analytics::render_text(summary);
        write_csv(csv_dir, "fix_analysis.csv", analytics::render_csv(summary));
    }
    return kOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Shadow CI job that repairs compilation errors with language models", "shadowfix"};
    app.require_subcommand(1);

    std::string log_path;
    std::optional<std::string> taxonomy_path;
    auto* parse_log = app.add_subcommand("parse-log", "Print the errors found in a build log");
    parse_log->add_option("log", log_path, "Build log")->required();
    parse_log->add_option("--taxonomy", taxonomy_path, "Error taxonomy (JSON)");

    Overrides mine_o;
    std::string catalog_out = "catalog.json";
    auto* mine = app.add_subcommand("mine", "Mine one human fix example per error category");
    add_override_flags(mine, mine_o);
    mine->add_option("-o,--output", catalog_out, "Catalog file to write");

    Overrides repair_o;
    std::vector<std::string> build_ids;
    unsigned parallel = 1;
    auto* repair = app.add_subcommand("repair", "Run shadow repair sessions for failing builds");
    add_override_flags(repair, repair_o);
    repair->add_option("build", build_ids, "Failing build id(s)")->required();
    repair->add_option("--parallel", parallel, "Sessions to run at once")->check(CLI::Range(1u, 256u));

    Overrides prompt_o;
    std::string prompt_build;
    bool digest_only = false;
    auto* prompt = app.add_subcommand("prompt", "Print the first prompt a repair session would send");
    add_override_flags(prompt, prompt_o);
    prompt->add_option("build", prompt_build, "Failing build id")->required();
    prompt->add_flag("--digest", digest_only, "Print only the prompt digest");

    std::string results_path;
    std::optional<std::string> labels_path;
    std::optional<std::string> csv_dir;
    auto* report = app.add_subcommand("report", "Pass-rate tables, fix analysis and fix-time histogram");
    report->add_option("--results", results_path, "Session results file")->required();
    report->add_option("--labels", labels_path, "Manual label file (JSON lines)");
    report->add_option("--csv-dir", csv_dir, "Also write each table as CSV here");

    double p1 = 0;
    double p2 = 0;
    auto* sample = app.add_subcommand("sample-size", "Samples per group to separate two success rates");
    sample->add_option("p1", p1)->required();
    sample->add_option("p2", p2)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kOk : kUsage;
    }

    try {
        if (*parse_log) {
            return cmd_parse_log(log_path, taxonomy_path, out, err);
        }
        if (*mine) {
            return cmd_mine(mine_o, catalog_out, out);
        }
        if (*repair) {
            return cmd_repair(repair_o, build_ids, parallel, out);
        }
        if (*prompt) {
            return cmd_prompt(prompt_o, prompt_build, digest_only, out);
        }
        if (*report) {
            return cmd_report(results_path, labels_path, csv_dir, out);
        }
        if (*sample) {
            out << analytics::sample_size(p1, p2) << '\n';
            return kOk;
        }
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kUsage;
    }
    return kUsage;
}

}  // namespace shadowfix::cli
