#include "shadowfix/shadow.hpp"

#include "shadowfix/patching.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cstdlib>
#include <stdexcept>
#include <system_error>

#include <unistd.h>

namespace shadowfix::shadow {

std::optional<int> RepairSession::passed_at() const noexcept {
    if (final == Outcome::pass && !attempts.empty()) {
        return attempts.back().iteration;
    }
    return std::nullopt;
}

std::string session_id(std::string_view build_id, std::string_view model, int recipe) {
    return std::string(build_id) + "-" + std::string(model) + "-r" + std::to_string(recipe);
}

Workspace::Workspace(const fs::path& source, const fs::path& parent, bool keep) : keep_(keep) {
    std::error_code ec;
    const auto base = parent.empty() ? fs::temp_directory_path(ec) : parent;
    if (ec) {
        throw WorkspaceError("no temporary directory: " + ec.message());
    }
    fs::create_directories(base, ec);
    auto pattern = (base / "shadowfix-XXXXXX").string();
    if (::mkdtemp(pattern.data()) == nullptr) {
        throw WorkspaceError("cannot create workspace under " + base.string());
    }
    path_ = pattern;
    if (!fs::is_directory(source)) {
        fs::remove_all(path_, ec);
        throw WorkspaceError("snapshot " + source.string() + " is not a directory");
    }
    fs::copy(source, path_, fs::copy_options::recursive | fs::copy_options::copy_symlinks, ec);
    if (ec) {
        fs::remove_all(path_, ec);
        throw WorkspaceError("cannot copy snapshot " + source.string() + ": " + ec.message());
    }
}

Workspace::~Workspace() {
    if (!keep_) {
        std::error_code ec;
        fs::remove_all(path_, ec);
    }
}

namespace {

// Wall-clock instants derived from a steady clock, so durations computed
// from them never go negative and attempt durations never exceed the
// session total.
class SessionClock {
public:
    SessionClock() : wall_(now_ms()), steady_(std::chrono::steady_clock::now()) {}

    [[nodiscard]] Instant now() const {
        return wall_ + std::chrono::duration_cast<Millis>(std::chrono::steady_clock::now() - steady_);
    }

private:
    Instant wall_;
    std::chrono::steady_clock::time_point steady_;
};

struct Target {
    std::string display;
    fs::path path;
};

std::optional<Target> locate(const fs::path& tree, const CIConfig& ci, std::string_view file) {
    std::vector<fs::path> roots;
    if (!ci.workdir.empty()) {
        if (auto wd = fixmine::resolve_within(tree, ci.workdir)) {
            roots.push_back(*wd);
        }
    }
    roots.push_back(tree);
    for (const auto& root : roots) {
        if (auto p = fixmine::resolve_within(root, file); p && fs::is_regular_file(*p)) {
            return Target{std::string(file), *p};
        }
    }
    return std::nullopt;
}

// The lines a candidate replaces: the first error's core, widened to cover
// the cores of later same-file errors that fall inside its snippet.
LineRange patch_target(const std::vector<patching::Snippet>& snippets) {
    LineRange target = snippets.front().core;
    for (std::size_t i = 1; i < snippets.size(); ++i) {
        const auto& s = snippets[i];
        if (s.file == snippets.front().file && snippets.front().span.contains(s.core)) {
            target.first = std::min(target.first, s.core.first);
            target.last = std::max(target.last, s.core.last);
        }
    }
    return target;
}

}  // namespace

prompting::PromptInputs gather_inputs(const fs::path& tree, std::string_view log, const SessionContext& ctx,
                                      const SessionOptions& opts) {
    prompting::PromptInputs in;
    const auto all = diagnostics::parse_and_categorize(log, ctx.taxonomy, ctx.grammar);
    in.errors = diagnostics::select_primary_errors(all, opts.max_errors);

    if (in.errors.empty()) {
        in.log_excerpt = std::string(trim(log));
        return in;
    }

    std::vector<std::string> raws;
    for (const auto& e : in.errors) {
        raws.push_back(e.raw);
    }
    in.log_excerpt = join_lines(raws);

    const auto target = locate(tree, ctx.ci, in.errors.front().file);
    if (!target) {
        return in;
    }
    in.target_file = target->display;
    in.source = read_file(target->path.string());

    const LineBuffer buf(in.source);
    for (const auto& e : in.errors) {
        if (e.file != in.target_file || e.line > buf.size()) {
            continue;
        }
        in.snippets.push_back(patching::extract_snippet(in.source, e, opts.context_lines));
    }
    if (!in.snippets.empty()) {
        in.target_lines = patch_target(in.snippets);
    }
    if (const auto it = ctx.catalog.find(in.errors.front().category); it != ctx.catalog.end()) {
        in.example = it->second;
    }
    return in;
}

namespace {

std::optional<std::string> historical_fix(const fixmine::Archive& archive, const fixmine::BuildRecord& failing,
                                          const prompting::PromptInputs& in) {
    if (in.errors.empty()) {
        return std::nullopt;
    }
    try {
        const auto fixing = fixmine::find_first_success(archive.records(), failing.build_id);
        const auto ex = fixmine::derive_fix_example(archive, failing, archive.get(fixing), in.errors.front());
        return ex.fixed_segment;
    } catch (const Error&) {
        return std::nullopt;
    } catch (const std::invalid_argument&) {
        return std::nullopt;
    }
}

void validate(const fixmine::BuildRecord& failing, int recipe, const SessionOptions& opts) {
    if (failing.outcome != Outcome::fail) {
        throw ConfigError("build '" + failing.build_id + "' did not fail");
    }
    if (opts.iteration_ceiling < 1 || opts.max_iterations < 1 || opts.max_iterations > opts.iteration_ceiling) {
        throw ConfigError("max_iterations " + std::to_string(opts.max_iterations) + " is outside 1.." +
                          std::to_string(opts.iteration_ceiling));
    }
    if (recipe < 0 || recipe >= prompting::kRecipeCount) {
        throw ConfigError("recipe " + std::to_string(recipe) + " is outside 0..6");
    }
}

CIVerdict no_verdict(std::string_view stage) {
    CIVerdict v;
    v.outcome = Outcome::fail;
    v.stage_reached = std::string(stage);
    return v;
}

}  // namespace

RepairSession run_session(const fixmine::BuildRecord& failing, int recipe_number, const backend::ModelConfig& model,
                          const SessionContext& ctx, const SessionOptions& opts, const ProgressFn& progress) {
    validate(failing, recipe_number, opts);
    const auto recipe = prompting::recipe(recipe_number);
    const SessionClock clock;
    const auto session_start = clock.now();

    RepairSession session;
    session.session_id = session_id(failing.build_id, model.name, recipe_number);
    session.failing_build = failing.build_id;
    session.model = model.name;
    session.recipe = recipe_number;

    const auto original_log = ctx.archive.read_log(failing);
    auto log = original_log;

    // With stacking, one workspace carries every patch forward.
    std::optional<Workspace> stacked;
    if (opts.stack_patches) {
        stacked.emplace(failing.snapshot_path, opts.workspace_root, opts.keep_workspaces);
    }

    for (int i = 1; i <= opts.max_iterations; ++i) {
        RepairAttempt attempt;
        attempt.iteration = i;
        attempt.started = clock.now();

        std::optional<Workspace> fresh;
        if (!stacked) {
            fresh.emplace(failing.snapshot_path, opts.workspace_root, opts.keep_workspaces);
        }
        const auto& ws = stacked ? *stacked : *fresh;

        const auto inputs = gather_inputs(ws.path(), log, ctx, opts);
        if (i == 1) {
            session.historical_fix = historical_fix(ctx.archive, failing, inputs);
        }
        const bool no_errors = inputs.errors.empty();

        auto finish = [&](CIVerdict verdict, std::string error) {
            attempt.verdict = std::move(verdict);
            attempt.error = std::move(error);
            attempt.ended = clock.now();
            session.attempts.push_back(std::move(attempt));
            if (progress) {
                progress(session, session.attempts.back());
            }
        };

        std::optional<prompting::Prompt> prompt;
        try {
            auto assembled = prompting::assemble(recipe, inputs, ctx.tmpl);
            if (opts.token_limit) {
                assembled = prompting::token_budget_check(assembled, *opts.token_limit).prompt;
            }
            prompt = std::move(assembled);
        } catch (const prompting::PromptError& e) {
            // The same inputs would be missing on every retry.
            finish(no_verdict(stage::prompt), e.what());
            break;
        }
        attempt.prompt_digest = prompting::prompt_digest(*prompt);

        try {
            attempt.candidate = ctx.backend.generate(
                backend::GenerateRequest{*prompt, model, i, session.session_id, failing.build_id});
        } catch (const backend::BackendError& e) {
            finish(no_verdict(stage::generate), e.what());
            if (no_errors) {
                break;
            }
            continue;
        }

        if (!inputs.target_lines) {
            finish(no_verdict(stage::no_target), "no erroneous lines located to patch");
            break;
        }

        const auto target = locate(ws.path(), ctx.ci, inputs.target_file);
        try {
            const patching::Patch patch{inputs.target_file, *inputs.target_lines, attempt.candidate->text,
                                        {model.name, i}};
            write_file(target->path.string(), patching::apply_patch(inputs.source, patch));
        } catch (const Error& e) {
            finish(no_verdict(stage::patch), e.what());
            continue;
        }

        auto verdict = run_ci(ws.path(), ctx.ci);
        const bool passed = verdict.outcome == Outcome::pass;
        if (stacked && !passed) {
            log = verdict.log;
        }
        finish(std::move(verdict), {});
        if (passed) {
            break;
        }
    }

    session.final = !session.attempts.empty() && session.attempts.back().verdict.outcome == Outcome::pass
                        ? Outcome::pass
                        : Outcome::fail;
    session.total_duration = clock.now() - session_start;
    return session;
}

namespace {

constexpr int kFineLimitMinutes = 10;
constexpr int kFineWidth = 2;
constexpr int kCoarseWidth = 5;

}  // namespace

std::string bucket_of(Millis duration, int overflow_minutes) {
    if (duration.count() < 0) {
        throw std::invalid_argument("negative duration");
    }
    if (overflow_minutes < kFineLimitMinutes || (overflow_minutes - kFineLimitMinutes) % kCoarseWidth != 0) {
        throw std::invalid_argument("overflow bucket must start at 10 + 5k minutes");
    }
    constexpr std::int64_t minute = 60'000;
    const auto ms = duration.count();
    if (ms >= overflow_minutes * minute) {
        return "[" + std::to_string(overflow_minutes) + ",inf)";
    }
    const int width = ms < kFineLimitMinutes * minute ? kFineWidth : kCoarseWidth;
    std::int64_t lower = 0;
    if (width == kFineWidth) {
        lower = ms / (kFineWidth * minute) * kFineWidth;
    } else {
        lower = kFineLimitMinutes + (ms - kFineLimitMinutes * minute) / (kCoarseWidth * minute) * kCoarseWidth;
    }
    return "[" + std::to_string(lower) + "," + std::to_string(lower + width) + ")";
}

int bucket_lower_minutes(std::string_view label) {
    if (label.size() < 4 || label.front() != '[') {
        throw std::invalid_argument("bad bucket label '" + std::string(label) + "'");
    }
    const auto comma = label.find(',');
    return std::stoi(std::string(label.substr(1, comma - 1)));
}

}  // namespace shadowfix::shadow
