#include "difflab/experiment.hpp"

#include "difflab/circuit.hpp"
#include "difflab/counter_machine.hpp"
#include "difflab/diffusion.hpp"
#include "difflab/field.hpp"
#include "difflab/groove.hpp"
#include "difflab/sde.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace difflab::experiment {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kSchemaVersion = 1;

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string timestamp_utc() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t tt = std::chrono::system_clock::to_time_t(now);
    char buf[32];
    std::tm tm{};
    gmtime_r(&tt, &tm);
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

class CsvWriter {
public:
    CsvWriter(const fs::path& path, const std::vector<std::string>& columns) {
        out_.open(path);
        if (!out_) throw RunError("cannot write " + path.string());
        for (size_t i = 0; i < columns.size(); ++i) {
            if (i) out_ << ",";
            out_ << columns[i];
        }
        out_ << "\n";
        cols_ = columns.size();
    }
    void row(const std::vector<std::string>& cells) {
        if (cells.size() != cols_) throw RunError("csv row width mismatch");
        for (size_t i = 0; i < cells.size(); ++i) {
            if (i) out_ << ",";
            out_ << cells[i];
        }
        out_ << "\n";
    }

private:
    std::ofstream out_;
    size_t cols_ = 0;
};

struct Ctx {
    json config;        // resolved (defaults + overrides applied)
    json params;        // the kind-specific block, resolved
    fs::path config_dir;
    fs::path out_dir;
    uint64_t seed = 0;
    int threads = 1;
    bool dry_run = false;
    bool quiet = false;
    std::optional<int> trials_override;

    void say(const std::string& line) const {
        if (!quiet) std::cout << line << "\n";
    }

    fs::path resolve_input(const std::string& rel) const {
        fs::path p(rel);
        if (p.is_absolute()) return p;
        return config_dir / p;
    }

    void finish(const std::string& kind, const json& results, bool assertions_passed) const {
        fs::create_directories(out_dir);
        json summary;
        summary["schema_version"] = kSchemaVersion;
        summary["kind"] = kind;
        summary["timestamp"] = timestamp_utc();
        json resolved = config;
        resolved["params"] = params; // runners fill in applied defaults
        summary["config"] = resolved;
        summary["results"] = results;
        summary["assertions_passed"] = assertions_passed;
        std::ofstream f(out_dir / "summary.json");
        if (!f) throw RunError("cannot write summary.json");
        f << summary.dump(2) << "\n";
    }
};

template <typename T>
T get_or(const json& j, const std::string& key, T def) {
    if (!j.contains(key)) return def;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError("bad value for '" + key + "': " + e.what());
    }
}

template <typename T>
T require(const json& j, const std::string& key) {
    if (!j.contains(key)) throw ConfigError("missing required parameter '" + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError("bad value for '" + key + "': " + e.what());
    }
}

void check(bool cond, const std::string& msg) {
    if (!cond) throw ConfigError(msg);
}

cm::Program load_program_checked(Ctx& ctx, const std::string& key) {
    const std::string rel = require<std::string>(ctx.params, key);
    const fs::path path = ctx.resolve_input(rel);
    check(fs::exists(path), "program file does not exist: " + path.string());
    try {
        return cm::load_program_file(path.string());
    } catch (const cm::ParseError& e) {
        throw ConfigError(std::string("program parse error: ") + e.what());
    }
}

groove::GrooveOptions groove_options_from(Ctx& ctx, double cell_size) {
    groove::GrooveOptions opts;
    opts.cell_size = cell_size;
    opts.corridor_ratio = get_or(ctx.params, "corridor_ratio", opts.corridor_ratio);
    opts.smoothing_ratio = get_or(ctx.params, "smoothing_ratio", opts.smoothing_ratio);
    opts.kappa = get_or(ctx.params, "kappa", opts.kappa);
    opts.speed = get_or(ctx.params, "speed", opts.speed);
    opts.step_limit = get_or(ctx.params, "step_limit", opts.step_limit);
    check(opts.cell_size > 0, "cell size must be positive");
    check(opts.corridor_ratio > 0 && opts.corridor_ratio < 0.5,
          "corridor_ratio must be in (0, 0.5)");
    check(opts.smoothing_ratio > 0 && opts.smoothing_ratio <= opts.corridor_ratio,
          "smoothing_ratio must be in (0, corridor_ratio]");
    check(opts.kappa > 0 && opts.speed > 0, "kappa and speed must be positive");
    // write resolved values back for provenance
    ctx.params["corridor_ratio"] = opts.corridor_ratio;
    ctx.params["smoothing_ratio"] = opts.smoothing_ratio;
    ctx.params["kappa"] = opts.kappa;
    ctx.params["speed"] = opts.speed;
    ctx.params["step_limit"] = opts.step_limit;
    return opts;
}

diffusion::NoiseSchedule schedule_from(Ctx& ctx) {
    json sj = ctx.params.contains("schedule") ? ctx.params["schedule"] : json::object();
    const std::string family = get_or<std::string>(sj, "family", "constant");
    diffusion::NoiseSchedule sched;
    try {
        if (family == "constant") {
            sched = diffusion::NoiseSchedule::constant(get_or(sj, "beta", 1.0));
        } else if (family == "linear") {
            sched = diffusion::NoiseSchedule::linear(get_or(sj, "beta0", 0.1),
                                                     get_or(sj, "beta1", 20.0));
        } else {
            throw ConfigError("unknown schedule family: " + family);
        }
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    ctx.params["schedule"] = {{"family", family},
                              {"beta", sched.beta0},
                              {"beta0", sched.beta0},
                              {"beta1", sched.beta1}};
    return sched;
}

diffusion::MixtureFile mixture_from(Ctx& ctx) {
    const std::string name = get_or<std::string>(ctx.params, "mixture", "grid6");
    ctx.params["mixture"] = name;
    if (name == "grid6") return diffusion::grid6_fixture();
    const fs::path path = ctx.resolve_input(name);
    check(fs::exists(path), "mixture file does not exist: " + path.string());
    try {
        return diffusion::load_mixture_file(path.string());
    } catch (const std::exception& e) {
        throw ConfigError(std::string("bad mixture file: ") + e.what());
    }
}

diffusion::PrefixTask task_from(Ctx& ctx) {
    diffusion::PrefixTask task;
    task.modulus = get_or(ctx.params, "modulus", task.modulus);
    task.correct_weight = get_or(ctx.params, "correct_weight", task.correct_weight);
    task.component_var = get_or(ctx.params, "component_var", task.component_var);
    task.centroid_radius = get_or(ctx.params, "centroid_radius", task.centroid_radius);
    task.max_len = get_or(ctx.params, "max_len", task.max_len);
    try {
        task.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    ctx.params["modulus"] = task.modulus;
    ctx.params["correct_weight"] = task.correct_weight;
    ctx.params["component_var"] = task.component_var;
    ctx.params["centroid_radius"] = task.centroid_radius;
    ctx.params["max_len"] = task.max_len;
    return task;
}

// ---------------------------------------------------------------- cm-run --

int run_cm(Ctx& ctx) {
    cm::Program prog = load_program_checked(ctx, "program");
    const std::string input = get_or<std::string>(ctx.params, "input", "");
    const int64_t step_limit = get_or<int64_t>(ctx.params, "step_limit", 1000000);
    const bool record_trace = get_or(ctx.params, "record_trace", true);
    check(step_limit >= 0, "step_limit must be >= 0");
    for (char c : input)
        check(prog.alphabet.find(c) != std::string::npos,
              std::string("input symbol '") + c + "' not in program alphabet");
    ctx.params["input"] = input;
    ctx.params["step_limit"] = step_limit;
    ctx.params["record_trace"] = record_trace;

    if (ctx.dry_run) {
        ctx.say("cm-run: program with " + std::to_string(prog.size()) + " instructions, k=" +
                std::to_string(prog.register_count) + ", input '" + input + "', step limit " +
                std::to_string(step_limit));
        return 0;
    }

    cm::ExecResult res = cm::run(prog, input, step_limit, record_trace);
    fs::create_directories(ctx.out_dir);
    if (record_trace) {
        std::vector<std::string> cols = {"step", "pc", "head"};
        for (int i = 1; i <= prog.register_count; ++i) cols.push_back("r" + std::to_string(i));
        CsvWriter csv(ctx.out_dir / "trace.csv", cols);
        for (size_t i = 0; i < res.trace.size(); ++i) {
            const cm::MachineState& s = res.trace[i];
            std::vector<std::string> row = {std::to_string(i), std::to_string(s.pc),
                                            std::to_string(s.head_pos)};
            for (int64_t r : s.registers) row.push_back(std::to_string(r));
            csv.row(row);
        }
    }
    json results;
    results["verdict"] = cm::verdict_name(res.verdict);
    results["steps"] = res.steps;
    const bool ok = res.verdict != cm::Verdict::step_limit;
    ctx.finish("cm-run", results, ok);
    ctx.say(std::string("cm-run: ") + cm::verdict_name(res.verdict) + " after " +
            std::to_string(res.steps) + " steps");
    return ok ? 0 : 1;
}

// --------------------------------------------------------------- pinball --

int run_pinball(Ctx& ctx) {
    cm::Program prog = load_program_checked(ctx, "program");
    const std::string input = get_or<std::string>(ctx.params, "input", "");
    const double L = get_or(ctx.params, "L", 6.0);
    int trials = get_or(ctx.params, "trials", 100);
    if (ctx.trials_override) trials = *ctx.trials_override;
    check(trials >= 1, "trials must be >= 1");
    groove::GrooveOptions opts = groove_options_from(ctx, L);

    sde::SdeParams params;
    params.h = get_or(ctx.params, "h", 0.0);
    params.t_max = get_or(ctx.params, "t_max", 0.0);
    params.noise_scale = get_or(ctx.params, "noise_scale", 1.0);
    params.record_stride = get_or(ctx.params, "record_stride", 0);
    check(params.noise_scale >= 0, "noise_scale must be >= 0");
    check(params.record_stride >= 0, "record_stride must be >= 0");
    const bool check_trace = get_or(ctx.params, "check_trace", true);
    const double min_success = get_or(ctx.params, "min_success_rate", 0.0);

    cm::ExecResult oracle;
    try {
        oracle = cm::run(prog, input, opts.step_limit, true);
    } catch (const cm::StepError& e) {
        throw ConfigError(std::string("interpreter failed on this input: ") + e.what());
    }
    check(oracle.verdict != cm::Verdict::step_limit,
          "program does not halt on this input within the step limit");

    groove::Field field(groove::compile(prog, input, opts));
    const double lip = field.lipschitz_estimate(2000, derive_seed(ctx.seed, 7, 0));
    if (params.h <= 0.0) params.h = sde::default_step_size(lip);
    if (params.t_max <= 0.0)
        params.t_max = 50.0 * prog.size() * static_cast<double>(oracle.steps + 1) * L /
                       field.spec().speed;
    if (params.h > sde::stability_bound(lip))
        std::cerr << "warning: step size " << params.h << " exceeds the stability bound "
                  << sde::stability_bound(lip) << " (0.5 / Lipschitz estimate)\n";

    ctx.params["L"] = L;
    ctx.params["trials"] = trials;
    ctx.params["h"] = params.h;
    ctx.params["t_max"] = params.t_max;
    ctx.params["noise_scale"] = params.noise_scale;
    ctx.params["record_stride"] = params.record_stride;
    ctx.params["input"] = input;

    if (ctx.dry_run) {
        ctx.say("pinball: L=" + fmt(L) + " h=" + fmt(params.h) + " t_max=" + fmt(params.t_max) +
                " lipschitz=" + fmt(lip) + " trials=" + std::to_string(trials) +
                " oracle_verdict=" + cm::verdict_name(oracle.verdict) + " oracle_steps=" +
                std::to_string(oracle.steps) + " groove_features=" +
                std::to_string(field.feature_count()));
        return 0;
    }

    // interpreter trace mapped through the state -> cell embedding
    std::vector<groove::Coord> oracle_cells;
    for (const cm::MachineState& s : oracle.trace)
        oracle_cells.push_back(groove::state_to_cell(s, prog.register_count));

    auto trajs = sde::simulate_trials(field, params, trials, ctx.seed, ctx.threads);
    sde::TrialStats stats = sde::summarize(trajs);

    int wrong_verdicts = 0;
    int trace_mismatches = 0;
    fs::create_directories(ctx.out_dir);
    CsvWriter csv(ctx.out_dir / "trials.csv",
                  {"trial", "seed", "outcome", "halt_time", "steps", "max_offset",
                   "verdict_match", "trace_match"});
    for (int i = 0; i < trials; ++i) {
        const sde::Trajectory& t = trajs[i];
        const bool halted =
            t.outcome == sde::Outcome::accept || t.outcome == sde::Outcome::reject;
        bool verdict_match = true;
        bool trace_match = true;
        if (halted) {
            verdict_match = (t.outcome == sde::Outcome::accept) ==
                            (oracle.verdict == cm::Verdict::accept);
            if (!verdict_match) ++wrong_verdicts;
            if (check_trace) {
                trace_match = t.cell_trace == oracle_cells;
                if (!trace_match) ++trace_mismatches;
            }
        }
        csv.row({std::to_string(i), std::to_string(derive_seed(ctx.seed, 0, i)),
                 sde::outcome_name(t.outcome), fmt(t.halt_time), std::to_string(t.steps),
                 fmt(t.max_offset), verdict_match ? "1" : "0", trace_match ? "1" : "0"});
    }
    if (params.record_stride > 0 && !trajs.empty()) {
        std::vector<std::string> cols = {"t"};
        for (int d = 0; d < field.dim(); ++d) cols.push_back("x" + std::to_string(d));
        CsvWriter states(ctx.out_dir / "states_trial0.csv", cols);
        for (const auto& [t, x] : trajs[0].states) {
            std::vector<std::string> row = {fmt(t)};
            for (int d = 0; d < field.dim(); ++d) row.push_back(fmt(x[d]));
            states.row(row);
        }
    }

    json results;
    results["oracle_verdict"] = cm::verdict_name(oracle.verdict);
    results["oracle_steps"] = oracle.steps;
    results["lipschitz_estimate"] = lip;
    results["accept"] = stats.accept;
    results["reject"] = stats.reject;
    results["leaked"] = stats.leaked;
    results["timeout"] = stats.timeout;
    results["success_rate"] = stats.success_rate;
    results["ci_lo"] = stats.ci_lo;
    results["ci_hi"] = stats.ci_hi;
    results["mean_halt_time"] = stats.mean_halt_time;
    results["wrong_verdicts"] = wrong_verdicts;
    results["trace_mismatches"] = trace_mismatches;

    const bool ok = wrong_verdicts == 0 && trace_mismatches == 0 &&
                    stats.success_rate >= min_success;
    ctx.finish("pinball", results, ok);
    ctx.say("pinball: " + std::to_string(stats.accept) + " accept / " +
            std::to_string(stats.reject) + " reject / " + std::to_string(stats.leaked) +
            " leaked / " + std::to_string(stats.timeout) + " timeout; success rate " +
            fmt(stats.success_rate) + (wrong_verdicts ? " [WRONG VERDICTS]" : ""));
    return ok ? 0 : 1;
}

// --------------------------------------------------------------- leakage --

int run_leakage(Ctx& ctx) {
    cm::Program prog = load_program_checked(ctx, "program");
    const std::string input = get_or<std::string>(ctx.params, "input", "");
    const std::vector<double> Ls = require<std::vector<double>>(ctx.params, "L_list");
    check(!Ls.empty(), "L_list must not be empty");
    for (size_t i = 1; i < Ls.size(); ++i)
        check(Ls[i] > Ls[i - 1], "L_list must be strictly increasing");
    int trials = get_or(ctx.params, "trials", 100);
    if (ctx.trials_override) trials = *ctx.trials_override;
    check(trials >= 30, "leakage study needs trials >= 30");
    groove::GrooveOptions opts = groove_options_from(ctx, Ls.front());

    sde::SdeParams params;
    params.h = get_or(ctx.params, "h", 0.005);
    params.t_max = get_or(ctx.params, "t_max", 0.0);
    check(params.h > 0, "h must be positive");
    ctx.params["h"] = params.h;
    ctx.params["trials"] = trials;
    ctx.params["input"] = input;

    if (ctx.dry_run) {
        std::string plan = "leakage: " + std::to_string(Ls.size()) + " planned runs:";
        for (double L : Ls)
            plan += " L=" + fmt(L) + " (" + std::to_string(trials) + " trials)";
        ctx.say(plan);
        return 0;
    }

    auto points = sde::leakage_study(prog, input, Ls, opts, params, trials, ctx.seed,
                                     ctx.threads);
    fs::create_directories(ctx.out_dir);
    CsvWriter csv(ctx.out_dir / "leakage.csv",
                  {"L", "trials", "accept", "reject", "leaked", "timeout", "success_rate",
                   "ci_lo", "ci_hi", "mean_halt_time"});
    bool monotone = true;
    for (size_t i = 0; i < points.size(); ++i) {
        const sde::TrialStats& st = points[i].stats;
        csv.row({fmt(points[i].cell_size), std::to_string(st.trials),
                 std::to_string(st.accept), std::to_string(st.reject),
                 std::to_string(st.leaked), std::to_string(st.timeout), fmt(st.success_rate),
                 fmt(st.ci_lo), fmt(st.ci_hi), fmt(st.mean_halt_time)});
        if (i > 0 && st.ci_hi < points[i - 1].stats.ci_lo) monotone = false;
    }

    json results = json::array();
    for (const auto& pt : points)
        results.push_back({{"L", pt.cell_size},
                           {"success_rate", pt.stats.success_rate},
                           {"ci_lo", pt.stats.ci_lo},
                           {"ci_hi", pt.stats.ci_hi},
                           {"leaked", pt.stats.leaked}});
    json rj;
    rj["points"] = results;
    rj["monotone_within_ci"] = monotone;
    ctx.finish("leakage", rj, monotone);
    std::string line = "leakage:";
    for (const auto& pt : points)
        line += " L=" + fmt(pt.cell_size) + ":" + fmt(pt.stats.success_rate);
    ctx.say(line + (monotone ? "" : " [NOT MONOTONE]"));
    return monotone ? 0 : 1;
}

// -------------------------------------------------------------- converge --

int run_converge(Ctx& ctx) {
    diffusion::MixtureFile mf = mixture_from(ctx);
    diffusion::NoiseSchedule sched = schedule_from(ctx);
    const std::vector<int> steps = require<std::vector<int>>(ctx.params, "step_counts");
    check(!steps.empty(), "step_counts must not be empty");
    for (int s : steps) check(s >= 1, "step counts must be >= 1");
    int trials = get_or(ctx.params, "trials", 4000);
    if (ctx.trials_override) trials = *ctx.trials_override;
    check(trials >= 1, "trials must be >= 1");
    double T = get_or(ctx.params, "T", 0.0);
    if (T <= 0.0) T = sched.default_horizon();
    ctx.params["T"] = T;
    ctx.params["trials"] = trials;

    if (ctx.dry_run) {
        ctx.say("converge: " + std::to_string(steps.size()) + " step counts, " +
                std::to_string(trials) + " trials each, T=" + fmt(T) + ", " +
                std::to_string(mf.mixture.components.size()) + " components, " +
                std::to_string(mf.quantizer.size()) + " tokens");
        return 0;
    }

    auto curve = diffusion::convergence_curve(mf.mixture, sched, mf.quantizer, steps, trials,
                                              ctx.seed, T, ctx.threads);
    fs::create_directories(ctx.out_dir);
    CsvWriter csv(ctx.out_dir / "converge.csv", {"step_count", "tv", "se", "ci_lo", "ci_hi"});
    bool monotone = true;
    for (size_t i = 0; i < curve.size(); ++i) {
        const auto& pt = curve[i];
        csv.row({std::to_string(pt.steps), fmt(pt.tv), fmt(pt.se),
                 fmt(std::max(0.0, pt.tv - 1.96 * pt.se)), fmt(pt.tv + 1.96 * pt.se)});
        if (i > 0 && pt.tv > curve[i - 1].tv + 1.96 * (pt.se + curve[i - 1].se))
            monotone = false;
    }
    json results = json::array();
    for (const auto& pt : curve)
        results.push_back({{"steps", pt.steps}, {"tv", pt.tv}, {"se", pt.se}});
    json rj;
    rj["curve"] = results;
    rj["monotone_within_ci"] = monotone;
    ctx.finish("converge", rj, monotone);
    std::string line = "converge:";
    for (const auto& pt : curve) line += " " + std::to_string(pt.steps) + ":" + fmt(pt.tv);
    ctx.say(line + (monotone ? "" : " [NOT MONOTONE]"));
    return monotone ? 0 : 1;
}

// ---------------------------------------------------------------- prefix --

std::string prefix_str(const std::vector<int>& prefix) {
    std::string s;
    for (size_t i = 0; i < prefix.size(); ++i) {
        if (i) s += " ";
        s += std::to_string(prefix[i] + 1); // print residues
    }
    return s.empty() ? "-" : s;
}

int run_prefix(Ctx& ctx) {
    diffusion::PrefixTask task = task_from(ctx);
    diffusion::NoiseSchedule sched = schedule_from(ctx);
    const int steps = get_or(ctx.params, "steps", 64);
    int samples = get_or(ctx.params, "samples", 2000);
    if (ctx.trials_override) samples = *ctx.trials_override;
    check(steps >= 1, "steps must be >= 1");
    check(samples >= 1, "samples must be >= 1");
    ctx.params["steps"] = steps;
    ctx.params["samples"] = samples;

    const size_t n_prefixes = task.evaluation_prefixes().size();
    if (ctx.dry_run) {
        ctx.say("prefix: mod-" + std::to_string(task.modulus) + " word task, " +
                std::to_string(n_prefixes) + " prefixes, " + std::to_string(samples) +
                " samples each, margin " + fmt(task.margin()));
        return 0;
    }

    auto results = diffusion::prefix_eval(task, sched, steps, samples, ctx.seed, ctx.threads);
    fs::create_directories(ctx.out_dir);
    CsvWriter csv(ctx.out_dir / "prefix.csv",
                  {"prefix", "correct_token", "freq_correct", "best_other", "margin", "pass"});
    int failures = 0;
    double worst_margin = 1.0;
    for (const auto& r : results) {
        const double best_other = r.freqs[r.correct_token] - r.margin;
        csv.row({prefix_str(r.prefix), std::to_string(r.correct_token),
                 fmt(r.freqs[r.correct_token]), fmt(best_other), fmt(r.margin),
                 r.pass ? "1" : "0"});
        if (!r.pass) ++failures;
        worst_margin = std::min(worst_margin, r.margin);
    }
    json rj;
    rj["prefixes"] = results.size();
    rj["failures"] = failures;
    rj["worst_margin"] = worst_margin;
    rj["analytic_margin"] = task.margin();
    const bool ok = failures == 0;
    ctx.finish("prefix", rj, ok);
    ctx.say("prefix: " + std::to_string(results.size()) + " prefixes, worst margin " +
            fmt(worst_margin) + ", " + std::to_string(failures) + " failures");
    return ok ? 0 : 1;
}

// ----------------------------------------------------------- derandomize --

int run_derandomize(Ctx& ctx) {
    diffusion::PrefixTask task = task_from(ctx);
    diffusion::NoiseSchedule sched = schedule_from(ctx);
    const int steps = get_or(ctx.params, "steps", 64);
    const int m = get_or(ctx.params, "m", 201);
    const int attempts = get_or(ctx.params, "attempts", 10);
    check(steps >= 1, "steps must be >= 1");
    check(m >= 1 && m % 2 == 1, "m must be an odd positive integer");
    check(attempts >= 1, "attempts must be >= 1");
    ctx.params["steps"] = steps;
    ctx.params["m"] = m;
    ctx.params["attempts"] = attempts;
    const bool has_fixed = ctx.params.contains("advice_seed");
    const uint64_t fixed_seed = get_or<uint64_t>(ctx.params, "advice_seed", 0);

    if (ctx.dry_run) {
        ctx.say("derandomize: m=" + std::to_string(m) + ", up to " + std::to_string(attempts) +
                " attempts over " + std::to_string(task.evaluation_prefixes().size()) +
                " prefixes" + (has_fixed ? " (verifying fixed advice seed)" : ""));
        return 0;
    }

    diffusion::AdviceSearch search;
    if (has_fixed) {
        search.found = diffusion::verify_advice(task, sched, steps, m, fixed_seed, ctx.threads);
        search.seed = fixed_seed;
        search.attempts_used = 0;
    } else {
        search = diffusion::find_advice_seed(task, sched, steps, m, attempts, ctx.seed,
                                             ctx.threads);
    }

    fs::create_directories(ctx.out_dir);
    const auto prefixes = task.evaluation_prefixes();
    CsvWriter csv(ctx.out_dir / "derandomize.csv",
                  {"prefix", "token", "correct_token", "match"});
    if (search.found || has_fixed) {
        auto tokens = diffusion::majority_tokens(task, sched, steps, m, search.seed,
                                                 ctx.threads);
        for (size_t i = 0; i < prefixes.size(); ++i) {
            const int correct = task.correct_token(prefixes[i]);
            csv.row({prefix_str(prefixes[i]), std::to_string(tokens[i]),
                     std::to_string(correct), tokens[i] == correct ? "1" : "0"});
        }
    }
    json rj;
    rj["found"] = search.found;
    rj["advice_seed"] = search.seed;
    rj["attempts_used"] = search.attempts_used;
    if (search.found && ctx.params.contains("advice_out")) {
        json advice;
        advice["schema_version"] = kSchemaVersion;
        advice["task"] = "mod" + std::to_string(task.modulus) + "-word";
        advice["m"] = m;
        advice["steps"] = steps;
        advice["max_len"] = task.max_len;
        advice["seed"] = search.seed;
        const fs::path out = ctx.out_dir / get_or<std::string>(ctx.params, "advice_out",
                                                               "advice.json");
        std::ofstream f(out);
        if (!f) throw RunError("cannot write advice file");
        f << advice.dump(2) << "\n";
    }
    ctx.finish("derandomize", rj, search.found);
    ctx.say(search.found
                ? "derandomize: advice seed " + std::to_string(search.seed) + " verified (" +
                      std::to_string(search.attempts_used) + " attempts)"
                : "derandomize: no advice seed found");
    return search.found ? 0 : 1;
}

// --------------------------------------------------------------- circuit --

int run_circuit(Ctx& ctx) {
    circuit::Circuit c;
    if (ctx.params.contains("circuit_file")) {
        const fs::path path = ctx.resolve_input(require<std::string>(ctx.params, "circuit_file"));
        check(fs::exists(path), "circuit file does not exist: " + path.string());
        try {
            c = circuit::load_circuit(path.string());
        } catch (const std::exception& e) {
            throw ConfigError(std::string("bad circuit file: ") + e.what());
        }
    } else if (ctx.params.contains("constructor")) {
        const json cj = ctx.params["constructor"];
        const std::string kind = require<std::string>(cj, "kind");
        try {
            if (kind == "k_equals")
                c = circuit::k_equals(require<int>(cj, "n"), require<int>(cj, "k"));
            else if (kind == "is_in") {
                auto mem = require<std::vector<int>>(cj, "members");
                c = circuit::is_in(require<int>(cj, "n"), {mem.begin(), mem.end()});
            } else if (kind == "and")
                c = circuit::and_gate(require<int>(cj, "n"));
            else if (kind == "or")
                c = circuit::or_gate(require<int>(cj, "n"));
            else if (kind == "not")
                c = circuit::not_gate();
            else
                throw ConfigError("unknown circuit constructor: " + kind);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
        }
    } else {
        throw ConfigError("circuit experiment needs 'circuit_file' or 'constructor'");
    }

    const std::string bits = require<std::string>(ctx.params, "input");
    std::vector<int> input;
    for (char ch : bits) {
        check(ch == '0' || ch == '1', "circuit input must be a 0/1 string");
        input.push_back(ch - '0');
    }
    check(static_cast<int>(input.size()) == c.input_arity,
          "circuit input length " + std::to_string(input.size()) + " does not match arity " +
              std::to_string(c.input_arity));
    const bool has_expect = ctx.params.contains("expect");
    const int expect = get_or(ctx.params, "expect", 0);

    if (ctx.dry_run) {
        ctx.say("circuit: arity " + std::to_string(c.input_arity) + ", depth " +
                std::to_string(c.declared_depth()) + ", width " +
                std::to_string(c.declared_width()));
        return 0;
    }

    const int out = c.eval(input);
    fs::create_directories(ctx.out_dir);
    circuit::save_circuit(c, (ctx.out_dir / "circuit.json").string());
    json rj;
    rj["output"] = out;
    rj["depth"] = c.declared_depth();
    rj["width"] = c.declared_width();
    rj["audit_depth"] = c.audit_depth();
    rj["audit_width"] = c.audit_width();
    const bool ok = !has_expect || out == expect;
    ctx.finish("circuit", rj, ok);
    ctx.say("circuit: output " + std::to_string(out) + " (depth " +
            std::to_string(c.audit_depth()) + ", width " + std::to_string(c.audit_width()) +
            ")");
    return ok ? 0 : 1;
}

} // namespace

int run_experiment_file(const std::string& config_path, const std::string& expected_kind,
                        const CliOverrides& overrides) {
    std::ifstream f(config_path);
    if (!f) throw ConfigError("cannot open config file: " + config_path);
    json config;
    try {
        f >> config;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }

    const std::string kind = require<std::string>(config, "kind");
    static const std::vector<std::string> kinds = {"cm-run",   "pinball", "leakage", "converge",
                                                   "prefix",   "derandomize", "circuit"};
    if (std::find(kinds.begin(), kinds.end(), kind) == kinds.end())
        throw ConfigError("unknown experiment kind: '" + kind + "'");
    if (!expected_kind.empty() && kind != expected_kind)
        throw ConfigError("config kind '" + kind + "' does not match subcommand '" +
                          expected_kind + "'");

    Ctx ctx;
    ctx.config_dir = fs::path(config_path).parent_path();
    ctx.seed = get_or<uint64_t>(config, "seed", 0);
    if (overrides.seed) ctx.seed = *overrides.seed;
    std::string out = get_or<std::string>(config, "out", "out/" + kind);
    if (overrides.out_dir) out = *overrides.out_dir;
    ctx.out_dir = out;
    ctx.threads = get_or(config, "threads", 1);
    check(ctx.threads >= 1, "threads must be >= 1");
    ctx.dry_run = overrides.dry_run;
    ctx.quiet = overrides.quiet;
    ctx.trials_override = overrides.trials;
    ctx.params = config.contains("params") ? config["params"] : json::object();

    config["seed"] = ctx.seed;
    config["out"] = out;
    config["threads"] = ctx.threads;
    ctx.config = config;

    int status = 0;
    if (kind == "cm-run") status = run_cm(ctx);
    else if (kind == "pinball") status = run_pinball(ctx);
    else if (kind == "leakage") status = run_leakage(ctx);
    else if (kind == "converge") status = run_converge(ctx);
    else if (kind == "prefix") status = run_prefix(ctx);
    else if (kind == "derandomize") status = run_derandomize(ctx);
    else if (kind == "circuit") status = run_circuit(ctx);
    return status;
}

} // namespace difflab::experiment
