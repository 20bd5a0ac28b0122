#include "difflab/sde.hpp"

#include "difflab/parallel.hpp"

#include <cmath>
#include <stdexcept>

namespace difflab::sde {

const char* outcome_name(Outcome o) {
    switch (o) {
        case Outcome::accept: return "accept";
        case Outcome::reject: return "reject";
        case Outcome::leaked: return "leaked";
        case Outcome::timeout: return "timeout";
    }
    return "?";
}

double default_step_size(double lip) { return 0.005 * std::min(1.0, 1.0 / std::max(lip, 1e-12)); }

double stability_bound(double lip) { return 0.5 / std::max(lip, 1e-12); }

groove::Vec euler_maruyama_step(const groove::Vec& x, int dim,
                                const std::function<groove::Vec(const groove::Vec&)>& drift,
                                double h, double noise_scale, Rng& rng) {
    const groove::Vec f = drift(x);
    groove::Vec out = x;
    const double sq = std::sqrt(h) * noise_scale;
    for (int d = 0; d < dim; ++d) {
        if (!std::isfinite(f[d])) throw std::runtime_error("non-finite drift in EM step");
        out[d] += f[d] * h + sq * rng.normal();
    }
    return out;
}

Trajectory simulate_pinball(const groove::Field& field, const SdeParams& params) {
    const int dim = field.dim();
    const double L = field.cell_size();
    const double speed = field.spec().speed;
    const double h = params.h > 0.0 ? params.h : 0.005;
    const double t_max = params.t_max > 0.0
                             ? params.t_max
                             : 50.0 * (field.total_arclength() + L) / speed;
    if (params.noise_scale < 0.0) throw std::invalid_argument("noise scale must be >= 0");

    const double halt_radius = field.corridor_radius() / 2.0;
    const double leak_radius = L / 2.0;
    const double sq = std::sqrt(h) * params.noise_scale;
    const int64_t max_steps = static_cast<int64_t>(std::ceil(t_max / h));

    Rng rng(params.seed);
    groove::Vec x = field.start_position();

    Trajectory traj;
    traj.cell_trace.push_back(field.cell_of(x));
    groove::Coord last_state = traj.cell_trace.back();

    traj.outcome = Outcome::timeout;
    int64_t step = 0;
    for (; step < max_steps; ++step) {
        const double t = step * h;
        if (params.record_stride > 0 && step % params.record_stride == 0)
            traj.states.emplace_back(t, x);

        const groove::Field::Probe pr = field.probe(x);
        traj.max_offset = std::max(traj.max_offset, pr.min_dist);
        if (pr.terminal_dist <= halt_radius) {
            traj.outcome = field.terminal_verdict() == cm::Verdict::accept ? Outcome::accept
                                                                           : Outcome::reject;
            traj.halt_time = t;
            break;
        }
        if (pr.min_dist > leak_radius) {
            traj.outcome = Outcome::leaked;
            traj.halt_time = t;
            break;
        }

        for (int d = 0; d < dim; ++d) {
            const double drift = 0.5 * x[d] + pr.force[d];
            if (!std::isfinite(drift))
                throw std::runtime_error("pinball integration failed: non-finite drift");
            x[d] += drift * h + sq * rng.normal();
        }

        const groove::Coord cell = field.cell_of(x);
        if (field.is_state_cell(cell) && cell != last_state) {
            traj.cell_trace.push_back(cell);
            last_state = cell;
        }
    }
    if (traj.outcome == Outcome::timeout) traj.halt_time = step * h;
    traj.steps = step;
    if (params.record_stride > 0) traj.states.emplace_back(traj.halt_time, x);
    return traj;
}

std::vector<Trajectory> simulate_trials(const groove::Field& field, const SdeParams& base,
                                        int trials, uint64_t master_seed, int threads) {
    if (trials < 1) throw std::invalid_argument("trial count must be >= 1");
    std::vector<Trajectory> out(trials);
    parallel_for(trials, threads, [&](int i) {
        SdeParams p = base;
        p.seed = derive_seed(master_seed, /*stream=*/0, static_cast<uint64_t>(i));
        out[i] = simulate_pinball(field, p);
    });
    return out;
}

TrialStats summarize(const std::vector<Trajectory>& trajectories) {
    TrialStats st;
    st.trials = static_cast<int>(trajectories.size());
    double halt_sum = 0.0;
    for (const Trajectory& t : trajectories) {
        switch (t.outcome) {
            case Outcome::accept: ++st.accept; break;
            case Outcome::reject: ++st.reject; break;
            case Outcome::leaked: ++st.leaked; break;
            case Outcome::timeout: ++st.timeout; break;
        }
        if (t.outcome == Outcome::accept || t.outcome == Outcome::reject)
            halt_sum += t.halt_time;
    }
    const int halted = st.accept + st.reject;
    st.success_rate = st.trials ? static_cast<double>(halted) / st.trials : 0.0;
    st.mean_halt_time = halted ? halt_sum / halted : 0.0;
    if (st.trials > 0) {
        // Wilson 95% interval
        const double z = 1.959963984540054;
        const double n = st.trials;
        const double p = st.success_rate;
        const double denom = 1.0 + z * z / n;
        const double center = (p + z * z / (2.0 * n)) / denom;
        const double half = z * std::sqrt(p * (1.0 - p) / n + z * z / (4.0 * n * n)) / denom;
        st.ci_lo = std::max(0.0, center - half);
        st.ci_hi = std::min(1.0, center + half);
    }
    return st;
}

std::vector<LeakagePoint> leakage_study(const cm::Program& program, const std::string& input,
                                        const std::vector<double>& cell_sizes,
                                        const groove::GrooveOptions& base_opts,
                                        const SdeParams& base_params, int trials,
                                        uint64_t master_seed, int threads) {
    if (trials < 30) throw std::invalid_argument("leakage study needs at least 30 trials");
    if (cell_sizes.empty()) throw std::invalid_argument("leakage study needs cell sizes");
    std::vector<LeakagePoint> out;
    for (double L : cell_sizes) {
        groove::GrooveOptions opts = base_opts;
        opts.cell_size = L;
        groove::Field field(groove::compile(program, input, opts));
        // same master seed for every L: trial i sees the same noise stream
        auto trajs = simulate_trials(field, base_params, trials, master_seed, threads);
        out.push_back(LeakagePoint{L, summarize(trajs)});
    }
    return out;
}

} // namespace difflab::sde
