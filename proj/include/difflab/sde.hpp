#pragma once

#include "difflab/field.hpp"
#include "difflab/rng.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

// Euler-Maruyama integration of the pinball SDE dx = x/2 dt + f(x) dt + dW
// (the x/2 term is cancelled by the -x/2 part inside f) plus generic
// drift-diffusion stepping for calibration runs. Trials are independent
// given per-trial seeds derived from a master seed, so they can be fanned
// out across threads and merged order-independently.

namespace difflab::sde {

struct SdeParams {
    double h = 0.0;           // step size; <= 0 picks the conservative default
    double t_max = 0.0;       // simulated-time budget; <= 0 picks the default
    double noise_scale = 1.0; // multiplies dW; stress-test knob only
    uint64_t seed = 0;
    int record_stride = 0;    // every n-th state lands in Trajectory::states
};

enum class Outcome { accept, reject, leaked, timeout };

const char* outcome_name(Outcome o);

struct Trajectory {
    Outcome outcome = Outcome::timeout;
    int64_t steps = 0;
    double halt_time = 0.0;  // simulated time when the run ended
    double max_offset = 0.0; // largest observed distance to the centerline
    // Machine-state cells visited (lane coordinate 0), consecutive
    // duplicates collapsed; comparable against the interpreter trace.
    std::vector<groove::Coord> cell_trace;
    std::vector<std::pair<double, groove::Vec>> states;
};

struct TrialStats {
    int trials = 0;
    int accept = 0;
    int reject = 0;
    int leaked = 0;
    int timeout = 0;
    double success_rate = 0.0; // halted (accept or reject) fraction
    double ci_lo = 0.0;        // Wilson 95% interval for the success rate
    double ci_hi = 0.0;
    double mean_halt_time = 0.0; // over halted trials
};

// Default step size 0.005 * min(1, 1/lipschitz) and the documented explicit
// stability bound h <= 0.5 / lipschitz.
double default_step_size(double lipschitz_estimate);
double stability_bound(double lipschitz_estimate);

// x' = x + drift(x) h + sqrt(h) * noise_scale * xi,  xi ~ N(0, I_dim).
groove::Vec euler_maruyama_step(const groove::Vec& x, int dim,
                                const std::function<groove::Vec(const groove::Vec&)>& drift,
                                double h, double noise_scale, Rng& rng);

// Integrates from the START cell center until the ball enters the terminal
// core (distance <= r/2), leaks (distance to every corridor > L/2) or the
// time budget runs out. Throws on non-finite states.
Trajectory simulate_pinball(const groove::Field& field, const SdeParams& params);

std::vector<Trajectory> simulate_trials(const groove::Field& field, const SdeParams& base,
                                        int trials, uint64_t master_seed, int threads = 1);

TrialStats summarize(const std::vector<Trajectory>& trajectories);

struct LeakagePoint {
    double cell_size = 0.0;
    TrialStats stats;
};

// Re-compiles the program per cell size and runs `trials` pinball trials at
// each; per-trial seeds are matched across cell sizes.
std::vector<LeakagePoint> leakage_study(const cm::Program& program, const std::string& input,
                                        const std::vector<double>& cell_sizes,
                                        const groove::GrooveOptions& base_opts,
                                        const SdeParams& base_params, int trials,
                                        uint64_t master_seed, int threads = 1);

} // namespace difflab::sde
