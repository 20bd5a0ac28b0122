#pragma once

#include "difflab/kernels.hpp"
#include "difflab/rng.hpp"

#include <cstdint>
#include <string>
#include <vector>

// The exact-score half of the lab: variance-preserving forward process
// dx = -1/2 beta(t) x dt + sqrt(beta(t)) dW over Gaussian mixtures, whose
// marginals and scores are closed-form; reverse-SDE sampling with the exact
// score; Voronoi quantization to tokens; total-variation estimation;
// convergence curves over step counts; the mod-p word-problem prefix task;
// and majority-vote derandomization with a recorded advice seed.

namespace difflab::diffusion {

// Score evaluation floor: point-mass components make the score blow up at
// t = 0, so the reverse integration stops here and the output is taken as-is.
constexpr double kTimeFloor = 1e-3;

struct NoiseSchedule {
    enum class Family { constant, linear };
    Family family = Family::constant;
    double beta0 = 1.0;
    double beta1 = 1.0;

    static NoiseSchedule constant(double beta = 1.0);
    // beta(t) = beta0 + (beta1 - beta0) t, i.e. the DDPM-style ramp over a
    // unit reverse horizon.
    static NoiseSchedule linear(double beta0 = 0.1, double beta1 = 20.0);

    double beta(double t) const;
    double integral(double t) const; // B(t), strictly increasing, unbounded
    double alpha(double t) const;    // exp(-B(t)/2)
    // Horizon at which alpha(T)^2 < 1e-2: 5 for the constant schedule,
    // 1 for the linear one.
    double default_horizon() const;
};

struct GaussianComponent {
    double weight = 1.0;
    std::vector<double> mean;
    double var = 0.0; // isotropic
};

struct GaussianMixture {
    int dim = 0;
    std::vector<GaussianComponent> components;

    void validate() const;
    // sum_i w_i (|mu_i| + sqrt(d var_i)) >= E|x_0|
    double first_moment_upper_bound() const;
    static GaussianMixture standard_normal(int dim);
};

GaussianMixture forward_marginal(const GaussianMixture& mix, const NoiseSchedule& sched,
                                 double t);

// Score / log-density of a mixture with all-positive variances.
std::vector<double> mixture_score(const GaussianMixture& mix, const std::vector<double>& x);
double mixture_log_density(const GaussianMixture& mix, const std::vector<double>& x);

// grad_x ln rho_t(x); throws if the marginal at t is degenerate.
std::vector<double> exact_score(const GaussianMixture& mix, const NoiseSchedule& sched,
                                const std::vector<double>& x, double t);
double log_marginal_density(const GaussianMixture& mix, const NoiseSchedule& sched,
                            const std::vector<double>& x, double t);

// Draws x_T ~ N(0, I) and integrates the reverse SDE
//   x' = x + [1/2 beta(t) x + beta(t) score(x, t)] dt + sqrt(beta(t) dt) xi
// over `steps` uniform Euler-Maruyama steps from T down to kTimeFloor.
// T <= 0 selects the schedule's default horizon.
std::vector<double> reverse_sample(const GaussianMixture& mix, const NoiseSchedule& sched,
                                   double T, int steps, uint64_t seed);

// n independent draws with per-sample seeds derived from master_seed.
std::vector<std::vector<double>> reverse_sample_batch(const GaussianMixture& mix,
                                                      const NoiseSchedule& sched, double T,
                                                      int steps, int n, uint64_t master_seed,
                                                      int threads = 1);

struct Quantizer {
    int dim = 0;
    std::vector<std::vector<double>> centroids; // token i <-> centroids[i]

    int size() const { return static_cast<int>(centroids.size()); }
    // Nearest centroid, ties broken by lowest token index.
    int quantize(const std::vector<double>& x) const;
    void validate() const;
};

// Total variation between two empirical token distributions, or between an
// empirical distribution and an exact one.
double estimate_tv(const std::vector<int>& tokens_a, const std::vector<int>& tokens_b,
                   int alphabet_size);
double estimate_tv(const std::vector<int>& tokens, const std::vector<double>& exact_probs);

// Exact token distribution of a mixture under a quantizer, assuming each
// component lies wholly inside one Voronoi region (the fixtures are built
// that way): the mass of token i is the sum of weights of components whose
// mean quantizes to i.
std::vector<double> ground_truth_tokens(const GaussianMixture& mix, const Quantizer& quant);

struct ConvergencePoint {
    int steps = 0;
    double tv = 0.0;
    double se = 0.0; // conservative multinomial standard error of the TV estimate
};

// TV against the ground truth per step count; trial i reuses the same seed
// across step counts (matched seeds).
std::vector<ConvergencePoint> convergence_curve(const GaussianMixture& mix,
                                                const NoiseSchedule& sched,
                                                const Quantizer& quant,
                                                const std::vector<int>& step_counts, int trials,
                                                uint64_t master_seed, double T = 0.0,
                                                int threads = 1);

// Prefix language-modeling task: the word problem in the multiplicative
// group mod a prime p. Tokens are the residues 1..p-1 (token index = residue
// minus one); the correct continuation of a prefix is the product of its
// residues mod p. The conditional distribution for a prefix is a mixture
// with `correct_weight` on the correct token's centroid and the rest spread
// evenly, which makes the constant probability bound analytic.
struct PrefixTask {
    int modulus = 7;
    int dim = 2;
    double correct_weight = 0.8;
    double component_var = 1e-4;
    double centroid_radius = 0.95; // keeps the first moment bounded by 1
    int max_len = 4;

    int token_count() const { return modulus - 1; }
    Quantizer quantizer() const;
    int correct_token(const std::vector<int>& prefix) const; // tokens, not residues
    GaussianMixture mixture_for(const std::vector<int>& prefix) const;
    double margin() const; // epsilon: correct_weight - (1-correct_weight)/(M-1)
    std::vector<std::vector<int>> evaluation_prefixes() const; // lengths 0..max_len
    void validate() const;
};

struct PrefixResult {
    std::vector<int> prefix;
    int correct_token = 0;
    std::vector<double> freqs;
    double margin = 0.0; // freq(correct) - max freq(other)
    bool pass = false;   // margin >= task.margin() / 2
};

std::vector<PrefixResult> prefix_eval(const PrefixTask& task, const NoiseSchedule& sched,
                                      int steps, int samples, uint64_t master_seed,
                                      int threads = 1);

// m draws per prefix under the given seed, plurality output with lowest
// token index breaking ties; m must be odd.
std::vector<int> majority_tokens(const PrefixTask& task, const NoiseSchedule& sched, int steps,
                                 int m, uint64_t seed, int threads = 1);

struct AdviceSearch {
    bool found = false;
    uint64_t seed = 0;
    int attempts_used = 0;
};

bool verify_advice(const PrefixTask& task, const NoiseSchedule& sched, int steps, int m,
                   uint64_t advice_seed, int threads = 1);
AdviceSearch find_advice_seed(const PrefixTask& task, const NoiseSchedule& sched, int steps,
                              int m, int max_attempts, uint64_t master_seed, int threads = 1);

// Mixture + optional quantizer file format used by the CLI.
struct MixtureFile {
    GaussianMixture mixture;
    Quantizer quantizer;
};
MixtureFile load_mixture_file(const std::string& path);
void save_mixture_file(const MixtureFile& mf, const std::string& path);

// Built-in d = 2 fixture: six point-mass components on a 3 x 2 grid with
// spacing 3 and uneven weights; the quantizer uses the same points.
MixtureFile grid6_fixture();

} // namespace difflab::diffusion
