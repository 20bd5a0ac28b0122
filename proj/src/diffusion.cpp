#include "difflab/diffusion.hpp"

#include "difflab/parallel.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace difflab::diffusion {

namespace {

constexpr double kTwoPi = 6.283185307179586476925287;

uint64_t prefix_hash(const std::vector<int>& prefix) {
    uint64_t h = 1469598103934665603ULL ^ (prefix.size() + 1);
    for (int tok : prefix) h = (h ^ static_cast<uint64_t>(tok + 1)) * 1099511628211ULL;
    return h;
}

bool is_prime(int p) {
    if (p < 2) return false;
    for (int q = 2; q * q <= p; ++q)
        if (p % q == 0) return false;
    return true;
}

// Precomputed evaluator for one mixture: posterior responsibilities, score
// and log density. Immutable after build; scratch comes from the caller so
// concurrent evaluation is race-free.
struct MixEval {
    int dim = 0;
    int count = 0;
    kernels::PointPack pack;
    std::vector<double> inv_var;
    std::vector<double> log_norm; // ln w_i - d/2 ln(2 pi v_i)

    void build(const GaussianMixture& mix) {
        mix.validate();
        dim = mix.dim;
        count = static_cast<int>(mix.components.size());
        pack.resize(dim, count);
        inv_var.resize(count);
        log_norm.resize(count);
        for (int j = 0; j < count; ++j) {
            const GaussianComponent& c = mix.components[j];
            if (c.var <= 0.0)
                throw std::invalid_argument(
                    "degenerate mixture component (zero variance) cannot be scored");
            for (int d = 0; d < dim; ++d) pack.pos_dim(d)[j] = c.mean[d];
            inv_var[j] = 1.0 / c.var;
            log_norm[j] = std::log(c.weight) - 0.5 * dim * std::log(kTwoPi * c.var);
        }
    }

    struct Scratch {
        std::vector<double> q;
        std::vector<double> resp;
    };

    // Fills sc.resp with normalized responsibilities, returns ln density.
    double responsibilities(const double* x, Scratch& sc) const {
        sc.q.resize(pack.padded);
        sc.resp.resize(count);
        kernels::sq_dist(pack, x, sc.q.data());
        double m = -std::numeric_limits<double>::infinity();
        for (int j = 0; j < count; ++j) {
            const double g = log_norm[j] - 0.5 * inv_var[j] * sc.q[j];
            sc.resp[j] = g;
            m = std::max(m, g);
        }
        double total = 0.0;
        for (int j = 0; j < count; ++j) {
            sc.resp[j] = std::exp(sc.resp[j] - m);
            total += sc.resp[j];
        }
        const double inv_total = 1.0 / total;
        for (int j = 0; j < count; ++j) sc.resp[j] *= inv_total;
        return m + std::log(total);
    }

    void score(const double* x, Scratch& sc, double* out) const {
        responsibilities(x, sc);
        for (int d = 0; d < dim; ++d) out[d] = 0.0;
        for (int j = 0; j < count; ++j) {
            const double w = sc.resp[j] * inv_var[j];
            for (int d = 0; d < dim; ++d) out[d] += w * (pack.pos_dim(d)[j] - x[d]);
        }
    }
};

// Shared, immutable per-step tables for one (mixture, schedule, T, steps)
// combination; samples can be drawn from it concurrently.
struct SamplerPlan {
    int dim = 0;
    int steps = 0;
    double T = 0.0;
    double dt = 0.0;
    std::vector<double> beta_at;  // beta(t_k) for k = 0..steps-1
    std::vector<MixEval> marginal;

    SamplerPlan(const GaussianMixture& mix, const NoiseSchedule& sched, double horizon,
                int step_count) {
        if (step_count < 1) throw std::invalid_argument("reverse sampling needs steps >= 1");
        mix.validate();
        dim = mix.dim;
        steps = step_count;
        T = horizon > 0.0 ? horizon : sched.default_horizon();
        if (T <= kTimeFloor) throw std::invalid_argument("reverse horizon below the time floor");
        dt = (T - kTimeFloor) / steps;
        beta_at.resize(steps);
        marginal.resize(steps);
        for (int k = 0; k < steps; ++k) {
            const double t = T - k * dt;
            beta_at[k] = sched.beta(t);
            marginal[k].build(forward_marginal(mix, sched, t));
        }
    }

    std::vector<double> draw(uint64_t seed, MixEval::Scratch& sc) const {
        Rng rng(seed);
        std::vector<double> x(dim);
        std::vector<double> s(dim);
        for (int d = 0; d < dim; ++d) x[d] = rng.normal();
        for (int k = 0; k < steps; ++k) {
            const double beta = beta_at[k];
            marginal[k].score(x.data(), sc, s.data());
            const double noise = std::sqrt(beta * dt);
            for (int d = 0; d < dim; ++d) {
                const double drift = 0.5 * beta * x[d] + beta * s[d];
                if (!std::isfinite(drift))
                    throw std::runtime_error("reverse integration failed: non-finite drift");
                x[d] += drift * dt + noise * rng.normal();
            }
        }
        return x;
    }
};

std::vector<double> token_frequencies(const std::vector<int>& tokens, int alphabet) {
    std::vector<double> freq(alphabet, 0.0);
    for (int t : tokens) {
        if (t < 0 || t >= alphabet) throw std::invalid_argument("token out of range");
        freq[t] += 1.0;
    }
    for (double& f : freq) f /= tokens.empty() ? 1.0 : static_cast<double>(tokens.size());
    return freq;
}

} // namespace

NoiseSchedule NoiseSchedule::constant(double beta) {
    if (beta <= 0.0) throw std::invalid_argument("constant schedule needs beta > 0");
    NoiseSchedule s;
    s.family = Family::constant;
    s.beta0 = s.beta1 = beta;
    return s;
}

NoiseSchedule NoiseSchedule::linear(double beta0, double beta1) {
    if (beta0 <= 0.0 || beta1 < beta0)
        throw std::invalid_argument("linear schedule needs 0 < beta0 <= beta1");
    NoiseSchedule s;
    s.family = Family::linear;
    s.beta0 = beta0;
    s.beta1 = beta1;
    return s;
}

double NoiseSchedule::beta(double t) const {
    if (t < 0.0) throw std::invalid_argument("negative time");
    return family == Family::constant ? beta0 : beta0 + (beta1 - beta0) * t;
}

double NoiseSchedule::integral(double t) const {
    if (t < 0.0) throw std::invalid_argument("negative time");
    return family == Family::constant ? beta0 * t : beta0 * t + 0.5 * (beta1 - beta0) * t * t;
}

double NoiseSchedule::alpha(double t) const { return std::exp(-0.5 * integral(t)); }

double NoiseSchedule::default_horizon() const {
    return family == Family::constant ? 5.0 / beta0 : 1.0;
}

void GaussianMixture::validate() const {
    if (dim < 1) throw std::invalid_argument("mixture dimension must be >= 1");
    if (components.empty()) throw std::invalid_argument("mixture needs components");
    double total = 0.0;
    for (const GaussianComponent& c : components) {
        if (c.weight <= 0.0) throw std::invalid_argument("component weights must be positive");
        if (static_cast<int>(c.mean.size()) != dim)
            throw std::invalid_argument("component mean has wrong dimension");
        if (c.var < 0.0) throw std::invalid_argument("variances must be nonnegative");
        total += c.weight;
    }
    if (std::abs(total - 1.0) > 1e-9)
        throw std::invalid_argument("component weights must sum to 1");
}

double GaussianMixture::first_moment_upper_bound() const {
    double bound = 0.0;
    for (const GaussianComponent& c : components) {
        double norm2 = 0.0;
        for (double m : c.mean) norm2 += m * m;
        bound += c.weight * (std::sqrt(norm2) + std::sqrt(dim * c.var));
    }
    return bound;
}

GaussianMixture GaussianMixture::standard_normal(int dim) {
    GaussianMixture m;
    m.dim = dim;
    m.components.push_back(GaussianComponent{1.0, std::vector<double>(dim, 0.0), 1.0});
    return m;
}

GaussianMixture forward_marginal(const GaussianMixture& mix, const NoiseSchedule& sched,
                                 double t) {
    mix.validate();
    const double a = sched.alpha(t);
    GaussianMixture out;
    out.dim = mix.dim;
    out.components.reserve(mix.components.size());
    for (const GaussianComponent& c : mix.components) {
        GaussianComponent n;
        n.weight = c.weight;
        n.mean.resize(mix.dim);
        for (int d = 0; d < mix.dim; ++d) n.mean[d] = a * c.mean[d];
        n.var = c.var * a * a + (1.0 - a * a);
        out.components.push_back(std::move(n));
    }
    return out;
}

std::vector<double> mixture_score(const GaussianMixture& mix, const std::vector<double>& x) {
    MixEval ev;
    ev.build(mix);
    MixEval::Scratch sc;
    std::vector<double> out(mix.dim);
    ev.score(x.data(), sc, out.data());
    return out;
}

double mixture_log_density(const GaussianMixture& mix, const std::vector<double>& x) {
    MixEval ev;
    ev.build(mix);
    MixEval::Scratch sc;
    return ev.responsibilities(x.data(), sc);
}

std::vector<double> exact_score(const GaussianMixture& mix, const NoiseSchedule& sched,
                                const std::vector<double>& x, double t) {
    return mixture_score(forward_marginal(mix, sched, t), x);
}

double log_marginal_density(const GaussianMixture& mix, const NoiseSchedule& sched,
                            const std::vector<double>& x, double t) {
    return mixture_log_density(forward_marginal(mix, sched, t), x);
}

std::vector<double> reverse_sample(const GaussianMixture& mix, const NoiseSchedule& sched,
                                   double T, int steps, uint64_t seed) {
    SamplerPlan plan(mix, sched, T, steps);
    MixEval::Scratch sc;
    return plan.draw(seed, sc);
}

std::vector<std::vector<double>> reverse_sample_batch(const GaussianMixture& mix,
                                                      const NoiseSchedule& sched, double T,
                                                      int steps, int n, uint64_t master_seed,
                                                      int threads) {
    SamplerPlan plan(mix, sched, T, steps);
    std::vector<std::vector<double>> out(n);
    parallel_for(n, threads, [&](int i) {
        thread_local MixEval::Scratch sc;
        out[i] = plan.draw(derive_seed(master_seed, /*stream=*/1, i), sc);
    });
    return out;
}

int Quantizer::quantize(const std::vector<double>& x) const {
    validate();
    if (static_cast<int>(x.size()) != dim)
        throw std::invalid_argument("point dimension does not match quantizer");
    int best = 0;
    double best_q = std::numeric_limits<double>::infinity();
    for (int i = 0; i < size(); ++i) {
        double q = 0.0;
        for (int d = 0; d < dim; ++d) {
            const double diff = x[d] - centroids[i][d];
            q += diff * diff;
        }
        if (q < best_q) { // strict: ties keep the lowest index
            best_q = q;
            best = i;
        }
    }
    return best;
}

void Quantizer::validate() const {
    if (dim < 1 || centroids.empty())
        throw std::invalid_argument("quantizer needs a dimension and centroids");
    for (const auto& c : centroids)
        if (static_cast<int>(c.size()) != dim)
            throw std::invalid_argument("centroid dimension mismatch");
}

double estimate_tv(const std::vector<int>& tokens_a, const std::vector<int>& tokens_b,
                   int alphabet_size) {
    if (tokens_a.empty() || tokens_b.empty())
        throw std::invalid_argument("TV estimate needs nonempty samples");
    const auto pa = token_frequencies(tokens_a, alphabet_size);
    const auto pb = token_frequencies(tokens_b, alphabet_size);
    double tv = 0.0;
    for (int i = 0; i < alphabet_size; ++i) tv += std::abs(pa[i] - pb[i]);
    return 0.5 * tv;
}

double estimate_tv(const std::vector<int>& tokens, const std::vector<double>& exact_probs) {
    if (tokens.empty()) throw std::invalid_argument("TV estimate needs nonempty samples");
    const auto p = token_frequencies(tokens, static_cast<int>(exact_probs.size()));
    double tv = 0.0;
    for (size_t i = 0; i < exact_probs.size(); ++i) tv += std::abs(p[i] - exact_probs[i]);
    return 0.5 * tv;
}

std::vector<double> ground_truth_tokens(const GaussianMixture& mix, const Quantizer& quant) {
    mix.validate();
    std::vector<double> probs(quant.size(), 0.0);
    for (const GaussianComponent& c : mix.components) probs[quant.quantize(c.mean)] += c.weight;
    return probs;
}

std::vector<ConvergencePoint> convergence_curve(const GaussianMixture& mix,
                                                const NoiseSchedule& sched,
                                                const Quantizer& quant,
                                                const std::vector<int>& step_counts, int trials,
                                                uint64_t master_seed, double T, int threads) {
    if (trials < 1) throw std::invalid_argument("convergence curve needs trials >= 1");
    if (step_counts.empty()) throw std::invalid_argument("convergence curve needs step counts");
    const std::vector<double> truth = ground_truth_tokens(mix, quant);
    std::vector<ConvergencePoint> out;
    for (int steps : step_counts) {
        SamplerPlan plan(mix, sched, T, steps);
        std::vector<int> tokens(trials);
        parallel_for(trials, threads, [&](int i) {
            thread_local MixEval::Scratch sc;
            // seed depends on the trial index only: matched across step counts
            tokens[i] = quant.quantize(plan.draw(derive_seed(master_seed, 1, i), sc));
        });
        ConvergencePoint pt;
        pt.steps = steps;
        pt.tv = estimate_tv(tokens, truth);
        const auto freq = token_frequencies(tokens, quant.size());
        double var_sum = 0.0;
        for (double f : freq) var_sum += f * (1.0 - f);
        pt.se = 0.5 * std::sqrt(var_sum / trials);
        out.push_back(pt);
    }
    return out;
}

Quantizer PrefixTask::quantizer() const {
    Quantizer q;
    q.dim = dim;
    const int M = token_count();
    for (int k = 0; k < M; ++k) {
        const double ang = kTwoPi * k / M;
        q.centroids.push_back({centroid_radius * std::cos(ang), centroid_radius * std::sin(ang)});
    }
    return q;
}

int PrefixTask::correct_token(const std::vector<int>& prefix) const {
    int64_t prod = 1;
    for (int tok : prefix) {
        if (tok < 0 || tok >= token_count()) throw std::invalid_argument("token out of range");
        prod = prod * (tok + 1) % modulus;
    }
    return static_cast<int>(prod) - 1;
}

GaussianMixture PrefixTask::mixture_for(const std::vector<int>& prefix) const {
    const Quantizer q = quantizer();
    const int M = token_count();
    const int correct = correct_token(prefix);
    GaussianMixture mix;
    mix.dim = dim;
    for (int k = 0; k < M; ++k) {
        GaussianComponent c;
        c.weight = k == correct ? correct_weight : (1.0 - correct_weight) / (M - 1);
        c.mean = q.centroids[k];
        c.var = component_var;
        mix.components.push_back(std::move(c));
    }
    return mix;
}

double PrefixTask::margin() const {
    return correct_weight - (1.0 - correct_weight) / (token_count() - 1);
}

std::vector<std::vector<int>> PrefixTask::evaluation_prefixes() const {
    std::vector<std::vector<int>> out;
    std::vector<std::vector<int>> level{{}};
    out.push_back({});
    for (int len = 1; len <= max_len; ++len) {
        std::vector<std::vector<int>> next;
        for (const auto& p : level)
            for (int tok = 0; tok < token_count(); ++tok) {
                auto ext = p;
                ext.push_back(tok);
                out.push_back(ext);
                next.push_back(std::move(ext));
            }
        level = std::move(next);
    }
    return out;
}

void PrefixTask::validate() const {
    if (!is_prime(modulus) || modulus < 3)
        throw std::invalid_argument("task modulus must be an odd prime");
    if (dim != 2) throw std::invalid_argument("the circle layout needs dim = 2");
    if (max_len < 0 || std::pow(token_count(), max_len) > 2e6)
        throw std::invalid_argument("prefix evaluation set too large");
    if (component_var <= 0.0) throw std::invalid_argument("component variance must be positive");
    if (margin() <= 0.0)
        throw std::invalid_argument(
            "constant probability bound violated: correct weight does not dominate");
    if (mixture_for({}).first_moment_upper_bound() > 1.0)
        throw std::invalid_argument("task mixtures must keep the first moment bounded by 1");
}

std::vector<PrefixResult> prefix_eval(const PrefixTask& task, const NoiseSchedule& sched,
                                      int steps, int samples, uint64_t master_seed,
                                      int threads) {
    task.validate();
    if (samples < 1) throw std::invalid_argument("prefix_eval needs samples >= 1");
    const auto prefixes = task.evaluation_prefixes();
    const Quantizer quant = task.quantizer();
    std::vector<PrefixResult> out(prefixes.size());
    parallel_for(static_cast<int>(prefixes.size()), threads, [&](int pi) {
        const auto& prefix = prefixes[pi];
        SamplerPlan plan(task.mixture_for(prefix), sched, 0.0, steps);
        MixEval::Scratch sc;
        std::vector<int> tokens(samples);
        const uint64_t stream = prefix_hash(prefix);
        for (int i = 0; i < samples; ++i)
            tokens[i] = quant.quantize(plan.draw(derive_seed(master_seed, stream, i), sc));
        PrefixResult res;
        res.prefix = prefix;
        res.correct_token = task.correct_token(prefix);
        res.freqs = token_frequencies(tokens, quant.size());
        double best_other = 0.0;
        for (int k = 0; k < quant.size(); ++k)
            if (k != res.correct_token) best_other = std::max(best_other, res.freqs[k]);
        res.margin = res.freqs[res.correct_token] - best_other;
        res.pass = res.margin >= task.margin() / 2.0;
        out[pi] = std::move(res);
    });
    return out;
}

std::vector<int> majority_tokens(const PrefixTask& task, const NoiseSchedule& sched, int steps,
                                 int m, uint64_t seed, int threads) {
    task.validate();
    if (m < 1 || m % 2 == 0) throw std::invalid_argument("majority repetitions must be odd");
    const auto prefixes = task.evaluation_prefixes();
    const Quantizer quant = task.quantizer();
    std::vector<int> out(prefixes.size());
    parallel_for(static_cast<int>(prefixes.size()), threads, [&](int pi) {
        const auto& prefix = prefixes[pi];
        SamplerPlan plan(task.mixture_for(prefix), sched, 0.0, steps);
        MixEval::Scratch sc;
        std::vector<int> counts(quant.size(), 0);
        const uint64_t stream = prefix_hash(prefix) ^ 0x5a5a5a5a5a5a5a5aULL;
        for (int i = 0; i < m; ++i)
            ++counts[quant.quantize(plan.draw(derive_seed(seed, stream, i), sc))];
        int best = 0;
        for (int k = 1; k < quant.size(); ++k)
            if (counts[k] > counts[best]) best = k; // ties keep the lowest index
        out[pi] = best;
    });
    return out;
}

bool verify_advice(const PrefixTask& task, const NoiseSchedule& sched, int steps, int m,
                   uint64_t advice_seed, int threads) {
    const auto prefixes = task.evaluation_prefixes();
    const auto tokens = majority_tokens(task, sched, steps, m, advice_seed, threads);
    for (size_t i = 0; i < prefixes.size(); ++i)
        if (tokens[i] != task.correct_token(prefixes[i])) return false;
    return true;
}

AdviceSearch find_advice_seed(const PrefixTask& task, const NoiseSchedule& sched, int steps,
                              int m, int max_attempts, uint64_t master_seed, int threads) {
    AdviceSearch res;
    for (int attempt = 1; attempt <= max_attempts; ++attempt) {
        const uint64_t candidate = derive_seed(master_seed, /*stream=*/3, attempt);
        res.attempts_used = attempt;
        if (verify_advice(task, sched, steps, m, candidate, threads)) {
            res.found = true;
            res.seed = candidate;
            return res;
        }
    }
    return res;
}

MixtureFile load_mixture_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open mixture file: " + path);
    nlohmann::json j;
    f >> j;
    MixtureFile mf;
    mf.mixture.dim = j.at("dim").get<int>();
    for (const auto& cj : j.at("components")) {
        GaussianComponent c;
        c.weight = cj.at("weight").get<double>();
        c.mean = cj.at("mean").get<std::vector<double>>();
        c.var = cj.at("var").get<double>();
        mf.mixture.components.push_back(std::move(c));
    }
    mf.mixture.validate();
    mf.quantizer.dim = mf.mixture.dim;
    mf.quantizer.centroids =
        j.at("quantizer").at("centroids").get<std::vector<std::vector<double>>>();
    mf.quantizer.validate();
    return mf;
}

void save_mixture_file(const MixtureFile& mf, const std::string& path) {
    nlohmann::json j;
    j["schema_version"] = 1;
    j["dim"] = mf.mixture.dim;
    auto comps = nlohmann::json::array();
    for (const auto& c : mf.mixture.components)
        comps.push_back({{"weight", c.weight}, {"mean", c.mean}, {"var", c.var}});
    j["components"] = comps;
    j["quantizer"] = {{"centroids", mf.quantizer.centroids}};
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write mixture file: " + path);
    f << j.dump(2) << "\n";
}

MixtureFile grid6_fixture() {
    MixtureFile mf;
    mf.mixture.dim = 2;
    const std::vector<std::vector<double>> means = {{-3.0, -1.5}, {0.0, -1.5}, {3.0, -1.5},
                                                    {-3.0, 1.5},  {0.0, 1.5},  {3.0, 1.5}};
    const std::vector<double> weights = {0.30, 0.20, 0.15, 0.15, 0.12, 0.08};
    for (size_t i = 0; i < means.size(); ++i)
        mf.mixture.components.push_back(GaussianComponent{weights[i], means[i], 1e-4});
    mf.quantizer.dim = 2;
    mf.quantizer.centroids = means;
    return mf;
}

} // namespace difflab::diffusion
