#include "difflab/field.hpp"

#include "difflab/rng.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace difflab::groove {

namespace {

constexpr double kPi = 3.14159265358979323846;
// Features whose soft-nearest weight would fall below 1e-12 are skipped.
constexpr double kWeightCutoff = 27.631021115928548; // -ln(1e-12)

double smoothstep01(double u) {
    u = std::clamp(u, 0.0, 1.0);
    return u * u * (3.0 - 2.0 * u);
}

// 1 on [0, r-s], C^1 polynomial blend to 0 at r.
double confinement_profile(double d, double r, double s) {
    if (d <= r - s) return 1.0;
    if (d >= r) return 0.0;
    return smoothstep01((r - d) / s);
}

// 0 at u <= 0, quadratic knee of width w, then linear.
double huber_ramp(double u, double w) {
    if (u <= 0.0) return 0.0;
    if (u < w) return u * u / (2.0 * w);
    return u - w / 2.0;
}

} // namespace

Vec make_vec(const std::vector<double>& v) {
    if (v.size() > static_cast<size_t>(kMaxDim))
        throw std::invalid_argument("vector exceeds kMaxDim");
    Vec out{};
    std::copy(v.begin(), v.end(), out.begin());
    return out;
}

struct Field::Scratch {
    std::vector<double> qseg, tseg, qarc, xi1, xi2;
};

Field::Scratch& Field::local_scratch() {
    thread_local Scratch ws;
    return ws;
}

Field::Field(ForceFieldSpec spec) : spec_(std::move(spec)) {
    spec_.validate();
    dim_ = spec_.graph.dim;
    const double L = spec_.cell_size;
    const double s = spec_.smoothing_radius;
    const auto& W = spec_.graph.waypoints;

    auto phys = [&](const Coord& c) {
        Vec v{};
        for (int d = 0; d < dim_; ++d) v[d] = L * c[d];
        return v;
    };

    // Merge the unit-step chain into maximal straight runs.
    struct RawRail {
        size_t i0, i1;
        int axis, dir;
    };
    std::vector<RawRail> raw;
    for (size_t i = 0; i + 1 < W.size(); ++i) {
        int axis = -1, dir = 0;
        for (int d = 0; d < dim_; ++d)
            if (W[i][d] != W[i + 1][d]) {
                axis = d;
                dir = W[i + 1][d] > W[i][d] ? 1 : -1;
            }
        if (axis < 0) throw CompileError("degenerate zero-length groove segment");
        if (!raw.empty() && raw.back().axis == axis && raw.back().dir == dir)
            raw.back().i1 = i + 1;
        else
            raw.push_back(RawRail{i, i + 1, axis, dir});
    }

    double off = 0.0;
    for (size_t ri = 0; ri < raw.size(); ++ri) {
        const RawRail& rr = raw[ri];
        const Vec a = phys(W[rr.i0]);
        const Vec b = phys(W[rr.i1]);
        Rail rail;
        rail.udir = Vec{};
        rail.udir[rr.axis] = rr.dir;
        rail.anchor = a;
        rail.len = L * std::abs(static_cast<double>(W[rr.i1][rr.axis]) - W[rr.i0][rr.axis]);
        rail.arc_off = off;
        off += rail.len;
        rails_.push_back(rail);

        if (ri + 1 < raw.size()) {
            if (raw[ri + 1].axis == rr.axis)
                throw CompileError("groove path reverses onto itself");
            Fillet f;
            Vec u = rail.udir;
            Vec w{};
            w[raw[ri + 1].axis] = raw[ri + 1].dir;
            for (int d = 0; d < dim_; ++d) {
                f.center[d] = b[d] - s * u[d] + s * w[d];
                f.e1[d] = -w[d];
                f.e2[d] = u[d];
            }
            f.arc_off = off; // corners sit between rails in arclength
            fillets_.push_back(f);
        }
    }
    total_len_ = off;
    ramp_len_ = L / 2.0;
    terminal_ = phys(W.back());

    seg_pack_.resize(dim_, static_cast<int>(rails_.size()));
    for (size_t j = 0; j < rails_.size(); ++j) {
        for (int d = 0; d < dim_; ++d) {
            seg_pack_.anchor_dim(d)[j] = rails_[j].anchor[d];
            seg_pack_.dir_dim(d)[j] = rails_[j].udir[d];
        }
        seg_pack_.length[j] = rails_[j].len;
    }
    arc_pack_.resize(dim_, static_cast<int>(fillets_.size()));
    arc_pack_.radius = s;
    for (size_t j = 0; j < fillets_.size(); ++j)
        for (int d = 0; d < dim_; ++d) {
            arc_pack_.center_dim(d)[j] = fillets_[j].center[d];
            arc_pack_.e1_dim(d)[j] = fillets_[j].e1[d];
            arc_pack_.e2_dim(d)[j] = fillets_[j].e2[d];
        }
}

int Field::feature_count() const {
    return static_cast<int>(rails_.size() + fillets_.size()) + 1;
}

void Field::scan(const Vec& x, Scratch& ws) const {
    ws.qseg.resize(seg_pack_.padded);
    ws.tseg.resize(seg_pack_.padded);
    ws.qarc.resize(arc_pack_.padded);
    ws.xi1.resize(arc_pack_.padded);
    ws.xi2.resize(arc_pack_.padded);
    if (seg_pack_.padded > 0)
        kernels::seg_scan(seg_pack_, x.data(), ws.qseg.data(), ws.tseg.data());
    if (arc_pack_.padded > 0)
        kernels::arc_scan(arc_pack_, x.data(), ws.qarc.data(), ws.xi1.data(), ws.xi2.data());
}

Vec Field::assemble(const Vec& x, Scratch& ws, double* out_min_dist,
                    double* out_term_dist) const {
    const double r = spec_.corridor_radius;
    const double s = spec_.smoothing_radius;
    const double kappa = spec_.kappa;
    const double v = spec_.speed;
    const double inv2s2 = 1.0 / (2.0 * s * s);

    double qT = 0.0;
    for (int d = 0; d < dim_; ++d) {
        const double diff = x[d] - terminal_[d];
        qT += diff * diff;
    }
    double qmin = qT;
    for (int j = 0; j < seg_pack_.count; ++j) qmin = std::min(qmin, ws.qseg[j]);
    for (int j = 0; j < arc_pack_.count; ++j) qmin = std::min(qmin, ws.qarc[j]);
    const double cut = qmin + kWeightCutoff / inv2s2;
    if (out_min_dist) *out_min_dist = std::sqrt(std::max(qmin, 0.0));
    if (out_term_dist) *out_term_dist = std::sqrt(qT);

    double wsum = 0.0;
    Vec fsum{};
    Vec pull{};
    auto add = [&](double q, const Vec& n, const Vec& tau, double speed_factor, double fade) {
        const double w = fade * std::exp(-(q - qmin) * inv2s2);
        const double d0 = std::sqrt(std::max(q, 0.0));
        const double cf = confinement_profile(d0, r, s);
        for (int d = 0; d < dim_; ++d) {
            const double to_line = n[d] - x[d];
            fsum[d] += w * cf * (v * speed_factor * tau[d] + kappa * to_line);
            pull[d] += w * to_line;
        }
        wsum += w;
    };

    for (int j = 0; j < seg_pack_.count; ++j) {
        if (ws.qseg[j] > cut) continue;
        const Rail& rl = rails_[j];
        const double t = ws.tseg[j];
        Vec n{};
        for (int d = 0; d < dim_; ++d) n[d] = rl.anchor[d] + t * rl.udir[d];
        const double lrem = total_len_ - (rl.arc_off + t);
        add(ws.qseg[j], n, rl.udir, smoothstep01(lrem / ramp_len_), 1.0);
    }
    // arcs act only near their quarter sector: the blend weight fades to
    // zero over half a radius outside it and near the degenerate axis
    const double fade_w = 0.5 * s;
    for (int j = 0; j < arc_pack_.count; ++j) {
        if (ws.qarc[j] > cut) continue;
        const double a = ws.xi1[j];
        const double b = ws.xi2[j];
        const double rho = std::sqrt(a * a + b * b);
        const double fade = smoothstep01((a + fade_w) / fade_w) *
                            smoothstep01((b + fade_w) / fade_w) *
                            smoothstep01(rho / fade_w);
        if (fade <= 0.0 || rho <= 0.0) continue;
        const Fillet& f = fillets_[j];
        const double ca = a / rho;
        const double cb = b / rho;
        Vec n{}, tau{};
        for (int d = 0; d < dim_; ++d) {
            n[d] = f.center[d] + s * (ca * f.e1[d] + cb * f.e2[d]);
            tau[d] = -cb * f.e1[d] + ca * f.e2[d];
        }
        const double lrem = total_len_ - f.arc_off;
        add(ws.qarc[j], n, tau, smoothstep01(lrem / ramp_len_), fade);
    }
    if (qT <= cut) add(qT, terminal_, Vec{}, 0.0, 1.0);

    if (wsum <= 0.0) {
        // only fully faded arcs were in range; rails are never faded, so
        // this cannot happen with a nonempty corridor in reach, but keep
        // the field total regardless
        Vec out{};
        for (int d = 0; d < dim_; ++d) out[d] = 0.0;
        return out;
    }

    Vec out{};
    const double inv_w = 1.0 / wsum;
    double pn2 = 0.0;
    for (int d = 0; d < dim_; ++d) {
        out[d] = fsum[d] * inv_w;
        pull[d] *= inv_w;
        pn2 += pull[d] * pull[d];
    }
    const double qsoft = qmin - std::log(wsum) / inv2s2;
    const double dsoft = std::sqrt(std::max(qsoft, 0.0));
    if (dsoft > r && pn2 > 1e-300) {
        const double mag = kappa * huber_ramp(dsoft - r, s) / std::sqrt(pn2);
        for (int d = 0; d < dim_; ++d) out[d] += mag * pull[d];
    }
    return out;
}

Vec Field::groove_force(const Vec& x) const {
    Scratch& ws = local_scratch();
    scan(x, ws);
    return assemble(x, ws);
}

Vec Field::force(const Vec& x) const {
    Vec out = groove_force(x);
    for (int d = 0; d < dim_; ++d) out[d] -= 0.5 * x[d];
    return out;
}

Field::Probe Field::probe(const Vec& x) const {
    Scratch& ws = local_scratch();
    scan(x, ws);
    Probe p;
    p.force = assemble(x, ws, &p.min_dist, &p.terminal_dist);
    for (int d = 0; d < dim_; ++d) p.force[d] -= 0.5 * x[d];
    return p;
}

double Field::min_distance(const Vec& x) const {
    Scratch& ws = local_scratch();
    scan(x, ws);
    double qmin = 0.0;
    for (int d = 0; d < dim_; ++d) {
        const double diff = x[d] - terminal_[d];
        qmin += diff * diff;
    }
    for (int j = 0; j < seg_pack_.count; ++j) qmin = std::min(qmin, ws.qseg[j]);
    for (int j = 0; j < arc_pack_.count; ++j) qmin = std::min(qmin, ws.qarc[j]);
    return std::sqrt(std::max(qmin, 0.0));
}

Coord Field::cell_of(const Vec& x) const {
    Coord c(dim_, 0);
    for (int d = 0; d < dim_; ++d)
        c[d] = static_cast<int32_t>(std::llround(x[d] / spec_.cell_size));
    return c;
}

Vec Field::start_position() const {
    Vec v{};
    for (int d = 0; d < dim_; ++d) v[d] = spec_.cell_size * spec_.graph.start[d];
    return v;
}

Vec Field::terminal_position() const { return terminal_; }

void Field::centerline_at(double t, Vec& point, Vec& tangent) const {
    if (total_len_ <= 0.0) {
        point = terminal_;
        tangent = Vec{};
        return;
    }
    t = std::clamp(t, 0.0, total_len_);
    // rails and fillets interleave; find the piece containing t
    const size_t nf = fillets_.size();
    for (size_t i = 0; i < rails_.size(); ++i) {
        const Rail& rl = rails_[i];
        const bool last = i + 1 == rails_.size();
        if (t <= rl.arc_off + rl.len || last || i >= nf) {
            const double local = std::clamp(t - rl.arc_off, 0.0, rl.len);
            for (int d = 0; d < dim_; ++d) point[d] = rl.anchor[d] + local * rl.udir[d];
            tangent = rl.udir;
            return;
        }
        const Fillet& f = fillets_[i];
        const double s = spec_.smoothing_radius;
        if (t <= f.arc_off + s * kPi / 2.0) {
            const double theta = std::clamp((t - f.arc_off) / s, 0.0, kPi / 2.0);
            const double c = std::cos(theta), sn = std::sin(theta);
            for (int d = 0; d < dim_; ++d) {
                point[d] = f.center[d] + s * (c * f.e1[d] + sn * f.e2[d]);
                tangent[d] = -sn * f.e1[d] + c * f.e2[d];
            }
            return;
        }
    }
    point = terminal_;
    tangent = Vec{};
}

double Field::lipschitz_estimate(int samples, uint64_t seed) const {
    if (samples < 2) throw std::invalid_argument("lipschitz_estimate needs samples >= 2");
    Rng rng(seed);
    const double r = spec_.corridor_radius;
    const double eps = 1e-5 * spec_.cell_size;
    double sup = 0.0;
    for (int it = 0; it < samples; ++it) {
        Vec base{}, tau{};
        if (total_len_ > 0.0)
            centerline_at(rng.uniform() * total_len_, base, tau);
        else
            base = terminal_;

        // random perpendicular direction
        Vec nrm{};
        double nn = 0.0;
        while (nn < 1e-12) {
            double dot = 0.0;
            for (int d = 0; d < dim_; ++d) {
                nrm[d] = rng.normal();
                dot += nrm[d] * tau[d];
            }
            nn = 0.0;
            for (int d = 0; d < dim_; ++d) {
                nrm[d] -= dot * tau[d];
                nn += nrm[d] * nrm[d];
            }
        }
        const double u = rng.uniform() * r;
        Vec x{};
        for (int d = 0; d < dim_; ++d) x[d] = base[d] + u * nrm[d] / std::sqrt(nn);

        Vec dir{};
        double dn = 0.0;
        while (dn < 1e-12) {
            dn = 0.0;
            for (int d = 0; d < dim_; ++d) {
                dir[d] = rng.normal();
                dn += dir[d] * dir[d];
            }
        }
        Vec y = x;
        for (int d = 0; d < dim_; ++d) y[d] += eps * dir[d] / std::sqrt(dn);

        const Vec fx = groove_force(x);
        const Vec fy = groove_force(y);
        double diff2 = 0.0;
        for (int d = 0; d < dim_; ++d) {
            const double dd = fy[d] - fx[d];
            diff2 += dd * dd;
        }
        sup = std::max(sup, std::sqrt(diff2) / eps);
    }
    return sup;
}

} // namespace difflab::groove
