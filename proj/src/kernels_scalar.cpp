#include "difflab/kernels.hpp"

#include <algorithm>
#include <cmath>

namespace difflab::kernels::scalar {

// Reference kernels. Straight loops, no tricks; the AVX2 variants must match
// these within floating-point reassociation tolerance.

void seg_scan(const SegmentPack& p, const double* x, double* q, double* tclamp) {
    for (int j = 0; j < p.padded; ++j) {
        double q0 = 0.0;
        double t = 0.0;
        for (int d = 0; d < p.dim; ++d) {
            const double diff = x[d] - p.anchor_dim(d)[j];
            q0 += diff * diff;
            t += p.dir_dim(d)[j] * diff;
        }
        const double c = std::clamp(t, 0.0, p.length[j]);
        // |x - a - c*u|^2 with u a unit vector
        q[j] = q0 - 2.0 * c * t + c * c;
        tclamp[j] = c;
    }
}

void arc_scan(const ArcPack& p, const double* x, double* q, double* xi1, double* xi2) {
    const double R = p.radius;
    for (int j = 0; j < p.padded; ++j) {
        double ncc = 0.0;
        double a = 0.0;
        double b = 0.0;
        for (int d = 0; d < p.dim; ++d) {
            const double diff = x[d] - p.center_dim(d)[j];
            ncc += diff * diff;
            a += p.e1_dim(d)[j] * diff;
            b += p.e2_dim(d)[j] * diff;
        }
        const double rho2 = a * a + b * b;
        const double rho = std::sqrt(rho2);
        // distance to the full circle: off-plane^2 + (rho - R)^2; the
        // consumer restricts attention to the quarter sector via xi1/xi2
        q[j] = ncc - rho2 + (rho - R) * (rho - R);
        xi1[j] = a;
        xi2[j] = b;
    }
}

void sq_dist(const PointPack& p, const double* x, double* q) {
    for (int j = 0; j < p.padded; ++j) {
        double acc = 0.0;
        for (int d = 0; d < p.dim; ++d) {
            const double diff = x[d] - p.pos_dim(d)[j];
            acc += diff * diff;
        }
        q[j] = acc;
    }
}

} // namespace difflab::kernels::scalar
