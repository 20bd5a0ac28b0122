#ifdef DIFFLAB_HAVE_AVX2

#include "difflab/kernels.hpp"

#include <immintrin.h>

namespace difflab::kernels::avx2 {

// Four segments / arcs / points per iteration, coordinate-major loads.

void seg_scan(const SegmentPack& p, const double* x, double* q, double* tclamp) {
    const __m256d zero = _mm256_setzero_pd();
    const __m256d two = _mm256_set1_pd(2.0);
    for (int j = 0; j < p.padded; j += kLaneWidth) {
        __m256d q0 = zero;
        __m256d t = zero;
        for (int d = 0; d < p.dim; ++d) {
            const __m256d xd = _mm256_set1_pd(x[d]);
            const __m256d a = _mm256_loadu_pd(p.anchor_dim(d) + j);
            const __m256d u = _mm256_loadu_pd(p.dir_dim(d) + j);
            const __m256d diff = _mm256_sub_pd(xd, a);
            q0 = _mm256_fmadd_pd(diff, diff, q0);
            t = _mm256_fmadd_pd(u, diff, t);
        }
        const __m256d len = _mm256_loadu_pd(p.length.data() + j);
        const __m256d c = _mm256_min_pd(_mm256_max_pd(t, zero), len);
        const __m256d two_ct = _mm256_mul_pd(_mm256_mul_pd(two, c), t);
        const __m256d qv = _mm256_fmadd_pd(c, c, _mm256_sub_pd(q0, two_ct));
        _mm256_storeu_pd(q + j, qv);
        _mm256_storeu_pd(tclamp + j, c);
    }
}

void arc_scan(const ArcPack& p, const double* x, double* q, double* xi1, double* xi2) {
    const __m256d zero = _mm256_setzero_pd();
    const __m256d R = _mm256_set1_pd(p.radius);
    for (int j = 0; j < p.padded; j += kLaneWidth) {
        __m256d ncc = zero;
        __m256d a = zero;
        __m256d b = zero;
        for (int d = 0; d < p.dim; ++d) {
            const __m256d xd = _mm256_set1_pd(x[d]);
            const __m256d c = _mm256_loadu_pd(p.center_dim(d) + j);
            const __m256d u1 = _mm256_loadu_pd(p.e1_dim(d) + j);
            const __m256d u2 = _mm256_loadu_pd(p.e2_dim(d) + j);
            const __m256d diff = _mm256_sub_pd(xd, c);
            ncc = _mm256_fmadd_pd(diff, diff, ncc);
            a = _mm256_fmadd_pd(u1, diff, a);
            b = _mm256_fmadd_pd(u2, diff, b);
        }
        const __m256d rho2 = _mm256_fmadd_pd(a, a, _mm256_mul_pd(b, b));
        const __m256d rho = _mm256_sqrt_pd(rho2);
        const __m256d drho = _mm256_sub_pd(rho, R);
        const __m256d qv = _mm256_fmadd_pd(drho, drho, _mm256_sub_pd(ncc, rho2));
        _mm256_storeu_pd(q + j, qv);
        _mm256_storeu_pd(xi1 + j, a);
        _mm256_storeu_pd(xi2 + j, b);
    }
}

void sq_dist(const PointPack& p, const double* x, double* q) {
    const __m256d zero = _mm256_setzero_pd();
    for (int j = 0; j < p.padded; j += kLaneWidth) {
        __m256d acc = zero;
        for (int d = 0; d < p.dim; ++d) {
            const __m256d xd = _mm256_set1_pd(x[d]);
            const __m256d pt = _mm256_loadu_pd(p.pos_dim(d) + j);
            const __m256d diff = _mm256_sub_pd(xd, pt);
            acc = _mm256_fmadd_pd(diff, diff, acc);
        }
        _mm256_storeu_pd(q + j, acc);
    }
}

} // namespace difflab::kernels::avx2

#endif // DIFFLAB_HAVE_AVX2
