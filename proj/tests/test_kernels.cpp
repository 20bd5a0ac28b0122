#include "difflab/kernels.hpp"
#include "difflab/rng.hpp"

#include <doctest.h>

#include <cmath>
#include <vector>

using namespace difflab;
using namespace difflab::kernels;

namespace {

// brute-force oracles, independent of the kernel code paths

double seg_dist2_brute(const std::vector<double>& a, const std::vector<double>& u, double len,
                       const std::vector<double>& x) {
    // dense sample along the segment; fine enough for oracle tolerances
    double best = 1e300;
    const int n = 20000;
    for (int i = 0; i <= n; ++i) {
        const double t = len * i / n;
        double q = 0.0;
        for (size_t d = 0; d < x.size(); ++d) {
            const double diff = x[d] - (a[d] + t * u[d]);
            q += diff * diff;
        }
        best = std::min(best, q);
    }
    return best;
}

double arc_dist2_brute(const std::vector<double>& c, const std::vector<double>& e1,
                       const std::vector<double>& e2, double R, const std::vector<double>& x) {
    double best = 1e300;
    const int n = 20000;
    for (int i = 0; i <= n; ++i) {
        const double th = 1.5707963267948966 * i / n;
        double q = 0.0;
        for (size_t d = 0; d < x.size(); ++d) {
            const double p = c[d] + R * (std::cos(th) * e1[d] + std::sin(th) * e2[d]);
            const double diff = x[d] - p;
            q += diff * diff;
        }
        best = std::min(best, q);
    }
    return best;
}

SegmentPack random_segments(Rng& rng, int dim, int count) {
    SegmentPack p;
    p.resize(dim, count);
    for (int j = 0; j < count; ++j) {
        const int axis = static_cast<int>(rng.below(dim));
        const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
        for (int d = 0; d < dim; ++d) {
            p.anchor_dim(d)[j] = 4.0 * rng.normal();
            p.dir_dim(d)[j] = d == axis ? sign : 0.0;
        }
        p.length[j] = 0.5 + 5.0 * rng.uniform();
    }
    return p;
}

ArcPack random_arcs(Rng& rng, int dim, int count, double R) {
    ArcPack p;
    p.resize(dim, count);
    p.radius = R;
    for (int j = 0; j < count; ++j) {
        int a1 = static_cast<int>(rng.below(dim));
        int a2 = static_cast<int>(rng.below(dim));
        while (a2 == a1) a2 = static_cast<int>(rng.below(dim));
        const double s1 = rng.uniform() < 0.5 ? -1.0 : 1.0;
        const double s2 = rng.uniform() < 0.5 ? -1.0 : 1.0;
        for (int d = 0; d < dim; ++d) {
            p.center_dim(d)[j] = 4.0 * rng.normal();
            p.e1_dim(d)[j] = d == a1 ? s1 : 0.0;
            p.e2_dim(d)[j] = d == a2 ? s2 : 0.0;
        }
    }
    return p;
}

} // namespace

TEST_CASE("segment scan matches a brute-force oracle") {
    Rng rng(123);
    const int dim = 5;
    SegmentPack p = random_segments(rng, dim, 7);
    std::vector<double> q(p.padded), t(p.padded);
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<double> x(16, 0.0);
        for (int d = 0; d < dim; ++d) x[d] = 6.0 * rng.normal();
        scalar::seg_scan(p, x.data(), q.data(), t.data());
        for (int j = 0; j < p.count; ++j) {
            std::vector<double> a(dim), u(dim), xs(dim);
            for (int d = 0; d < dim; ++d) {
                a[d] = p.anchor_dim(d)[j];
                u[d] = p.dir_dim(d)[j];
                xs[d] = x[d];
            }
            const double oracle = seg_dist2_brute(a, u, p.length[j], xs);
            CHECK(q[j] == doctest::Approx(oracle).epsilon(1e-6));
            CHECK(t[j] >= 0.0);
            CHECK(t[j] <= p.length[j]);
        }
    }
}

TEST_CASE("arc scan matches a brute-force oracle") {
    Rng rng(321);
    const int dim = 5;
    ArcPack p = random_arcs(rng, dim, 6, 0.75);
    std::vector<double> q(p.padded), xi1(p.padded), xi2(p.padded);
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<double> x(16, 0.0);
        for (int d = 0; d < dim; ++d) x[d] = 3.0 * rng.normal();
        scalar::arc_scan(p, x.data(), q.data(), xi1.data(), xi2.data());
        for (int j = 0; j < p.count; ++j) {
            std::vector<double> c(dim), e1(dim), e2(dim), xs(dim);
            for (int d = 0; d < dim; ++d) {
                c[d] = p.center_dim(d)[j];
                e1[d] = p.e1_dim(d)[j];
                e2[d] = p.e2_dim(d)[j];
                xs[d] = x[d];
            }
            const double oracle = arc_dist2_brute(c, e1, e2, p.radius, xs);
            CHECK(q[j] == doctest::Approx(oracle).epsilon(1e-6));
        }
    }
}

TEST_CASE("point scan computes squared distances") {
    Rng rng(77);
    const int dim = 3;
    PointPack p;
    p.resize(dim, 5);
    for (int j = 0; j < 5; ++j)
        for (int d = 0; d < dim; ++d) p.pos_dim(d)[j] = rng.normal();
    std::vector<double> x(16, 0.0);
    for (int d = 0; d < dim; ++d) x[d] = rng.normal();
    std::vector<double> q(p.padded);
    scalar::sq_dist(p, x.data(), q.data());
    for (int j = 0; j < 5; ++j) {
        double expect = 0.0;
        for (int d = 0; d < dim; ++d) {
            const double diff = x[d] - p.pos_dim(d)[j];
            expect += diff * diff;
        }
        CHECK(q[j] == doctest::Approx(expect).epsilon(1e-14));
    }
}

#ifdef DIFFLAB_HAVE_AVX2
TEST_CASE("avx2 kernels agree with the scalar reference") {
    if (!backend_supported(Backend::avx2)) {
        MESSAGE("avx2 not supported on this CPU; skipping");
        return;
    }
    Rng rng(999);
    for (int dim : {2, 4, 5, 8}) {
        for (int count : {1, 3, 4, 9, 33}) {
            SegmentPack sp = random_segments(rng, dim, count);
            ArcPack ap = random_arcs(rng, dim, count, 0.4 + rng.uniform());
            PointPack pp;
            pp.resize(dim, count);
            for (int j = 0; j < count; ++j)
                for (int d = 0; d < dim; ++d) pp.pos_dim(d)[j] = 3.0 * rng.normal();

            std::vector<double> qa(sp.padded), ta(sp.padded), qb(sp.padded), tb(sp.padded);
            std::vector<double> qa2(ap.padded), x1a(ap.padded), x2a(ap.padded);
            std::vector<double> qb2(ap.padded), x1b(ap.padded), x2b(ap.padded);
            std::vector<double> pa(pp.padded), pb(pp.padded);
            for (int trial = 0; trial < 10; ++trial) {
                std::vector<double> x(16, 0.0);
                for (int d = 0; d < dim; ++d) x[d] = 5.0 * rng.normal();

                scalar::seg_scan(sp, x.data(), qa.data(), ta.data());
                avx2::seg_scan(sp, x.data(), qb.data(), tb.data());
                scalar::arc_scan(ap, x.data(), qa2.data(), x1a.data(), x2a.data());
                avx2::arc_scan(ap, x.data(), qb2.data(), x1b.data(), x2b.data());
                scalar::sq_dist(pp, x.data(), pa.data());
                avx2::sq_dist(pp, x.data(), pb.data());

                for (int j = 0; j < count; ++j) {
                    CHECK(qa[j] == doctest::Approx(qb[j]).epsilon(1e-10));
                    CHECK(ta[j] == doctest::Approx(tb[j]).epsilon(1e-10));
                    CHECK(qa2[j] == doctest::Approx(qb2[j]).epsilon(1e-10));
                    CHECK(x1a[j] == doctest::Approx(x1b[j]).epsilon(1e-10));
                    CHECK(x2a[j] == doctest::Approx(x2b[j]).epsilon(1e-10));
                    CHECK(pa[j] == doctest::Approx(pb[j]).epsilon(1e-10));
                }
            }
        }
    }
}
#endif

TEST_CASE("backend selection") {
    const Backend before = active_backend();
    CHECK(backend_supported(Backend::scalar));
    set_backend(Backend::scalar);
    CHECK(active_backend() == Backend::scalar);
    if (backend_supported(Backend::avx2)) {
        set_backend(Backend::avx2);
        CHECK(active_backend() == Backend::avx2);
    }
    set_backend(before);
}
