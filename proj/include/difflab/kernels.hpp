#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

// Distance-scan kernels. These are the arithmetic inner loops of the whole
// lab: per integration step the force-field evaluator scans every groove
// segment and fillet arc for squared distances, and the diffusion sampler
// scans every mixture component. Data lives in padded structure-of-arrays
// form (one contiguous array per coordinate) so the AVX2 variants can
// process four entries per lane. A scalar reference implementation is
// always available and the two are equivalence-tested.

namespace difflab::kernels {

constexpr int kLaneWidth = 4; // doubles per 256-bit vector
constexpr double kPadAnchor = 1e15; // pad slots land at a huge distance

inline int padded_count(int n) {
    return (n + kLaneWidth - 1) / kLaneWidth * kLaneWidth;
}

// Axis-aligned (or general unit-direction) segments: anchor a, unit
// direction u, length len. Squared distance to the segment plus the clamped
// projection parameter come out of the scan.
struct SegmentPack {
    int dim = 0;
    int count = 0;
    int padded = 0;
    std::vector<double> anchor; // dim * padded, coordinate-major
    std::vector<double> dir;    // dim * padded
    std::vector<double> length; // padded

    void resize(int d, int n) {
        dim = d;
        count = n;
        padded = padded_count(n);
        anchor.assign(static_cast<size_t>(dim) * padded, kPadAnchor);
        dir.assign(static_cast<size_t>(dim) * padded, 0.0);
        length.assign(padded, 0.0);
    }
    double* anchor_dim(int d) { return anchor.data() + static_cast<size_t>(d) * padded; }
    double* dir_dim(int d) { return dir.data() + static_cast<size_t>(d) * padded; }
    const double* anchor_dim(int d) const { return anchor.data() + static_cast<size_t>(d) * padded; }
    const double* dir_dim(int d) const { return dir.data() + static_cast<size_t>(d) * padded; }
};

// Fillet circles: center c, orthonormal in-plane basis (e1, e2), common
// radius. The scan measures the full circle; the in-plane projections xi1,
// xi2 let the consumer restrict to the quarter sector from c + R*e1 to
// c + R*e2 with a smooth fade.
struct ArcPack {
    int dim = 0;
    int count = 0;
    int padded = 0;
    double radius = 0.0;
    std::vector<double> center; // dim * padded
    std::vector<double> e1;     // dim * padded
    std::vector<double> e2;     // dim * padded

    void resize(int d, int n) {
        dim = d;
        count = n;
        padded = padded_count(n);
        center.assign(static_cast<size_t>(dim) * padded, kPadAnchor);
        e1.assign(static_cast<size_t>(dim) * padded, 0.0);
        e2.assign(static_cast<size_t>(dim) * padded, 0.0);
    }
    double* center_dim(int d) { return center.data() + static_cast<size_t>(d) * padded; }
    double* e1_dim(int d) { return e1.data() + static_cast<size_t>(d) * padded; }
    double* e2_dim(int d) { return e2.data() + static_cast<size_t>(d) * padded; }
    const double* center_dim(int d) const { return center.data() + static_cast<size_t>(d) * padded; }
    const double* e1_dim(int d) const { return e1.data() + static_cast<size_t>(d) * padded; }
    const double* e2_dim(int d) const { return e2.data() + static_cast<size_t>(d) * padded; }
};

// Plain point sets (mixture component means, quantizer centroids).
struct PointPack {
    int dim = 0;
    int count = 0;
    int padded = 0;
    std::vector<double> pos; // dim * padded

    void resize(int d, int n) {
        dim = d;
        count = n;
        padded = padded_count(n);
        pos.assign(static_cast<size_t>(dim) * padded, kPadAnchor);
    }
    double* pos_dim(int d) { return pos.data() + static_cast<size_t>(d) * padded; }
    const double* pos_dim(int d) const { return pos.data() + static_cast<size_t>(d) * padded; }
};

// Output buffers must hold `padded` doubles; entries past `count` are junk.
using SegScanFn = void (*)(const SegmentPack&, const double* x, double* q, double* tclamp);
using ArcScanFn = void (*)(const ArcPack&, const double* x, double* q, double* xi1, double* xi2);
using SqDistFn = void (*)(const PointPack&, const double* x, double* q);

enum class Backend { scalar, avx2 };

const char* backend_name(Backend b);
bool backend_supported(Backend b);
Backend active_backend();
// Throws std::runtime_error if the backend is not supported on this CPU.
// The DIFFLAB_KERNELS environment variable ("scalar" / "avx2") picks the
// initial backend; otherwise the best supported one is used.
void set_backend(Backend b);

// Dispatched entry points.
extern SegScanFn seg_scan;
extern ArcScanFn arc_scan;
extern SqDistFn sq_dist;

namespace scalar {
void seg_scan(const SegmentPack&, const double* x, double* q, double* tclamp);
void arc_scan(const ArcPack&, const double* x, double* q, double* xi1, double* xi2);
void sq_dist(const PointPack&, const double* x, double* q);
} // namespace scalar

#ifdef DIFFLAB_HAVE_AVX2
namespace avx2 {
void seg_scan(const SegmentPack&, const double* x, double* q, double* tclamp);
void arc_scan(const ArcPack&, const double* x, double* q, double* xi1, double* xi2);
void sq_dist(const PointPack&, const double* x, double* q);
} // namespace avx2
#endif

} // namespace difflab::kernels
