#include "difflab/kernels.hpp"

#include <cstdlib>
#include <cstring>

namespace difflab::kernels {

SegScanFn seg_scan = &scalar::seg_scan;
ArcScanFn arc_scan = &scalar::arc_scan;
SqDistFn sq_dist = &scalar::sq_dist;

namespace {

Backend g_active = Backend::scalar;

bool cpu_has_avx2() {
#if defined(DIFFLAB_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

struct Init {
    Init() {
        Backend pick = cpu_has_avx2() ? Backend::avx2 : Backend::scalar;
        if (const char* env = std::getenv("DIFFLAB_KERNELS")) {
            if (std::strcmp(env, "scalar") == 0) pick = Backend::scalar;
            else if (std::strcmp(env, "avx2") == 0 && cpu_has_avx2()) pick = Backend::avx2;
        }
        set_backend(pick);
    }
};
Init g_init;

} // namespace

const char* backend_name(Backend b) {
    switch (b) {
        case Backend::scalar: return "scalar";
        case Backend::avx2: return "avx2";
    }
    return "?";
}

bool backend_supported(Backend b) {
    if (b == Backend::scalar) return true;
    return cpu_has_avx2();
}

Backend active_backend() { return g_active; }

void set_backend(Backend b) {
    if (!backend_supported(b))
        throw std::runtime_error(std::string("kernel backend not supported on this CPU: ") +
                                 backend_name(b));
    switch (b) {
        case Backend::scalar:
            seg_scan = &scalar::seg_scan;
            arc_scan = &scalar::arc_scan;
            sq_dist = &scalar::sq_dist;
            break;
        case Backend::avx2:
#ifdef DIFFLAB_HAVE_AVX2
            seg_scan = &avx2::seg_scan;
            arc_scan = &avx2::arc_scan;
            sq_dist = &avx2::sq_dist;
#endif
            break;
    }
    g_active = b;
}

} // namespace difflab::kernels
