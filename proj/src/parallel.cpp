#include "edpred/parallel.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

#include <algorithm>
#include <atomic>

namespace edpred::par {

namespace {
std::atomic<int> g_max_threads{0};
}

int max_threads() { return g_max_threads.load(); }

void set_max_threads(int n) { g_max_threads.store(n < 0 ? 0 : n); }

int threads_for(std::int64_t n) {
#ifdef _OPENMP
    int nt = g_max_threads.load();
    if (nt == 0) nt = omp_get_max_threads();
    if (n < nt) nt = static_cast<int>(n);
    return std::max(1, nt);
#else
    (void)n;
    return 1;
#endif
}

}  // namespace edpred::par
