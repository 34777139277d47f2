#pragma once

#include <cstdint>

// Thin OpenMP layer. Every kernel built on parallel_for writes disjoint
// output slots and performs no cross-iteration floating-point reduction,
// so results are identical for any thread count (serial included).

namespace edpred::par {

// Global worker cap. 0 means "use OpenMP default".
int max_threads();
void set_max_threads(int n);

// Effective thread count for a loop of n iterations.
int threads_for(std::int64_t n);

template <class F>
void parallel_for(std::int64_t n, F&& body) {
    const int nt = threads_for(n);
    if (nt <= 1) {
        for (std::int64_t i = 0; i < n; ++i) body(i);
        return;
    }
#pragma omp parallel for num_threads(nt) schedule(static)
    for (std::int64_t i = 0; i < n; ++i) body(i);
}

}  // namespace edpred::par
