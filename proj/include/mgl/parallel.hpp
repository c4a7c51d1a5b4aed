#pragma once

#include <algorithm>
#include <cstdlib>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace mgl {

// Number of worker threads for parallel loops. GLM_THREADS caps the
// OpenMP default; without OpenMP everything runs on one thread.
inline int thread_count() {
#ifdef _OPENMP
    int threads = omp_get_max_threads();
#else
    int threads = 1;
#endif
    if (const char* env = std::getenv("GLM_THREADS")) {
        try {
            int cap = std::stoi(env);
            if (cap >= 1) threads = std::min(threads, cap);
        } catch (...) {
            // unparsable value: ignore the cap
        }
    }
    return std::max(threads, 1);
}

} // namespace mgl
