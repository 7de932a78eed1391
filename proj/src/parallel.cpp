// SPDX-License-Identifier: Apache-2.0
#include "muonvr/parallel.hpp"

#include <atomic>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace muonvr {

namespace {
std::atomic<int> g_max_threads{0};
}

void set_max_threads(int n) { g_max_threads.store(n < 0 ? 0 : n); }

int max_threads() { return g_max_threads.load(); }

int effective_threads() {
#ifdef _OPENMP
  const int cap = g_max_threads.load();
  const int avail = omp_get_max_threads();
  return cap > 0 && cap < avail ? cap : avail;
#else
  return 1;
#endif
}

void parallel_for(long n, const std::function<void(long)>& body) {
  if (n <= 0) return;
#ifdef _OPENMP
  const int threads = effective_threads();
  if (threads > 1 && n > 1) {
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
    for (long i = 0; i < n; ++i) body(i);
    return;
  }
#endif
  for (long i = 0; i < n; ++i) body(i);
}

}  // namespace muonvr
