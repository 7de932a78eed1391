// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>

namespace muonvr {

// Global cap on worker threads used by the OpenMP kernels and the
// seed sweeps.  0 means "use the OpenMP default".  Results never
// depend on the thread count: every parallel loop writes disjoint
// slots and reductions run in a fixed order afterwards.
void set_max_threads(int n);
int max_threads();

// Number of threads a parallel region would actually use.
int effective_threads();

// Runs body(i) for i in [0, n).  Parallel when OpenMP is available
// and n is worth splitting; bodies must not touch shared state.
void parallel_for(long n, const std::function<void(long)>& body);

}  // namespace muonvr
