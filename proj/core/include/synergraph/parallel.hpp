#pragma once

namespace synergraph {

/// Number of worker threads used by row-parallel kernels.
/// Reads SYNERGRAPH_THREADS once; falls back to the OpenMP default.
int worker_threads();

/// Overrides the worker count for OpenMP loops and Eigen products.
void set_worker_threads(int n);

}  // namespace synergraph
