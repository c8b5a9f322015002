#include "synergraph/parallel.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cstdlib>
#include <mutex>
#include <string>

#ifdef SYNERGRAPH_HAVE_OPENMP
#include <omp.h>
#endif

namespace synergraph {
namespace {

int g_threads = 0;
std::once_flag g_init;

int default_threads() {
    if (const char* env = std::getenv("SYNERGRAPH_THREADS")) {
        try {
            const int n = std::stoi(env);
            if (n > 0) return n;
        } catch (const std::exception&) {
        }
    }
#ifdef SYNERGRAPH_HAVE_OPENMP
    return std::max(1, omp_get_max_threads());
#else
    return 1;
#endif
}

void apply(int n) {
    g_threads = n;
#ifdef SYNERGRAPH_HAVE_OPENMP
    omp_set_num_threads(n);
#endif
    Eigen::setNbThreads(n);
}

}  // namespace

int worker_threads() {
    std::call_once(g_init, [] { apply(default_threads()); });
    return g_threads;
}

void set_worker_threads(int n) {
    std::call_once(g_init, [] { apply(default_threads()); });
    apply(std::max(1, n));
}

}  // namespace synergraph
