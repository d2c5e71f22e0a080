#pragma once

#include <cstddef>
#include <exception>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace corrpair {

// Kernels come in a serial reference form and an OpenMP form. Both produce
// identical results; the serial one is kept for tests and benchmarks.
enum class Backend { Serial, OpenMP };

inline int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

inline void set_threads(int n) {
#ifdef _OPENMP
  if (n > 0) omp_set_num_threads(n);
#else
  (void)n;
#endif
}

// results[i] = fn(i), evaluated in any order, stored by index.
template <class T, class Fn>
std::vector<T> map_indexed(std::size_t count, Fn&& fn, Backend backend = Backend::OpenMP) {
  std::vector<T> results(count);
  if (backend == Backend::Serial) {
    for (std::size_t i = 0; i < count; ++i) results[i] = fn(i);
    return results;
  }
  std::exception_ptr error;
  const long long total = static_cast<long long>(count);
#pragma omp parallel for schedule(dynamic)
  for (long long i = 0; i < total; ++i) {
    try {
      results[static_cast<std::size_t>(i)] = fn(static_cast<std::size_t>(i));
    } catch (...) {
#pragma omp critical(corrpair_map_error)
      if (!error) error = std::current_exception();
    }
  }
  if (error) std::rethrow_exception(error);
  return results;
}

}  // namespace corrpair
