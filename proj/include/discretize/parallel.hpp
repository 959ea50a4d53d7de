#pragma once

#include <cstddef>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace discretize::parallel {

/// Reductions split rows into fixed-size chunks so the summation order, and
/// therefore the rounding, does not depend on the thread count.
inline constexpr std::size_t kChunkRows = 4096;

inline int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

inline void set_threads(int n) {
#ifdef _OPENMP
  omp_set_num_threads(n);
#else
  (void)n;
#endif
}

/// Sums width-wide vectors produced per row: body(i, acc) adds row i into acc.
template <class Body>
std::vector<double> chunked_sum(std::size_t n_rows, std::size_t width, Body body) {
  const std::size_t n_chunks = (n_rows + kChunkRows - 1) / kChunkRows;
  std::vector<double> partial(n_chunks * width, 0.0);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t c = 0; c < static_cast<std::ptrdiff_t>(n_chunks); ++c) {
    double* acc = partial.data() + static_cast<std::size_t>(c) * width;
    const std::size_t begin = static_cast<std::size_t>(c) * kChunkRows;
    const std::size_t end = begin + kChunkRows < n_rows ? begin + kChunkRows : n_rows;
    for (std::size_t i = begin; i < end; ++i) body(i, acc);
  }
  std::vector<double> total(width, 0.0);
  for (std::size_t c = 0; c < n_chunks; ++c)
    for (std::size_t j = 0; j < width; ++j) total[j] += partial[c * width + j];
  return total;
}

}  // namespace discretize::parallel
