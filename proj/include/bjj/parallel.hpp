#pragma once

#include <cstddef>
#include <omp.h>

// Execution policy shared by the data-parallel kernels. Every kernel has a
// serial reference path and an OpenMP path; tests compare the two and the
// bench_kernels tool times them. Reductions are organized in a fixed number
// of index blocks combined in block order, so results do not depend on the
// number of threads.
namespace bjj::par {

enum class Mode { serial, openmp };

inline Mode& default_mode() {
  static Mode m = Mode::openmp;
  return m;
}

inline void set_default_mode(Mode m) { default_mode() = m; }

// Nested parallel regions are never opened: a kernel invoked from inside an
// OpenMP region falls back to its serial path.
inline bool can_parallelize(Mode m) {
  return m == Mode::openmp && !omp_in_parallel();
}

inline constexpr std::size_t reduction_blocks = 64;

struct BlockRange {
  std::size_t begin, end;
};

inline BlockRange block_range(std::size_t n, std::size_t block) {
  const std::size_t base = n / reduction_blocks;
  const std::size_t rem = n % reduction_blocks;
  const std::size_t b0 = block * base + (block < rem ? block : rem);
  const std::size_t len = base + (block < rem ? 1 : 0);
  return {b0, b0 + len};
}

// Deterministic sum of f(i) for i in [0,n): per-block serial sums combined in
// block order. Identical result for any thread count.
template <typename F>
double blocked_sum(std::size_t n, Mode mode, F&& f) {
  double partial[reduction_blocks] = {0.0};
  if (can_parallelize(mode)) {
#pragma omp parallel for schedule(static)
    for (std::size_t b = 0; b < reduction_blocks; ++b) {
      const auto r = block_range(n, b);
      double s = 0.0;
      for (std::size_t i = r.begin; i < r.end; ++i) s += f(i);
      partial[b] = s;
    }
  } else {
    for (std::size_t b = 0; b < reduction_blocks; ++b) {
      const auto r = block_range(n, b);
      double s = 0.0;
      for (std::size_t i = r.begin; i < r.end; ++i) s += f(i);
      partial[b] = s;
    }
  }
  double total = 0.0;
  for (std::size_t b = 0; b < reduction_blocks; ++b) total += partial[b];
  return total;
}

// Independent iterations, no reduction.
template <typename F>
void parallel_for(std::size_t n, Mode mode, F&& f) {
  if (can_parallelize(mode)) {
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < n; ++i) f(i);
  } else {
    for (std::size_t i = 0; i < n; ++i) f(i);
  }
}

}  // namespace bjj::par
