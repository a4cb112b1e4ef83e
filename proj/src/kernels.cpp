#include "bjj/kernels.hpp"

#include <cmath>

#include "bjj/error.hpp"

namespace bjj::kernels {

namespace {

void gram_accumulate_range(const cplx* samples, std::size_t n_samples,
                           std::size_t n, cplx* gram) {
  for (std::size_t s = 0; s < n_samples; ++s) {
    const cplx* psi = samples + s * n;
    for (std::size_t i = 0; i < n; ++i) {
      const cplx a = psi[i];
      cplx* row = gram + i * n;
      for (std::size_t j = i; j < n; ++j) row[j] += a * std::conj(psi[j]);
    }
  }
}

}  // namespace

void gram_accumulate(const std::vector<cplx>& samples, std::size_t n,
                     std::vector<cplx>& gram, par::Mode mode) {
  require(n > 0 && samples.size() % n == 0, "gram_accumulate: bad sample layout");
  require(gram.size() == n * n, "gram_accumulate: bad gram size");
  const std::size_t n_samples = samples.size() / n;

  if (par::can_parallelize(mode) && n_samples >= 2 * par::reduction_blocks) {
    std::vector<std::vector<cplx>> partial(par::reduction_blocks);
#pragma omp parallel for schedule(static)
    for (std::size_t b = 0; b < par::reduction_blocks; ++b) {
      const auto r = par::block_range(n_samples, b);
      partial[b].assign(n * n, cplx{});
      gram_accumulate_range(samples.data() + r.begin * n, r.end - r.begin, n,
                            partial[b].data());
    }
    for (std::size_t b = 0; b < par::reduction_blocks; ++b)
      for (std::size_t q = 0; q < n * n; ++q) gram[q] += partial[b][q];
  } else {
    gram_accumulate_range(samples.data(), n_samples, n, gram.data());
  }
  // mirror the upper triangle
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) gram[j * n + i] = std::conj(gram[i * n + j]);
}

namespace {

void propagate_column(const double* basis, const cplx* phase, std::size_t d,
                      const cplx* in, cplx* out, cplx* work) {
  // work = basis^T * in
  for (std::size_t k = 0; k < d; ++k) {
    const double* col = basis + k * d;
    cplx acc{};
    for (std::size_t i = 0; i < d; ++i) acc += col[i] * in[i];
    work[k] = acc * phase[k];
  }
  // out = basis * work
  for (std::size_t i = 0; i < d; ++i) out[i] = cplx{};
  for (std::size_t k = 0; k < d; ++k) {
    const double* col = basis + k * d;
    const cplx w = work[k];
    for (std::size_t i = 0; i < d; ++i) out[i] += col[i] * w;
  }
}

}  // namespace

void propagate_block(const std::vector<double>& basis,
                     const std::vector<double>& evals, double dt_over_hbar,
                     std::vector<cplx>& states, std::size_t d, std::size_t m,
                     par::Mode mode) {
  require(basis.size() == d * d, "propagate_block: bad basis size");
  require(evals.size() == d, "propagate_block: bad eigenvalue count");
  require(states.size() == d * m, "propagate_block: bad state block size");

  std::vector<cplx> phase(d);
  for (std::size_t k = 0; k < d; ++k) {
    const double th = -evals[k] * dt_over_hbar;
    phase[k] = {std::cos(th), std::sin(th)};
  }

  if (par::can_parallelize(mode)) {
#pragma omp parallel
    {
      std::vector<cplx> in(d), work(d);
#pragma omp for schedule(static)
      for (std::size_t c = 0; c < m; ++c) {
        cplx* col = states.data() + c * d;
        std::copy(col, col + d, in.begin());
        propagate_column(basis.data(), phase.data(), d, in.data(), col, work.data());
      }
    }
  } else {
    std::vector<cplx> in(d), work(d);
    for (std::size_t c = 0; c < m; ++c) {
      cplx* col = states.data() + c * d;
      std::copy(col, col + d, in.begin());
      propagate_column(basis.data(), phase.data(), d, in.data(), col, work.data());
    }
  }
}

double quartic_density_sum(const std::vector<cplx>& psi, double weight,
                           par::Mode mode) {
  return weight * par::blocked_sum(psi.size(), mode, [&](std::size_t i) {
           const double d = std::norm(psi[i]);
           return d * d;
         });
}

}  // namespace bjj::kernels
