#pragma once

#include <complex>
#include <vector>

#include "bjj/parallel.hpp"

// Hot data-parallel loops, each with a serial reference path and an OpenMP
// path selected by par::Mode. tools/bench_kernels.cpp times them against each
// other; tests/test_kernels.cpp checks agreement.
namespace bjj::kernels {

using cplx = std::complex<double>;

// G += sum over samples of psi psi^dagger (upper triangle computed, mirrored).
// samples: n_samples rows of length n, row-major. Deterministic for any
// thread count (fixed-block accumulation, block-ordered combine).
void gram_accumulate(const std::vector<cplx>& samples, std::size_t n,
                     std::vector<cplx>& gram, par::Mode mode);

// states <- basis * diag(exp(-i*evals*dt_over_hbar)) * basis^T * states.
// basis is d x d column-major orthogonal, states is d x m column-major.
// Columns are independent; the OpenMP path splits over columns and is
// bit-identical to the serial path.
void propagate_block(const std::vector<double>& basis,
                     const std::vector<double>& evals, double dt_over_hbar,
                     std::vector<cplx>& states, std::size_t d, std::size_t m,
                     par::Mode mode);

// sum of w[i] * |psi[i]|^4 (interaction-energy reduction).
double quartic_density_sum(const std::vector<cplx>& psi, double weight,
                           par::Mode mode);

}  // namespace bjj::kernels
