// Timing comparison of the serial reference and OpenMP kernel paths.
#include <chrono>
#include <complex>
#include <cstdio>
#include <random>
#include <vector>

#include "bjj/kernels.hpp"
#include "bjj/potential.hpp"

using bjj::kernels::cplx;
using bjj::par::Mode;

namespace {

double now_ms() {
  return std::chrono::duration<double, std::milli>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

template <typename F>
double time_ms(F&& f, int reps) {
  f();  // warm up
  const double t0 = now_ms();
  for (int r = 0; r < reps; ++r) f();
  return (now_ms() - t0) / reps;
}

void report(const char* name, double serial_ms, double omp_ms) {
  std::printf("%-24s serial %9.3f ms   openmp %9.3f ms   speedup %5.2fx\n", name,
              serial_ms, omp_ms, serial_ms / omp_ms);
}

}  // namespace

int main() {
  std::mt19937_64 rng(42);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::printf("threads available: %d\n", omp_get_max_threads());

  {  // one-body density matrix accumulation
    const std::size_t n = 256, samples = 512;
    std::vector<cplx> data(n * samples);
    for (auto& v : data) v = {gauss(rng), gauss(rng)};
    std::vector<cplx> gram(n * n);
    auto run = [&](Mode m) {
      std::fill(gram.begin(), gram.end(), cplx{});
      bjj::kernels::gram_accumulate(data, n, gram, m);
    };
    report("gram_accumulate", time_ms([&] { run(Mode::serial); }, 3),
           time_ms([&] { run(Mode::openmp); }, 3));
  }

  {  // eigenbasis propagation of a state block
    const std::size_t d = 512, m = 48;
    std::vector<double> basis(d * d), evals(d);
    for (auto& v : basis) v = gauss(rng);
    for (auto& v : evals) v = gauss(rng);
    std::vector<cplx> states(d * m);
    for (auto& v : states) v = {gauss(rng), gauss(rng)};
    auto run = [&](Mode mode) {
      auto copy = states;
      bjj::kernels::propagate_block(basis, evals, 1e-3, copy, d, m, mode);
    };
    report("propagate_block", time_ms([&] { run(Mode::serial); }, 3),
           time_ms([&] { run(Mode::openmp); }, 3));
  }

  {  // chip field over a grid of points
    const auto layout = bjj::potential::default_layout();
    std::vector<bjj::Vec3> pts;
    for (int i = 0; i < 20000; ++i)
      pts.push_back({-20e-6 + 40e-6 * i / 20000.0, 0.0, 25e-6});
    std::vector<bjj::Vec3> out(pts.size());
    auto run = [&](Mode m) { bjj::potential::field_batch(layout, pts, out, m); };
    report("field_batch", time_ms([&] { run(Mode::serial); }, 3),
           time_ms([&] { run(Mode::openmp); }, 3));
  }

  {  // interaction-energy reduction
    std::vector<cplx> psi(1 << 18);
    for (auto& v : psi) v = {gauss(rng), gauss(rng)};
    volatile double sink = 0.0;
    auto run = [&](Mode m) {
      sink = bjj::kernels::quartic_density_sum(psi, 0.5, m);
    };
    (void)sink;
    report("quartic_density_sum", time_ms([&] { run(Mode::serial); }, 5),
           time_ms([&] { run(Mode::openmp); }, 5));
  }
  return 0;
}
