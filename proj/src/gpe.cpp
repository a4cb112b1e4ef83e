#include "bjj/gpe.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <sstream>

#include "bjj/error.hpp"

namespace bjj::gpe {

using constants::hbar;
using constants::pi;

GpeParams GpeParams::three_d(double n_atoms, double mass, double a) {
  GpeParams p;
  p.mass = mass;
  p.a_scatt = a;
  p.atom_number = n_atoms;
  p.coupling = 4.0 * pi * hbar * hbar * a / mass;
  return p;
}

GpeParams GpeParams::quasi_1d(double n_atoms, double f_perp_hz, double mass,
                              double a) {
  GpeParams p;
  p.mass = mass;
  p.a_scatt = a;
  p.atom_number = n_atoms;
  p.coupling = 2.0 * hbar * (2.0 * pi * f_perp_hz) * a;
  return p;
}

double Wavefunction::norm_squared() const {
  double s = 0.0;
  for (const auto& a : amp) s += std::norm(a);
  return s * grid.cell_volume();
}

void Wavefunction::normalize(double n_atoms) {
  const double n2 = norm_squared();
  require(n2 > 0.0, "wavefunction: zero norm");
  const double scale = std::sqrt(n_atoms / n2);
  for (auto& a : amp) a *= scale;
}

namespace {

// FFTW plans are created under a global lock (the planner is not thread
// safe); execution is safe concurrently.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

class Fft {
 public:
  explicit Fft(const Grid& g) : grid_(g), buf_(g.size()) {
    std::lock_guard<std::mutex> lock(planner_mutex());
    auto* data = reinterpret_cast<fftw_complex*>(buf_.data());
    if (g.dims == 1) {
      fwd_ = fftw_plan_dft_1d(g.points[0], data, data, FFTW_FORWARD, FFTW_ESTIMATE);
      bwd_ = fftw_plan_dft_1d(g.points[0], data, data, FFTW_BACKWARD, FFTW_ESTIMATE);
    } else {
      fwd_ = fftw_plan_dft_3d(g.points[2], g.points[1], g.points[0], data, data,
                              FFTW_FORWARD, FFTW_ESTIMATE);
      bwd_ = fftw_plan_dft_3d(g.points[2], g.points[1], g.points[0], data, data,
                              FFTW_BACKWARD, FFTW_ESTIMATE);
    }
  }
  ~Fft() {
    std::lock_guard<std::mutex> lock(planner_mutex());
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(bwd_);
  }
  Fft(const Fft&) = delete;
  Fft& operator=(const Fft&) = delete;

  std::vector<cplx>& buffer() { return buf_; }
  void forward() { fftw_execute(fwd_); }
  // normalized inverse
  void backward() {
    fftw_execute(bwd_);
    const double s = 1.0 / static_cast<double>(grid_.size());
    for (auto& v : buf_) v *= s;
  }

 private:
  Grid grid_;
  std::vector<cplx> buf_;
  fftw_plan fwd_, bwd_;
};

// hbar^2 k^2 / 2m on the FFT-ordered grid
std::vector<double> kinetic_table(const Grid& g, double mass) {
  std::vector<double> t(g.size());
  const int nx = g.points[0], ny = g.points[1], nz = g.points[2];
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i) {
        double k2 = g.wavenumber(0, i) * g.wavenumber(0, i);
        if (g.dims == 3) {
          k2 += g.wavenumber(1, j) * g.wavenumber(1, j);
          k2 += g.wavenumber(2, k) * g.wavenumber(2, k);
        }
        t[g.index(i, j, k)] = hbar * hbar * k2 / (2.0 * mass);
      }
  return t;
}

void project_parity(std::vector<cplx>& a, const Grid& g, Parity parity) {
  if (parity == Parity::none) return;
  const double sign = (parity == Parity::even) ? 1.0 : -1.0;
  const int nx = g.points[0], ny = g.points[1], nz = g.points[2];
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i <= nx / 2; ++i) {
        const int ir = (nx - i) % nx;  // x -> -x on the periodic grid
        if (ir == i) {
          if (parity == Parity::odd) a[g.index(i, j, k)] = 0.0;
          continue;
        }
        const cplx u = a[g.index(i, j, k)];
        const cplx v = a[g.index(ir, j, k)];
        const cplx s = 0.5 * (u + sign * v);
        a[g.index(i, j, k)] = s;
        a[g.index(ir, j, k)] = sign * s;
      }
}

double max_abs(const std::vector<cplx>& a) {
  double m = 0.0;
  for (const auto& v : a) m = std::max(m, std::abs(v));
  return m;
}

double boundary_fraction(const std::vector<cplx>& a, const Grid& g) {
  const int nx = g.points[0], ny = g.points[1], nz = g.points[2];
  double peak = max_abs(a), edge = 0.0;
  auto upd = [&](int i, int j, int k) {
    edge = std::max(edge, std::abs(a[g.index(i, j, k)]));
  };
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < ny; ++j) {
      upd(0, j, k);
      upd(nx - 1, j, k);
    }
  if (g.dims == 3) {
    for (int k = 0; k < nz; ++k)
      for (int i = 0; i < nx; ++i) {
        upd(i, 0, k);
        upd(i, ny - 1, k);
      }
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i) {
        upd(i, j, 0);
        upd(i, j, nz - 1);
      }
  }
  return peak > 0 ? edge / peak : 0.0;
}

EnergyBreakdown measure_energy(Fft& fft, const std::vector<cplx>& psi,
                               const std::vector<double>& kin,
                               const std::vector<double>& pot,
                               const Grid& grid, double g_coupling) {
  const double dv = grid.cell_volume();
  EnergyBreakdown e;
  for (std::size_t q = 0; q < psi.size(); ++q) {
    const double d = std::norm(psi[q]);
    e.potential += pot[q] * d;
    e.interaction += 0.5 * g_coupling * d * d;
  }
  e.potential *= dv;
  e.interaction *= dv;
  auto& buf = fft.buffer();
  buf = psi;
  fft.forward();
  double ek = 0.0;
  for (std::size_t q = 0; q < buf.size(); ++q) ek += kin[q] * std::norm(buf[q]);
  e.kinetic = ek * dv / static_cast<double>(grid.size());
  return e;
}

struct StageResult {
  EnergyBreakdown energy;
  long iterations;
};

// One relaxation stage. A step that raises the energy (possible for the
// split scheme at coarse dt) is reverted and retried at half the step, so the
// recorded energy sequence is nonincreasing.
StageResult relax_stage(Fft& fft, std::vector<cplx>& psi,
                        const std::vector<double>& kin,
                        const std::vector<double>& pot, const Grid& grid,
                        const GpeParams& params, Parity parity, double dt,
                        double tol, long max_iter, bool check_monotonic) {
  const double dt_min = dt / 1024.0;
  std::vector<double> kin_step(kin.size());
  auto set_dt = [&](double step) {
    for (std::size_t q = 0; q < kin.size(); ++q)
      kin_step[q] = std::exp(-kin[q] * step / hbar);
  };
  set_dt(dt);

  EnergyBreakdown e_prev = measure_energy(fft, psi, kin, pot, grid, params.coupling);
  std::vector<cplx> psi_prev;
  long it = 0;
  for (; it < max_iter; ++it) {
    psi_prev = psi;
    auto& buf = fft.buffer();
    // half potential + interaction step
    for (std::size_t q = 0; q < psi.size(); ++q) {
      const double veff = pot[q] + params.coupling * std::norm(psi[q]);
      psi[q] *= std::exp(-veff * dt / (2.0 * hbar));
    }
    // full kinetic step
    buf = psi;
    fft.forward();
    for (std::size_t q = 0; q < buf.size(); ++q) buf[q] *= kin_step[q];
    fft.backward();
    psi = buf;
    // half potential step with updated density
    for (std::size_t q = 0; q < psi.size(); ++q) {
      const double veff = pot[q] + params.coupling * std::norm(psi[q]);
      psi[q] *= std::exp(-veff * dt / (2.0 * hbar));
    }
    project_parity(psi, grid, parity);
    // renormalize
    double n2 = 0.0;
    for (const auto& a : psi) n2 += std::norm(a);
    n2 *= grid.cell_volume();
    require(n2 > 0.0, "gpe: wavefunction vanished during relaxation");
    const double scale = std::sqrt(params.atom_number / n2);
    for (auto& a : psi) a *= scale;

    const EnergyBreakdown e = measure_energy(fft, psi, kin, pot, grid, params.coupling);
    if (check_monotonic &&
        e.total() > e_prev.total() + 1e-12 * std::abs(e_prev.total())) {
      psi = psi_prev;
      dt *= 0.5;
      if (dt < dt_min)
        throw ConvergenceError(
            "gpe: imaginary-time step collapsed without energy descent");
      set_dt(dt);
      continue;
    }
    const double rel = std::abs(e.total() - e_prev.total()) /
                       std::max(std::abs(e.total()), 1e-300);
    e_prev = e;
    if (rel < tol) return {e, it + 1};
  }
  throw ConvergenceError("gpe: no convergence within iteration budget");
}

std::vector<cplx> initial_guess(const std::vector<double>& pot, const Grid& grid,
                                Parity parity) {
  double vmin = pot[0], vmean = 0.0;
  for (double v : pot) {
    vmin = std::min(vmin, v);
    vmean += v;
  }
  vmean /= static_cast<double>(pot.size());
  const double width = std::max(vmean - vmin, 1e-32);
  std::vector<cplx> psi(pot.size());
  const int nx = grid.points[0], ny = grid.points[1], nz = grid.points[2];
  for (int k = 0; k < nz; ++k)
    for (int j = 0; j < ny; ++j)
      for (int i = 0; i < nx; ++i) {
        double a = std::exp(-(pot[grid.index(i, j, k)] - vmin) / width);
        if (parity == Parity::odd) {
          // odd seed: antisymmetric envelope along x
          a *= grid.coord(0, i) / grid.extent[0];
        }
        psi[grid.index(i, j, k)] = a;
      }
  return psi;
}

}  // namespace

GroundState ground_state(const std::vector<double>& potential, const Grid& grid,
                         const GpeParams& params, const SolverOptions& opts,
                         Parity parity) {
  require(potential.size() == grid.size(), "gpe: potential/grid size mismatch");
  require(params.atom_number >= 1.0, "gpe: need at least one atom");
  require(params.a_scatt >= 0.0 && params.mass > 0.0, "gpe: bad parameters");

  Fft fft(grid);
  const auto kin = kinetic_table(grid, params.mass);
  auto psi = initial_guess(potential, grid, parity);
  project_parity(psi, grid, parity);
  {
    Wavefunction w{grid, psi};
    w.normalize(params.atom_number);
    psi = std::move(w.amp);
  }

  long total_iter = 0;
  if (opts.coarse_dt > 0.0) {
    const auto r = relax_stage(fft, psi, kin, potential, grid, params, parity,
                               opts.coarse_dt, opts.coarse_tol,
                               opts.max_iterations, opts.check_monotonic);
    total_iter += r.iterations;
  }
  const auto r = relax_stage(fft, psi, kin, potential, grid, params, parity,
                             opts.dt, opts.energy_tol,
                             opts.max_iterations - total_iter, opts.check_monotonic);
  total_iter += r.iterations;

  if (boundary_fraction(psi, grid) > opts.boundary_tol)
    throw Error("gpe: wavefunction leaks to the grid boundary; enlarge the box");

  GroundState out;
  out.psi = Wavefunction{grid, std::move(psi)};
  out.energy = r.energy;
  out.mu = r.energy.mu(params.atom_number);
  out.iterations = total_iter;
  return out;
}

SymAntisymPair symmetric_antisymmetric_pair(const std::vector<double>& potential,
                                            const Grid& grid, const GpeParams& params,
                                            const SolverOptions& opts) {
  // the x -> -x mirror of the potential must match on the grid
  const int nx = grid.points[0];
  double asym = 0.0, scale = 0.0;
  for (int i = 0; i < nx; ++i) {
    const int ir = (nx - i) % nx;
    asym = std::max(asym, std::abs(potential[grid.index(i, 0, 0)] -
                                   potential[grid.index(ir, 0, 0)]));
    scale = std::max(scale, std::abs(potential[grid.index(i, 0, 0)]));
  }
  require(asym <= 1e-9 * std::max(scale, 1e-300),
          "symmetric_antisymmetric_pair: potential is not x-symmetric");

  SymAntisymPair pair;
  pair.symmetric = ground_state(potential, grid, params, opts, Parity::even);
  pair.antisymmetric = ground_state(potential, grid, params, opts, Parity::odd);

  // parity purity check
  auto purity = [&](const Wavefunction& w, double sign) {
    double bad = 0.0, tot = 0.0;
    for (int k = 0; k < grid.points[2]; ++k)
      for (int j = 0; j < grid.points[1]; ++j)
        for (int i = 0; i < nx; ++i) {
          const int ir = (nx - i) % nx;
          const cplx u = w.amp[grid.index(i, j, k)];
          const cplx v = w.amp[grid.index(ir, j, k)];
          bad += std::norm(0.5 * (u - sign * v));
          tot += std::norm(u);
        }
    return bad / tot;
  };
  require(purity(pair.symmetric.psi, 1.0) < 1e-12,
          "symmetric state has odd-parity contamination");
  require(purity(pair.antisymmetric.psi, -1.0) < 1e-12,
          "antisymmetric state has even-parity contamination");
  return pair;
}

double josephson_energy(const SymAntisymPair& pair, const GpeParams& params) {
  const double ej = params.atom_number * pair.splitting() / 2.0;
  return std::max(ej, 0.0);
}

double charging_energy(const std::vector<double>& potential, const Grid& grid,
                       const GpeParams& params, const ChargingOptions& opts) {
  const double n_half = params.atom_number / 2.0;
  double delta = opts.delta_n > 0.0 ? opts.delta_n : params.atom_number / 20.0;
  require(delta < n_half, "charging_energy: delta_n must be well below N/2");

  double wall = opts.wall_height;
  if (wall <= 0.0) {
    double vmax = 0.0;
    for (double v : potential) vmax = std::max(vmax, v);
    wall = std::max(10.0 * vmax, constants::hz_to_joule(2e5));
  }
  // hard wall on the right of the saddle keeps one well
  std::vector<double> walled = potential;
  for (int k = 0; k < grid.points[2]; ++k)
    for (int j = 0; j < grid.points[1]; ++j)
      for (int i = 0; i < grid.points[0]; ++i)
        if (grid.coord(0, i) >= opts.saddle_x) walled[grid.index(i, j, k)] += wall;

  auto solve_mu = [&](double n_w) {
    GpeParams p = params;
    p.atom_number = n_w;
    return ground_state(walled, grid, p, opts.solver).mu;
  };
  const double mu_plus = solve_mu(n_half + delta);
  const double mu_minus = solve_mu(n_half - delta);
  const double diff = mu_plus - mu_minus;
  const double floor = 1e-8 * std::max(std::abs(mu_plus), std::abs(mu_minus));
  if (params.coupling != 0.0 && std::abs(diff) < floor)
    throw Error("charging_energy: finite-difference signal below solver noise; increase delta_n");
  return diff / delta;
}

TwoModeParameters two_mode_parameters(const std::vector<double>& potential,
                                      const Grid& grid, const GpeParams& params,
                                      const ChargingOptions& copts,
                                      const SolverOptions& sopts) {
  TwoModeParameters out;
  const auto pair = symmetric_antisymmetric_pair(potential, grid, params, sopts);
  out.e_josephson = josephson_energy(pair, params);
  out.mu = pair.symmetric.mu;
  ChargingOptions c = copts;
  c.solver = sopts;
  out.e_charging = charging_energy(potential, grid, params, c);
  out.n_atoms = params.atom_number;
  return out;
}

std::vector<TwoModeParameters> ramp_parameters(
    const std::vector<potential::DoubleWellShape>& schedule, const Grid& grid,
    const GpeParams& params, const ChargingOptions& copts,
    const SolverOptions& sopts) {
  for (std::size_t i = 1; i < schedule.size(); ++i)
    require(schedule[i].barrier_height >= schedule[i - 1].barrier_height,
            "ramp_parameters: schedule must be monotone in V_b");
  std::vector<TwoModeParameters> out(schedule.size());
  for (std::size_t i = 0; i < schedule.size(); ++i) {
    try {
      const auto pot = quartic_x_potential(grid, schedule[i]);
      out[i] = two_mode_parameters(pot, grid, params, copts, sopts);
      out[i].barrier = schedule[i].barrier_height;
    } catch (const Error& e) {
      std::ostringstream msg;
      msg << "ramp_parameters step " << i << ": " << e.what();
      throw Error(msg.str());
    }
  }
  for (std::size_t i = 1; i < out.size(); ++i)
    require(out[i].e_josephson <=
                out[i - 1].e_josephson * (1.0 + 1e-6) + 1e-3 * constants::h_planck,
            "ramp_parameters: E_J failed to decrease along the ramp");
  return out;
}

void propagate_real(Wavefunction& psi, const std::vector<double>& potential,
                    const GpeParams& params, double duration, double dt) {
  require(potential.size() == psi.grid.size(), "propagate_real: size mismatch");
  Fft fft(psi.grid);
  const auto kin = kinetic_table(psi.grid, params.mass);
  std::vector<cplx> kin_phase(kin.size());
  for (std::size_t q = 0; q < kin.size(); ++q) {
    const double th = -kin[q] * dt / hbar;
    kin_phase[q] = {std::cos(th), std::sin(th)};
  }
  const long steps = static_cast<long>(std::round(duration / dt));
  auto& buf = fft.buffer();
  for (long s = 0; s < steps; ++s) {
    for (std::size_t q = 0; q < psi.amp.size(); ++q) {
      const double veff = potential[q] + params.coupling * std::norm(psi.amp[q]);
      const double th = -veff * dt / (2.0 * hbar);
      psi.amp[q] *= cplx{std::cos(th), std::sin(th)};
    }
    buf = psi.amp;
    fft.forward();
    for (std::size_t q = 0; q < buf.size(); ++q) buf[q] *= kin_phase[q];
    fft.backward();
    psi.amp = buf;
    for (std::size_t q = 0; q < psi.amp.size(); ++q) {
      const double veff = potential[q] + params.coupling * std::norm(psi.amp[q]);
      const double th = -veff * dt / (2.0 * hbar);
      psi.amp[q] *= cplx{std::cos(th), std::sin(th)};
    }
  }
}

EnergyBreakdown energy_breakdown(const Wavefunction& psi,
                                 const std::vector<double>& potential,
                                 const GpeParams& params) {
  Fft fft(psi.grid);
  const auto kin = kinetic_table(psi.grid, params.mass);
  return measure_energy(fft, psi.amp, kin, potential, psi.grid, params.coupling);
}

std::vector<double> harmonic_potential(const Grid& grid, double mass,
                                       const std::array<double, 3>& f_hz) {
  std::vector<double> v(grid.size());
  for (int k = 0; k < grid.points[2]; ++k)
    for (int j = 0; j < grid.points[1]; ++j)
      for (int i = 0; i < grid.points[0]; ++i) {
        double val = 0.0;
        const double wx = 2.0 * pi * f_hz[0];
        val += 0.5 * mass * wx * wx * grid.coord(0, i) * grid.coord(0, i);
        if (grid.dims == 3) {
          const double wy = 2.0 * pi * f_hz[1];
          const double wz = 2.0 * pi * f_hz[2];
          val += 0.5 * mass * wy * wy * grid.coord(1, j) * grid.coord(1, j);
          val += 0.5 * mass * wz * wz * grid.coord(2, k) * grid.coord(2, k);
        }
        v[grid.index(i, j, k)] = val;
      }
  return v;
}

std::vector<double> quartic_x_potential(const Grid& grid,
                                        const potential::DoubleWellShape& shape) {
  require(grid.dims == 1, "quartic_x_potential: 1D grids only");
  std::vector<double> v(grid.size());
  for (int i = 0; i < grid.points[0]; ++i)
    v[i] = potential::quartic_eval(shape, grid.coord(0, i));
  return v;
}

}  // namespace bjj::gpe
