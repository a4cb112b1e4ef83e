#include "bjj/twomode.hpp"

#include <lapacke.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "bjj/kernels.hpp"

namespace bjj::twomode {

using constants::hbar;
using constants::k_boltzmann;

TwoModeSystem::TwoModeSystem(long n, double ec, double ej, double de)
    : n_atoms(n), e_charging(ec), e_josephson(ej), tilt(de) {
  require(n >= 2 && n % 2 == 0, "two-mode system: N must be even and >= 2");
  require(ec >= 0.0 && ej >= 0.0, "two-mode system: E_C, E_J must be >= 0");
}

TwoModeSystem TwoModeSystem::from_experimental(double n, double ec, double ej,
                                               double de) {
  long ni = static_cast<long>(std::floor(n));
  if (ni % 2 != 0) ni -= 1;
  return TwoModeSystem(ni, ec, ej, de);
}

Eigen::MatrixXd TridiagonalHamiltonian::dense() const {
  const long d = static_cast<long>(diag.size());
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(d, d);
  for (long i = 0; i < d; ++i) h(i, i) = diag[i];
  for (long i = 0; i + 1 < d; ++i) h(i, i + 1) = h(i + 1, i) = off[i];
  return h;
}

TridiagonalHamiltonian build_hamiltonian(const TwoModeSystem& s) {
  const long d = s.dim();
  const double half_n = s.n_atoms / 2.0;
  TridiagonalHamiltonian h;
  h.diag.resize(d);
  h.off.resize(d - 1);
  for (long i = 0; i < d; ++i) {
    const double n = static_cast<double>(i) - half_n;
    h.diag[i] = 0.5 * s.e_charging * n * n + s.tilt * n;
  }
  for (long i = 0; i + 1 < d; ++i) {
    const double n = static_cast<double>(i) - half_n;
    h.off[i] = -(s.e_josephson / s.n_atoms) *
               std::sqrt((half_n - n) * (half_n + n + 1.0));
  }
  return h;
}

namespace {

struct TridiagEigen {
  std::vector<double> values;  // ascending
  std::vector<double> vectors; // d x d column-major
};

TridiagEigen tridiag_eigen(const TridiagonalHamiltonian& h) {
  TridiagEigen out;
  const lapack_int d = static_cast<lapack_int>(h.diag.size());
  out.values = h.diag;
  std::vector<double> off = h.off;
  out.vectors.assign(static_cast<std::size_t>(d) * d, 0.0);
  const lapack_int info = LAPACKE_dstevd(LAPACK_COL_MAJOR, 'V', d,
                                         out.values.data(), off.data(),
                                         out.vectors.data(), d);
  require(info == 0, "tridiagonal eigensolver failed");
  return out;
}

}  // namespace

void FockDensityMatrix::validate() const {
  const long d = rho.rows();
  require(d == n_atoms + 1 && rho.cols() == d, "density matrix: bad dimension");
  require(std::abs(rho.trace().real() - 1.0) < 1e-10 &&
              std::abs(rho.trace().imag()) < 1e-10,
          "density matrix: trace must be 1");
  require((rho - rho.adjoint()).cwiseAbs().maxCoeff() < 1e-12,
          "density matrix: not Hermitian");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(rho, Eigen::EigenvaluesOnly);
  require(es.eigenvalues().minCoeff() > -1e-10,
          "density matrix: negative eigenvalue");
}

StateEnsemble thermal_ensemble(const TwoModeSystem& system, double temperature,
                               double weight_cutoff) {
  require(temperature >= 0.0, "thermal state: T must be >= 0");
  const auto eig = tridiag_eigen(build_hamiltonian(system));
  const long d = system.dim();

  std::vector<double> w(d, 0.0);
  if (temperature == 0.0) {
    w[0] = 1.0;
  } else {
    const double beta = 1.0 / (k_boltzmann * temperature);
    double z = 0.0;
    for (long k = 0; k < d; ++k) {
      // shift by the ground energy to avoid overflow
      w[k] = std::exp(-beta * (eig.values[k] - eig.values[0]));
      z += w[k];
    }
    for (auto& x : w) x /= z;
  }

  StateEnsemble ens;
  ens.n_atoms = system.n_atoms;
  ens.basis_dim = d;
  ens.index_offset = 0;
  double kept = 0.0;
  for (long k = 0; k < d && kept < 1.0 - weight_cutoff; ++k) {
    ens.weights.push_back(w[k]);
    kept += w[k];
    for (long i = 0; i < d; ++i)
      ens.states.push_back(cplx{eig.vectors[static_cast<std::size_t>(k) * d + i], 0.0});
  }
  return ens;
}

FockDensityMatrix thermal_state(const TwoModeSystem& system, double temperature) {
  return thermal_ensemble(system, temperature, 0.0).density_matrix();
}

StateEnsemble decompose(const FockDensityMatrix& rho, double weight_cutoff) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(rho.rho);
  require(es.info() == Eigen::Success, "density matrix eigensolver failed");
  const long d = rho.rho.rows();
  // descending weights
  std::vector<long> order(d);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](long a, long b) {
    return es.eigenvalues()(a) > es.eigenvalues()(b);
  });
  StateEnsemble ens;
  ens.n_atoms = rho.n_atoms;
  ens.basis_dim = d;
  ens.index_offset = 0;
  double kept = 0.0;
  for (long q = 0; q < d && kept < 1.0 - weight_cutoff; ++q) {
    const double w = es.eigenvalues()(order[q]);
    if (w <= 0.0) break;
    ens.weights.push_back(w);
    kept += w;
    for (long i = 0; i < d; ++i) ens.states.push_back(es.eigenvectors()(i, order[q]));
  }
  return ens;
}

double StateEnsemble::trace() const {
  double t = 0.0;
  const long d = dim();
  for (long k = 0; k < count(); ++k) {
    double nrm = 0.0;
    for (long i = 0; i < d; ++i) nrm += std::norm(states[static_cast<std::size_t>(k) * d + i]);
    t += weights[k] * nrm;
  }
  return t;
}

double StateEnsemble::purity() const {
  // Tr rho^2 = sum_jk w_j w_k |<psi_j|psi_k>|^2
  const long d = dim(), m = count();
  double p = 0.0;
  for (long j = 0; j < m; ++j)
    for (long k = j; k < m; ++k) {
      cplx ov{};
      for (long i = 0; i < d; ++i)
        ov += std::conj(states[static_cast<std::size_t>(j) * d + i]) *
              states[static_cast<std::size_t>(k) * d + i];
      const double term = weights[j] * weights[k] * std::norm(ov);
      p += (j == k) ? term : 2.0 * term;
    }
  return p;
}

double StateEnsemble::edge_weight() const {
  const long d = dim();
  double w = 0.0;
  for (long k = 0; k < count(); ++k) {
    const cplx* psi = states.data() + static_cast<std::size_t>(k) * d;
    w += weights[k] * (std::norm(psi[0]) + std::norm(psi[d - 1]));
  }
  return w;
}

FockDensityMatrix StateEnsemble::density_matrix() const {
  const long d = dim(), m = count(), full = n_atoms + 1;
  Eigen::MatrixXcd rho = Eigen::MatrixXcd::Zero(full, full);
  for (long k = 0; k < m; ++k) {
    Eigen::VectorXcd v = Eigen::VectorXcd::Zero(full);
    for (long i = 0; i < d; ++i)
      v(index_offset + i) = states[static_cast<std::size_t>(k) * d + i];
    rho.noalias() += weights[k] * v * v.adjoint();
  }
  return FockDensityMatrix{std::move(rho), n_atoms};
}

void RampSchedule::validate() const {
  require(points.size() >= 1, "ramp schedule: empty");
  for (std::size_t i = 1; i < points.size(); ++i)
    require(points[i].time > points[i - 1].time,
            "ramp schedule: times must strictly increase");
  for (const auto& p : points)
    require(std::isfinite(p.e_charging) && std::isfinite(p.e_josephson) &&
                std::isfinite(p.tilt),
            "ramp schedule: non-finite values");
}

RampPoint RampSchedule::at(double t) const {
  if (t <= points.front().time) return points.front();
  if (t >= points.back().time) return points.back();
  std::size_t hi = 1;
  while (points[hi].time < t) ++hi;
  const auto &a = points[hi - 1], &b = points[hi];
  const double f = (t - a.time) / (b.time - a.time);
  return {t, a.e_charging + f * (b.e_charging - a.e_charging),
          a.e_josephson + f * (b.e_josephson - a.e_josephson),
          a.tilt + f * (b.tilt - a.tilt)};
}

namespace {

TwoModeObservables observables_impl(const StateEnsemble& ens,
                                    const TwoModeSystem& system) {
  const long d = ens.dim();
  const double half_n = ens.n_atoms / 2.0;
  double n1 = 0.0, n2 = 0.0, coh = 0.0;
  for (long k = 0; k < ens.count(); ++k) {
    const cplx* psi = ens.states.data() + static_cast<std::size_t>(k) * d;
    double a1 = 0.0, a2 = 0.0, ac = 0.0;
    for (long i = 0; i < d; ++i) {
      const double n = ens.n_value(i);
      const double den = std::norm(psi[i]);
      a1 += n * den;
      a2 += n * n * den;
      if (i + 1 < d) {
        const double c = std::sqrt((half_n - n) * (half_n + n + 1.0));
        ac += c * 2.0 * std::real(psi[i + 1] * std::conj(psi[i]));
      }
    }
    n1 += ens.weights[k] * a1;
    n2 += ens.weights[k] * a2;
    coh += ens.weights[k] * ac;
  }
  TwoModeObservables o;
  o.n_mean = n1;
  o.n2_mean = n2;
  o.xi2 = 4.0 * (n2 - n1 * n1) / static_cast<double>(ens.n_atoms);
  o.coherence = coh / static_cast<double>(ens.n_atoms);
  o.plasma_omega = plasma_frequency(system);
  o.gain_db = metrology_gain_db(o.xi2, o.coherence);
  o.spreading_rate = std::sqrt(std::max(o.xi2, 0.0)) *
                     std::sqrt(static_cast<double>(ens.n_atoms)) *
                     system.e_charging / hbar;
  return o;
}

}  // namespace

TwoModeObservables observables(const StateEnsemble& ens, const TwoModeSystem& system) {
  require(ens.n_atoms == system.n_atoms, "observables: atom number mismatch");
  return observables_impl(ens, system);
}

TwoModeObservables observables(const FockDensityMatrix& rho,
                               const TwoModeSystem& system) {
  require(rho.n_atoms == system.n_atoms, "observables: atom number mismatch");
  const long d = rho.rho.rows();
  const double half_n = rho.n_atoms / 2.0;
  double n1 = 0.0, n2 = 0.0, coh = 0.0;
  for (long i = 0; i < d; ++i) {
    const double n = static_cast<double>(i) - half_n;
    const double p = std::real(rho.rho(i, i));
    n1 += n * p;
    n2 += n * n * p;
    if (i + 1 < d) {
      const double c = std::sqrt((half_n - n) * (half_n + n + 1.0));
      coh += c * 2.0 * std::real(rho.rho(i + 1, i));
    }
  }
  TwoModeObservables o;
  o.n_mean = n1;
  o.n2_mean = n2;
  o.xi2 = 4.0 * (n2 - n1 * n1) / static_cast<double>(rho.n_atoms);
  o.coherence = coh / static_cast<double>(rho.n_atoms);
  o.plasma_omega = plasma_frequency(system);
  o.gain_db = metrology_gain_db(o.xi2, o.coherence);
  o.spreading_rate = std::sqrt(std::max(o.xi2, 0.0)) *
                     std::sqrt(static_cast<double>(rho.n_atoms)) *
                     system.e_charging / hbar;
  return o;
}

namespace {

double spectral_scale(const TridiagonalHamiltonian& h) {
  double m = 0.0;
  for (std::size_t i = 0; i < h.diag.size(); ++i) {
    double row = std::abs(h.diag[i]);
    if (i > 0) row += std::abs(h.off[i - 1]);
    if (i < h.off.size()) row += std::abs(h.off[i]);
    m = std::max(m, row);
  }
  return m;
}

Trajectory evolve_spectral(const StateEnsemble& initial, const TwoModeSystem& base,
                           const RampSchedule& schedule, const EvolveOptions& opts,
                           double t_end) {
  const double t0 = schedule.t_begin();
  const long steps = std::max(1L, static_cast<long>(std::llround((t_end - t0) / opts.dt)));
  const double dt = (t_end - t0) / static_cast<double>(steps);
  require(steps >= 4, "evolve: dt too coarse for the schedule span");

  StateEnsemble ens = initial;
  // optional ladder window around n = 0
  if (opts.n_support > 0 && 2 * opts.n_support < base.n_atoms) {
    const long lo = base.n_atoms / 2 - opts.n_support;
    const long hi = base.n_atoms / 2 + opts.n_support;
    require(lo >= initial.index_offset &&
                hi <= initial.index_offset + initial.basis_dim - 1,
            "evolve: support window exceeds the initial ensemble window");
    const long w = hi - lo + 1;
    StateEnsemble cut;
    cut.n_atoms = initial.n_atoms;
    cut.basis_dim = w;
    cut.index_offset = lo;
    cut.weights = initial.weights;
    cut.states.resize(static_cast<std::size_t>(w) * initial.count());
    for (long k = 0; k < initial.count(); ++k)
      for (long i = 0; i < w; ++i)
        cut.states[static_cast<std::size_t>(k) * w + i] =
            initial.states[static_cast<std::size_t>(k) * initial.basis_dim +
                           (lo - initial.index_offset) + i];
    require(std::abs(cut.trace() - initial.trace()) < 1e-9,
            "evolve: support window clips the initial state");
    ens = std::move(cut);
  }
  const long d = ens.dim();
  const std::size_t m = ens.weights.size();

  Trajectory traj;
  auto record = [&](double t) {
    TwoModeSystem sys = base;
    const auto rp = schedule.at(t);
    sys.e_charging = std::max(rp.e_charging, 0.0);
    sys.e_josephson = std::max(rp.e_josephson, 0.0);
    sys.tilt = rp.tilt;
    TrajectoryPoint pt;
    pt.time = t;
    pt.obs = observables_impl(ens, sys);
    pt.trace = ens.trace();
    pt.purity = ens.purity();
    traj.points.push_back(pt);
  };
  record(t0);

  TridiagonalHamiltonian hw;
  hw.diag.resize(d);
  hw.off.resize(d - 1);
  for (long s = 0; s < steps; ++s) {
    const double t_mid = t0 + (s + 0.5) * dt;
    const auto rp = schedule.at(t_mid);
    TwoModeSystem sys = base;
    sys.e_charging = std::max(rp.e_charging, 0.0);
    sys.e_josephson = std::max(rp.e_josephson, 0.0);
    sys.tilt = rp.tilt;
    const auto full = build_hamiltonian(sys);
    for (long i = 0; i < d; ++i) hw.diag[i] = full.diag[ens.index_offset + i];
    for (long i = 0; i + 1 < d; ++i) hw.off[i] = full.off[ens.index_offset + i];
    const auto eig = tridiag_eigen(hw);
    kernels::propagate_block(eig.vectors, eig.values, dt / hbar, ens.states,
                             static_cast<std::size_t>(d), m, opts.mode);
    if (ens.basis_dim < base.n_atoms + 1 && ens.edge_weight() > opts.edge_tolerance)
      throw ConvergenceError(
          "evolve: population reached the support-window edge; enlarge n_support");
    record(t0 + (s + 1) * dt);
  }
  traj.final_state = std::move(ens);
  return traj;
}

Trajectory evolve_rk4(const StateEnsemble& initial, const TwoModeSystem& base,
                      const RampSchedule& schedule, const EvolveOptions& opts,
                      double t_end) {
  const long d = initial.dim();
  const double t0 = schedule.t_begin();

  auto system_at = [&](double t) {
    const auto rp = schedule.at(t);
    TwoModeSystem sys = base;
    sys.e_charging = std::max(rp.e_charging, 0.0);
    sys.e_josephson = std::max(rp.e_josephson, 0.0);
    sys.tilt = rp.tilt;
    return sys;
  };

  // the stated step bound for the explicit scheme
  double hmax = 0.0;
  for (const auto& p : schedule.points) {
    TwoModeSystem sys = base;
    sys.e_charging = std::max(p.e_charging, 0.0);
    sys.e_josephson = std::max(p.e_josephson, 0.0);
    sys.tilt = p.tilt;
    hmax = std::max(hmax, spectral_scale(build_hamiltonian(sys)));
  }
  require(opts.dt <= 0.1 * hbar / hmax,
          "evolve(rk4): dt violates the 0.1*hbar/||H|| step bound");

  const long steps = std::max(1L, static_cast<long>(std::llround((t_end - t0) / opts.dt)));
  const double dt = (t_end - t0) / static_cast<double>(steps);

  Eigen::MatrixXcd rho = initial.density_matrix().rho;

  auto commutator = [&](double t, const Eigen::MatrixXcd& r) {
    const auto h = build_hamiltonian(system_at(t));
    Eigen::MatrixXcd hr = Eigen::MatrixXcd::Zero(d, d);
    // tridiagonal H times dense rho, minus rho times H
    for (long i = 0; i < d; ++i) {
      for (long j = 0; j < d; ++j) {
        cplx v = h.diag[i] * r(i, j) - r(i, j) * h.diag[j];
        if (i > 0) v += h.off[i - 1] * r(i - 1, j);
        if (i + 1 < d) v += h.off[i] * r(i + 1, j);
        if (j > 0) v -= r(i, j - 1) * h.off[j - 1];
        if (j + 1 < d) v -= r(i, j + 1) * h.off[j];
        hr(i, j) = v;
      }
    }
    return Eigen::MatrixXcd(cplx{0.0, -1.0 / hbar} * hr);
  };

  Trajectory traj;
  auto record = [&](double t) {
    TrajectoryPoint pt;
    pt.time = t;
    FockDensityMatrix fr{rho, initial.n_atoms};
    pt.obs = observables(fr, system_at(t));
    pt.trace = std::real(rho.trace());
    pt.purity = std::real((rho * rho).trace());
    traj.points.push_back(pt);
  };
  record(t0);
  for (long s = 0; s < steps; ++s) {
    const double t = t0 + s * dt;
    const Eigen::MatrixXcd k1 = commutator(t, rho);
    const Eigen::MatrixXcd k2 = commutator(t + dt / 2, rho + (dt / 2) * k1);
    const Eigen::MatrixXcd k3 = commutator(t + dt / 2, rho + (dt / 2) * k2);
    const Eigen::MatrixXcd k4 = commutator(t + dt, rho + dt * k3);
    rho += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (s % 64 == 0 || s + 1 == steps) record(t + dt);
  }
  FockDensityMatrix fr{rho, initial.n_atoms};
  traj.final_state = decompose(fr, opts.weight_cutoff);
  return traj;
}

}  // namespace

Trajectory evolve(const StateEnsemble& initial, const TwoModeSystem& base,
                  const RampSchedule& schedule, const EvolveOptions& opts,
                  std::optional<double> duration) {
  schedule.validate();
  require(initial.n_atoms == base.n_atoms, "evolve: atom number mismatch");
  const double span = schedule.t_end() - schedule.t_begin();
  double t_end = schedule.t_end();
  if (duration) {
    require(*duration <= span + 1e-15,
            "evolve: schedule shorter than requested evolution");
    t_end = schedule.t_begin() + *duration;
  }
  if (opts.method == Integrator::spectral)
    return evolve_spectral(initial, base, schedule, opts, t_end);
  return evolve_rk4(initial, base, schedule, opts, t_end);
}

Trajectory evolve(const FockDensityMatrix& rho, const TwoModeSystem& base,
                  const RampSchedule& schedule, const EvolveOptions& opts,
                  std::optional<double> duration) {
  return evolve(decompose(rho, opts.weight_cutoff), base, schedule, opts, duration);
}

double extended_xi2(double n_atoms, double e_charging, double temperature,
                    double n_two_modes) {
  require(e_charging > 0.0, "extended_xi2: E_C must be positive");
  require(n_two_modes >= 0.0 && n_two_modes <= n_atoms,
          "extended_xi2: N2m must lie in [0, N]");
  return 4.0 * k_boltzmann * temperature / (n_atoms * e_charging) + 1.0 -
         n_two_modes / n_atoms;
}

double squeezing_db(double xi2) {
  require(xi2 > 0.0, "squeezing_db: xi^2 must be positive");
  return 10.0 * std::log10(xi2);
}

double squeezing_from_db(double db) { return std::pow(10.0, db / 10.0); }

double plasma_frequency(const TwoModeSystem& system) {
  return std::sqrt(system.e_charging * system.e_josephson) / hbar;
}

double metrology_gain_db(double xi2, double coherence) {
  require(xi2 > 0.0 && coherence != 0.0, "metrology gain: invalid inputs");
  return 10.0 * std::log10(xi2 / (coherence * coherence));
}

}  // namespace bjj::twomode
