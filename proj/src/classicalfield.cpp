#include "bjj/classicalfield.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <random>

#include "bjj/kernels.hpp"
#include "bjj/twomode.hpp"

namespace bjj::classicalfield {

using constants::hbar;
using constants::h_planck;
using constants::k_boltzmann;
using constants::pi;
using constants::zeta3;

double FieldSample::norm_squared() const {
  double s = 0.0;
  for (const auto& comp : components)
    for (const auto& a : comp) s += std::norm(a);
  return s * grid.cell_volume();
}

std::size_t ModeBasis::total_modes() const {
  std::size_t m = 0;
  for (const auto& b : branches) m += b.n_modes;
  return m;
}

ModeBasis build_modes(const std::vector<double>& potential, const Grid& grid,
                      double mass, double cutoff_energy,
                      const TransverseSpec& transverse, double partition_x) {
  require(grid.dims == 1, "build_modes: 1D grids only");
  require(potential.size() == grid.size(), "build_modes: size mismatch");
  require(cutoff_energy > 0.0, "build_modes: cutoff must be positive");
  const int n = grid.points[0];
  const double dx = grid.spacing(0);

  // kinetic operator in position space (circulant, from the spectral table)
  std::vector<double> eps_k(n);
  for (int m = 0; m < n; ++m) {
    const double k = grid.wavenumber(0, m);
    eps_k[m] = hbar * hbar * k * k / (2.0 * mass);
  }
  std::vector<double> circ(n, 0.0);
  for (int d = 0; d < n; ++d) {
    double s = 0.0;
    for (int m = 0; m < n; ++m) s += eps_k[m] * std::cos(2.0 * pi * m * d / n);
    circ[d] = s / n;
  }
  Eigen::MatrixXd h(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) h(i, j) = circ[(i - j + n) % n];
  for (int i = 0; i < n; ++i) h(i, i) += potential[i];

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h);
  require(es.info() == Eigen::Success, "build_modes: eigensolver failed");

  ModeBasis basis;
  basis.grid = grid;
  basis.partition_x = partition_x;
  const double eps0 = es.eigenvalues()(0);

  // grid-representable ceiling: stay below half the maximum kinetic energy
  const double eps_max_grid = 0.5 * *std::max_element(eps_k.begin(), eps_k.end());
  require(cutoff_energy < eps_max_grid,
          "build_modes: cutoff not representable on this grid");

  int n_keep = 0;
  while (n_keep < n && es.eigenvalues()(n_keep) - eps0 <= cutoff_energy) ++n_keep;
  n_keep = std::max(n_keep, 2);
  require(n_keep < n, "build_modes: cutoff requires more modes than the grid has");

  basis.n_x_modes = n_keep;
  basis.eps_x.resize(n_keep);
  basis.phi.resize(static_cast<std::size_t>(n) * n_keep);
  const double unit = 1.0 / std::sqrt(dx);  // dx-weighted orthonormality
  for (int k = 0; k < n_keep; ++k) {
    basis.eps_x[k] = es.eigenvalues()(k);
    for (int i = 0; i < n; ++i)
      basis.phi[static_cast<std::size_t>(k) * n + i] = es.eigenvectors()(i, k) * unit;
  }

  // transverse harmonic ladders as branch offsets
  if (transverse.enabled) {
    require(transverse.f_y_hz > 0.0 && transverse.f_z_hz > 0.0,
            "build_modes: transverse frequencies must be positive");
    for (int ny = 0;; ++ny) {
      const double ey = ny * h_planck * transverse.f_y_hz;
      if (ey > cutoff_energy) break;
      for (int nz = 0;; ++nz) {
        const double off = ey + nz * h_planck * transverse.f_z_hz;
        if (off > cutoff_energy) break;
        int nm = 0;
        while (nm < n_keep && basis.eps_x[nm] - eps0 + off <= cutoff_energy) ++nm;
        if (ny == 0 && nz == 0) nm = std::max(nm, 2);
        if (nm > 0) basis.branches.push_back({off, nm});
      }
    }
    std::sort(basis.branches.begin(), basis.branches.end(),
              [](const auto& a, const auto& b) { return a.offset < b.offset; });
  } else {
    basis.branches.push_back({0.0, n_keep});
  }
  require(basis.total_modes() < 200000, "build_modes: mode count blew up");

  // partition overlaps, boundary cell split between the halves
  basis.left_overlap.resize(n_keep, n_keep);
  std::vector<double> wleft(n);
  for (int i = 0; i < n; ++i) {
    const double x = grid.coord(0, i);
    if (x < partition_x - 0.25 * dx)
      wleft[i] = 1.0;
    else if (x > partition_x + 0.25 * dx)
      wleft[i] = 0.0;
    else
      wleft[i] = 0.5;
  }
  for (int a = 0; a < n_keep; ++a)
    for (int b = a; b < n_keep; ++b) {
      double s = 0.0;
      for (int i = 0; i < n; ++i)
        s += wleft[i] * basis.phi[static_cast<std::size_t>(a) * n + i] *
             basis.phi[static_cast<std::size_t>(b) * n + i];
      basis.left_overlap(a, b) = basis.left_overlap(b, a) = s * dx;
    }
  return basis;
}

namespace {

struct FlatMode {
  int branch, k;
  double eta;  // J
};

std::vector<FlatMode> flatten_modes(const ModeBasis& basis) {
  std::vector<FlatMode> flat;
  for (std::size_t b = 0; b < basis.branches.size(); ++b)
    for (int k = 0; k < basis.branches[b].n_modes; ++k)
      flat.push_back({static_cast<int>(b), k,
                      basis.eps_x[k] + basis.branches[b].offset});
  return flat;
}

// Chain state in "stored" units: the physical state is stored/gamma with
// gamma^2 = sum|c|^2 / N, so the norm projection is carried implicitly and
// per-move work stays O(grid).
struct ChainState {
  std::vector<std::vector<cplx>> c;   // per branch coefficients
  std::vector<std::vector<cplx>> u;   // per branch field on the grid
  std::vector<double> density;        // total |field|^2 on the grid
  double sum_c2 = 0.0;                // sum |c|^2 (stored units)
  double q_quad = 0.0;                // sum eta |c|^2 (stored units)
  double i4 = 0.0;                    // (g/2) integral density^2 (stored units)
};

double interaction_term(const std::vector<double>& density, double g_half_dx) {
  double s = 0.0;
  for (double d : density) s += d * d;
  return s * g_half_dx;
}

void rebuild(ChainState& st, const ModeBasis& basis, double g_half_dx,
             const std::vector<FlatMode>& flat, bool project, double n_atoms) {
  const int n = basis.grid.points[0];
  if (project) {
    double s2 = 0.0;
    for (const auto& br : st.c)
      for (const auto& v : br) s2 += std::norm(v);
    const double scale = std::sqrt(n_atoms / s2);
    for (auto& br : st.c)
      for (auto& v : br) v *= scale;
  }
  st.sum_c2 = 0.0;
  st.q_quad = 0.0;
  std::size_t fm = 0;
  for (std::size_t b = 0; b < st.c.size(); ++b) {
    std::fill(st.u[b].begin(), st.u[b].end(), cplx{});
    for (std::size_t k = 0; k < st.c[b].size(); ++k, ++fm) {
      const cplx cv = st.c[b][k];
      st.sum_c2 += std::norm(cv);
      st.q_quad += flat[fm].eta * std::norm(cv);
      const double* phi = basis.phi.data() + k * static_cast<std::size_t>(n);
      for (int i = 0; i < n; ++i) st.u[b][i] += cv * phi[i];
    }
  }
  std::fill(st.density.begin(), st.density.end(), 0.0);
  for (const auto& ub : st.u)
    for (int i = 0; i < n; ++i) st.density[i] += std::norm(ub[i]);
  st.i4 = interaction_term(st.density, g_half_dx);
}

}  // namespace

SampleResult sample(const std::vector<double>& potential, const Grid& grid,
                    const gpe::GpeParams& params, const SamplerConfig& config) {
  require(config.temperature > 0.0, "sampler: temperature must be positive");
  require(config.sweeps > 0 && config.burn_in_sweeps >= 0,
          "sampler: bad chain lengths");
  require(config.thin_sweeps >= 1, "sampler: thin stride must be >= 1");

  const double kt = k_boltzmann * config.temperature;
  const double beta = 1.0 / kt;
  const double cutoff =
      config.cutoff_energy > 0.0 ? config.cutoff_energy : config.cutoff_alpha * kt;

  SampleResult out;
  out.basis = build_modes(potential, grid, params.mass, cutoff, config.transverse);
  const ModeBasis& basis = out.basis;
  const auto flat = flatten_modes(basis);
  const std::size_t n_modes = flat.size();
  const int n = grid.points[0];
  const double dx = grid.spacing(0);
  const double g_half_dx = 0.5 * params.coupling * dx;
  const double n_atoms = params.atom_number;
  const bool constrained = config.constrain_norm;

  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  // thermal-occupation start, condensate boosted to carry the remaining norm
  ChainState st;
  st.c.resize(basis.branches.size());
  st.u.assign(basis.branches.size(), std::vector<cplx>(n, cplx{}));
  st.density.assign(n, 0.0);
  {
    const double eps0 = flat[0].eta;
    double thermal_norm = 0.0;
    for (const auto& fm : flat)
      thermal_norm += kt / std::max(fm.eta - eps0, 0.1 * kt);
    std::size_t fm = 0;
    for (std::size_t b = 0; b < basis.branches.size(); ++b) {
      st.c[b].resize(basis.branches[b].n_modes);
      for (int k = 0; k < basis.branches[b].n_modes; ++k, ++fm) {
        const double occ = kt / std::max(flat[fm].eta - eps0, 0.1 * kt);
        const double amp = std::sqrt(occ / 2.0);
        st.c[b][k] = cplx{amp * gauss(rng), amp * gauss(rng)};
      }
    }
    const double boost2 = std::max(n_atoms - thermal_norm, 0.01 * n_atoms);
    st.c[0][0] += std::sqrt(boost2);
  }
  rebuild(st, basis, g_half_dx, flat, constrained, n_atoms);

  auto true_energy = [&]() {
    if (!constrained) return st.q_quad + st.i4;
    const double g2 = st.sum_c2 / n_atoms;
    return st.q_quad / g2 + st.i4 / (g2 * g2);
  };

  double amp = config.proposal_amplitude;
  if (amp <= 0.0) {
    const double eps0 = flat[0].eta;
    double med = 0.0;
    for (const auto& fm : flat) med += std::max(fm.eta - eps0, 0.0);
    med = std::max(med / static_cast<double>(n_modes), 1e-3 * kt);
    amp = std::sqrt(kt / med / 2.0 + 0.02 * n_atoms / static_cast<double>(n_modes));
  }

  std::vector<cplx> u_cand(n);
  std::vector<double> density_cand(n);
  const long n_samples_target = config.sweeps / config.thin_sweeps;
  out.g_mode = Eigen::MatrixXcd::Zero(basis.n_x_modes, basis.n_x_modes);
  out.blocks.assign(32, BlockStats{Eigen::MatrixXcd::Zero(basis.n_x_modes,
                                                          basis.n_x_modes),
                                   0.0, 0.0, 0});

  long accepted = 0, proposed = 0;
  long tune_acc = 0, tune_prop = 0;
  long audit_countdown = config.audit_stride;

  auto do_proposal = [&](bool tuning, bool auditing) {
    const std::size_t pick = static_cast<std::size_t>(unif(rng) * n_modes) % n_modes;
    const auto& fm = flat[pick];
    const int b = fm.branch, k = fm.k;

    const double gamma2 = constrained ? st.sum_c2 / n_atoms : 1.0;
    const double gamma = std::sqrt(gamma2);
    const cplx delta_true{amp * gauss(rng), amp * gauss(rng)};
    const cplx delta_st = delta_true * gamma;

    const cplx c_old = st.c[b][k];
    const cplx c_new = c_old + delta_st;
    const double dsum = std::norm(c_new) - std::norm(c_old);
    const double q_cand = st.q_quad + fm.eta * dsum;

    const double* phi = basis.phi.data() + static_cast<std::size_t>(k) * n;
    const auto& ub = st.u[b];
    for (int i = 0; i < n; ++i) {
      const cplx nu = ub[i] + delta_st * phi[i];
      u_cand[i] = nu;
      density_cand[i] = st.density[i] - std::norm(ub[i]) + std::norm(nu);
    }
    const double i4_cand = interaction_term(density_cand, g_half_dx);

    double log_acc, delta_e, log_q_ratio = 0.0;
    if (constrained) {
      const double sum_cand = st.sum_c2 + dsum;
      if (sum_cand <= 0.0) return;  // degenerate proposal, reject
      const double u2 = sum_cand / st.sum_c2;
      const double g2c = sum_cand / n_atoms;
      const double e_old = st.q_quad / gamma2 + st.i4 / (gamma2 * gamma2);
      const double e_new = q_cand / g2c + i4_cand / (g2c * g2c);
      delta_e = e_new - e_old;
      // exact reverse/forward proposal density ratio of the projected move
      log_q_ratio = std::norm(delta_true) * (1.0 - 1.0 / u2) / (2.0 * amp * amp) -
                    2.5 * std::log(u2);
      log_acc = -beta * delta_e + log_q_ratio;
    } else {
      delta_e = (q_cand - st.q_quad) + (i4_cand - st.i4);
      log_acc = -beta * delta_e;
    }

    if (auditing) {
      AuditRecord rec;
      rec.delta_e = delta_e;
      rec.log_q_ratio = log_q_ratio;
      rec.accept_prob = std::min(1.0, std::exp(log_acc));
      // recompute the candidate energy from scratch
      ChainState scratch = st;
      scratch.c[b][k] = c_new;
      rebuild(scratch, basis, g_half_dx, flat, constrained, n_atoms);
      double e_new_scratch;
      if (constrained) {
        e_new_scratch = scratch.q_quad + scratch.i4;  // rebuilt projected
        const double e_old = st.q_quad / gamma2 + st.i4 / (gamma2 * gamma2);
        rec.delta_e_scratch = e_new_scratch - e_old;
      } else {
        rec.delta_e_scratch = (scratch.q_quad + scratch.i4) - (st.q_quad + st.i4);
      }
      out.audit.push_back(rec);
    }

    ++proposed;
    if (tuning) ++tune_prop;
    if (std::log(unif(rng) + 1e-300) < log_acc) {
      st.c[b][k] = c_new;
      st.u[b].swap(u_cand);
      st.density.swap(density_cand);
      st.q_quad = q_cand;
      st.i4 = i4_cand;
      st.sum_c2 += dsum;
      ++accepted;
      if (tuning) ++tune_acc;
    }
  };

  // burn-in with amplitude tuning toward 30-50% acceptance
  const long tune_window = std::max<long>(200, static_cast<long>(n_modes));
  for (long sweep = 0; sweep < config.burn_in_sweeps; ++sweep) {
    for (std::size_t p = 0; p < n_modes; ++p) {
      do_proposal(true, false);
      if (tune_prop >= tune_window) {
        const double acc = static_cast<double>(tune_acc) / tune_prop;
        amp *= std::exp(0.8 * (acc - 0.4));
        tune_acc = tune_prop = 0;
      }
    }
  }
  out.tuned_amplitude = amp;
  accepted = proposed = 0;

  // measurement phase
  std::vector<cplx> cb_buf;
  long sample_idx = 0;
  for (long sweep = 1; sweep <= config.sweeps; ++sweep) {
    for (std::size_t p = 0; p < n_modes; ++p) {
      bool auditing = false;
      if (config.audit_stride > 0 && --audit_countdown <= 0) {
        auditing = true;
        audit_countdown = config.audit_stride;
      }
      do_proposal(false, auditing);
    }
    if (sweep % config.thin_sweeps != 0) continue;

    // exact re-projection is a pure change of representation
    rebuild(st, basis, g_half_dx, flat, constrained, n_atoms);
    const double energy = true_energy();
    out.energies.push_back(energy);

    double n_left = 0.0, total = 0.0;
    const long block = std::min<long>(31, 32 * sample_idx / std::max<long>(1, n_samples_target));
    auto& blk = out.blocks[static_cast<std::size_t>(block)];
    for (std::size_t b = 0; b < st.c.size(); ++b) {
      const int kb = basis.branches[b].n_modes;
      Eigen::Map<const Eigen::VectorXcd> cb(st.c[b].data(), kb);
      const Eigen::VectorXcd pl =
          basis.left_overlap.topLeftCorner(kb, kb).cast<cplx>() * cb;
      n_left += std::real(cb.dot(pl));
      total += cb.squaredNorm();
      out.g_mode.topLeftCorner(kb, kb) += cb * cb.adjoint();
      blk.g_mode.topLeftCorner(kb, kb) += cb * cb.adjoint();
    }
    const double d = 2.0 * n_left - total;
    out.imbalances.push_back(d);
    blk.sum_d += d;
    blk.sum_d2 += d * d;
    blk.count += 1;

    if (config.store_mode_occupations) {
      std::vector<double> occ;
      occ.reserve(n_modes);
      for (const auto& br : st.c)
        for (const auto& v : br) occ.push_back(std::norm(v));
      out.mode_occupations.push_back(std::move(occ));
    }
    if (config.store_fields) {
      FieldSample fs;
      fs.grid = grid;
      fs.components = st.u;
      out.fields.push_back(std::move(fs));
    }
    ++sample_idx;
  }
  out.n_samples = sample_idx;
  out.acceptance_rate = proposed > 0 ? static_cast<double>(accepted) / proposed : 0.0;

  if (out.acceptance_rate < 0.05 || out.acceptance_rate > 0.9)
    out.warnings.push_back(
        "acceptance rate " + std::to_string(out.acceptance_rate) +
        " outside [0.05, 0.9]; adjust proposal_amplitude or chain length");

  // non-ergodicity heuristic on the energy series
  if (out.energies.size() >= 64) {
    const auto& e = out.energies;
    const double nS = static_cast<double>(e.size());
    double mean = 0.0;
    for (double v : e) mean += v;
    mean /= nS;
    double var = 0.0;
    for (double v : e) var += (v - mean) * (v - mean);
    var /= nS;
    double tau = 1.0;
    if (var > 0.0) {
      for (std::size_t lag = 1; lag < e.size() / 2; ++lag) {
        double c = 0.0;
        for (std::size_t i = 0; i + lag < e.size(); ++i)
          c += (e[i] - mean) * (e[i + lag] - mean);
        c /= (nS - static_cast<double>(lag)) * var;
        if (c < 0.0) break;
        tau += 2.0 * c;
      }
    }
    const double tau_sweeps = tau * static_cast<double>(config.thin_sweeps);
    if (tau_sweeps > static_cast<double>(config.sweeps) / 50.0)
      throw ConvergenceError(
          "sampler: energy autocorrelation time exceeds chain/50; lengthen the chain");
  }
  return out;
}

double gp_energy(const FieldSample& sample, const std::vector<double>& potential,
                 const gpe::GpeParams& params,
                 const std::vector<double>& branch_offsets) {
  const Grid& grid = sample.grid;
  require(potential.size() == grid.size(), "gp_energy: grid mismatch");
  require(branch_offsets.empty() || branch_offsets.size() == sample.components.size(),
          "gp_energy: branch offset count mismatch");
  const int n = grid.points[0];
  const double dx = grid.cell_volume();

  std::vector<cplx> buf(grid.size());
  fftw_plan plan;
  {
    static std::mutex mu;
    std::lock_guard<std::mutex> lock(mu);
    plan = fftw_plan_dft_1d(n, reinterpret_cast<fftw_complex*>(buf.data()),
                            reinterpret_cast<fftw_complex*>(buf.data()),
                            FFTW_FORWARD, FFTW_ESTIMATE);
  }

  double e = 0.0;
  std::vector<double> density(grid.size(), 0.0);
  for (std::size_t b = 0; b < sample.components.size(); ++b) {
    const auto& comp = sample.components[b];
    require(comp.size() == grid.size(), "gp_energy: component size mismatch");
    std::copy(comp.begin(), comp.end(), buf.begin());
    fftw_execute(plan);
    double kin = 0.0;
    for (int m = 0; m < n; ++m) {
      const double k = grid.wavenumber(0, m);
      kin += hbar * hbar * k * k / (2.0 * params.mass) * std::norm(buf[m]);
    }
    e += kin * dx / static_cast<double>(n);
    double pot = 0.0, nrm = 0.0;
    for (int i = 0; i < n; ++i) {
      const double d = std::norm(comp[i]);
      pot += potential[i] * d;
      nrm += d;
      density[i] += d;
    }
    e += pot * dx;
    if (!branch_offsets.empty()) e += branch_offsets[b] * nrm * dx;
  }
  double quart = 0.0;
  for (double d : density) quart += d * d;
  e += 0.5 * params.coupling * quart * dx;

  {
    static std::mutex mu;
    std::lock_guard<std::mutex> lock(mu);
    fftw_destroy_plan(plan);
  }
  return e;
}

double condensed_population(const std::vector<FieldSample>& ensemble,
                            par::Mode mode) {
  require(ensemble.size() >= 100, "condensed_population: need >= 100 samples");
  const Grid grid = ensemble.front().grid;
  const std::size_t n = grid.size();

  std::vector<cplx> flat;
  for (const auto& s : ensemble) {
    require(s.grid == grid, "condensed_population: inconsistent grids");
    for (const auto& comp : s.components)
      flat.insert(flat.end(), comp.begin(), comp.end());
  }
  std::vector<cplx> gram(n * n, cplx{});
  kernels::gram_accumulate(flat, n, gram, mode);

  Eigen::Map<Eigen::MatrixXcd> g(gram.data(), static_cast<long>(n),
                                 static_cast<long>(n));
  const double herm = (g - g.adjoint()).cwiseAbs().maxCoeff();
  require(herm <= 1e-9 * std::max(1.0, g.cwiseAbs().maxCoeff()),
          "condensed_population: one-body matrix not Hermitian (averaging bug)");

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(
      g, Eigen::EigenvaluesOnly);
  const auto& ev = es.eigenvalues();
  const double scale = grid.cell_volume() / static_cast<double>(ensemble.size());
  return (ev(ev.size() - 1) + ev(ev.size() - 2)) * scale;
}

double condensed_population(const Eigen::MatrixXcd& g_mode_sum, long n_samples) {
  require(n_samples >= 1, "condensed_population: empty accumulator");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(g_mode_sum,
                                                     Eigen::EigenvaluesOnly);
  const auto& ev = es.eigenvalues();
  if (ev.size() == 1) return ev(0) / static_cast<double>(n_samples);
  return (ev(ev.size() - 1) + ev(ev.size() - 2)) / static_cast<double>(n_samples);
}

namespace {

struct JackknifeOut {
  double value = 0.0, err = 0.0;
};

// leave-one-block-out estimates of a statistic assembled from block sums
template <typename F>
JackknifeOut jackknife(const std::vector<BlockStats>& blocks, F&& stat) {
  std::vector<const BlockStats*> used;
  for (const auto& b : blocks)
    if (b.count > 0) used.push_back(&b);
  const long nb = static_cast<long>(used.size());
  JackknifeOut out;
  out.value = stat(nullptr);
  if (nb < 2) return out;
  double mean = 0.0;
  std::vector<double> loo(nb);
  for (long j = 0; j < nb; ++j) {
    loo[j] = stat(used[j]);
    mean += loo[j];
  }
  mean /= nb;
  double ss = 0.0;
  for (long j = 0; j < nb; ++j) ss += (loo[j] - mean) * (loo[j] - mean);
  out.err = std::sqrt((nb - 1.0) / nb * ss);
  return out;
}

}  // namespace

FluctuationReport fluctuations(const SampleResult& run, double n_atoms) {
  require(run.n_samples >= 8, "fluctuations: too few samples");
  FluctuationReport rep;

  auto var_normal_stat = [&](const BlockStats* skip) {
    double sd = 0.0, sd2 = 0.0;
    long cnt = 0;
    for (const auto& b : run.blocks) {
      if (&b == skip || b.count == 0) continue;
      sd += b.sum_d;
      sd2 += b.sum_d2;
      cnt += b.count;
    }
    const double mean = sd / cnt;
    return sd2 / cnt - mean * mean;
  };
  auto n2m_stat = [&](const BlockStats* skip) {
    Eigen::MatrixXcd g = run.g_mode;
    long cnt = run.n_samples;
    if (skip != nullptr) {
      g -= skip->g_mode;
      cnt -= skip->count;
    }
    return condensed_population(g, cnt);
  };
  auto xi2_stat = [&](const BlockStats* skip) {
    return ((n_atoms - n2m_stat(skip)) + var_normal_stat(skip)) / n_atoms;
  };

  const auto vn = jackknife(run.blocks, var_normal_stat);
  const auto n2m = jackknife(run.blocks, n2m_stat);
  const auto xi = jackknife(run.blocks, xi2_stat);

  rep.var_normal = vn.value;
  rep.n_two_modes = n2m.value;
  rep.n2m_err = n2m.err;
  rep.var_total = (n_atoms - n2m.value) + vn.value;
  rep.xi2 = xi.value;
  rep.xi2_err = xi.err;
  // at the quantum floor the classical field cannot claim sub-binomial values
  rep.classical_field_valid = vn.value > 3.0 * vn.err;
  return rep;
}

FluctuationReport fluctuations(const std::vector<FieldSample>& ensemble,
                               double n_two_modes, double n_atoms,
                               double partition_x) {
  require(ensemble.size() >= 8, "fluctuations: too few samples");
  const Grid grid = ensemble.front().grid;
  require(partition_x > grid.coord(0, 0) &&
              partition_x < grid.coord(0, grid.points[0] - 1),
          "fluctuations: partition plane outside grid");
  const int n = grid.points[0];
  const double dx = grid.spacing(0);

  std::vector<double> wleft(n);
  for (int i = 0; i < n; ++i) {
    const double x = grid.coord(0, i);
    wleft[i] = (x < partition_x - 0.25 * dx) ? 1.0
               : (x > partition_x + 0.25 * dx) ? 0.0
                                               : 0.5;
  }
  std::vector<BlockStats> blocks(
      32, BlockStats{Eigen::MatrixXcd::Zero(1, 1), 0.0, 0.0, 0});
  const long ns = static_cast<long>(ensemble.size());
  for (long s = 0; s < ns; ++s) {
    double n_left = 0.0, total = 0.0;
    for (const auto& comp : ensemble[static_cast<std::size_t>(s)].components)
      for (int i = 0; i < n; ++i) {
        const double d = std::norm(comp[i]) * dx;
        n_left += wleft[i] * d;
        total += d;
      }
    const double d = 2.0 * n_left - total;
    auto& blk = blocks[static_cast<std::size_t>(std::min<long>(31, 32 * s / ns))];
    blk.sum_d += d;
    blk.sum_d2 += d * d;
    blk.count += 1;
  }

  auto var_normal_stat = [&](const BlockStats* skip) {
    double sd = 0.0, sd2 = 0.0;
    long cnt = 0;
    for (const auto& b : blocks) {
      if (&b == skip || b.count == 0) continue;
      sd += b.sum_d;
      sd2 += b.sum_d2;
      cnt += b.count;
    }
    const double mean = sd / cnt;
    return sd2 / cnt - mean * mean;
  };
  const auto vn = jackknife(blocks, var_normal_stat);

  FluctuationReport rep;
  rep.var_normal = vn.value;
  rep.n_two_modes = n_two_modes;
  rep.var_total = (n_atoms - n_two_modes) + vn.value;
  rep.xi2 = rep.var_total / n_atoms;
  rep.xi2_err = vn.err / n_atoms;
  rep.classical_field_valid = vn.value > 3.0 * vn.err;
  return rep;
}

AuditReport audit_detailed_balance(const SampleResult& run, double temperature) {
  AuditReport rep;
  const double kt = k_boltzmann * temperature;
  for (const auto& rec : run.audit) {
    const double scale = std::abs(rec.delta_e) + kt;
    rep.max_energy_mismatch = std::max(
        rep.max_energy_mismatch, std::abs(rec.delta_e - rec.delta_e_scratch) / scale);
    // forward/backward acceptance ratio must reproduce the Boltzmann factor
    // times the proposal-density ratio
    const double x = std::exp(-rec.delta_e / kt + rec.log_q_ratio);
    const double af = std::min(1.0, x);
    const double ar = std::min(1.0, 1.0 / x);
    if (std::abs(af / ar - x) > 1e-12 * x) rep.kernel_identity_ok = false;
    if (std::abs(rec.accept_prob - af) > 1e-12) rep.kernel_identity_ok = false;
    ++rep.checked;
  }
  return rep;
}

double harmonic_tc(double n_atoms, const std::array<double, 3>& f_hz) {
  require(n_atoms >= 100.0, "harmonic_tc: formula needs N >= 100");
  const double f_bar = std::cbrt(f_hz[0] * f_hz[1] * f_hz[2]);
  return h_planck * f_bar * std::cbrt(n_atoms / zeta3) / k_boltzmann;
}

std::vector<CurvePoint> xi2_curve(const std::vector<double>& potential,
                                  const Grid& grid, const gpe::GpeParams& params,
                                  const std::vector<double>& t_over_tc,
                                  const CurveConfig& config, par::Mode mode) {
  for (std::size_t i = 1; i < t_over_tc.size(); ++i)
    require(t_over_tc[i] > t_over_tc[i - 1], "xi2_curve: T grid must ascend");
  require(config.tc > 0.0, "xi2_curve: Tc must be positive");
  require(config.e_charging > 0.0, "xi2_curve: E_C must be positive");

  std::vector<CurvePoint> rows(t_over_tc.size());
  std::vector<std::string> failures(t_over_tc.size());
  par::parallel_for(t_over_tc.size(), mode, [&](std::size_t i) {
    SamplerConfig sc = config.sampler;
    sc.temperature = t_over_tc[i] * config.tc;
    // splitmix-style per-point seed derivation
    unsigned long long z = config.sampler.seed + 0x9E3779B97F4A7C15ULL * (i + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    sc.seed = z ^ (z >> 31);
    try {
      const auto run = sample(potential, grid, params, sc);
      const auto rep = fluctuations(run, params.atom_number);
      CurvePoint pt;
      pt.t_over_tc = t_over_tc[i];
      pt.temperature = sc.temperature;
      pt.xi2 = rep.xi2;
      pt.xi2_err = rep.xi2_err;
      pt.n2m_frac = rep.n_two_modes / params.atom_number;
      pt.xi2_tmm_ext = twomode::extended_xi2(params.atom_number, config.e_charging,
                                             sc.temperature, rep.n_two_modes);
      pt.valid = rep.classical_field_valid;
      pt.acceptance = run.acceptance_rate;
      rows[i] = pt;
    } catch (const Error& e) {
      failures[i] = e.what();
    }
  });
  for (std::size_t i = 0; i < rows.size(); ++i)
    if (!failures[i].empty())
      throw Error("xi2_curve at T/Tc=" + std::to_string(t_over_tc[i]) + ": " +
                  failures[i]);
  return rows;
}

}  // namespace bjj::classicalfield
