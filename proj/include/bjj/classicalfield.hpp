#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "bjj/gpe.hpp"
#include "bjj/grid.hpp"

// Finite-temperature classical-field sampling of P ~ exp(-E[psi,psi*]/kT),
// condensed population from the one-body density matrix, and xi^2(T) curves
// with the quantum-corrected shot-noise term.
//
// Fields live on the shared 1D x-grid. A sample may carry several transverse
// branch components psi_b(x); the single-particle energy of branch b is offset
// by ny*h*f_y + nz*h*f_z. Strict 1D runs have exactly one component.
namespace bjj::classicalfield {

struct FieldSample {
  Grid grid;
  std::vector<std::vector<cplx>> components;

  double norm_squared() const;  // sum over components of integral |psi|^2
};

struct TransverseSpec {
  bool enabled = false;
  double f_y_hz = 0.0;
  double f_z_hz = 0.0;
};

// Single-particle modes below the cutoff: eigenpairs of the discrete
// (spectral-kinetic + V) Hamiltonian on the x-grid, stacked over transverse
// harmonic branches.
struct ModeBasis {
  Grid grid;
  int n_x_modes = 0;
  std::vector<double> eps_x;   // J, ascending
  std::vector<double> phi;     // grid.size() x n_x_modes, column-major, unit L2 norm (dx-weighted)
  struct Branch {
    double offset = 0.0;  // J, transverse excitation energy
    int n_modes = 0;      // x-modes kept in this branch
  };
  std::vector<Branch> branches;
  Eigen::MatrixXd left_overlap;  // n_x_modes^2, integral over x<x_cut of phi_k phi_k'
  double partition_x = 0.0;

  std::size_t total_modes() const;
};

ModeBasis build_modes(const std::vector<double>& potential, const Grid& grid,
                      double mass, double cutoff_energy,
                      const TransverseSpec& transverse, double partition_x = 0.0);

struct SamplerConfig {
  double temperature = 0.0;   // K
  long sweeps = 2000;         // measurement sweeps (1 sweep = total_modes proposals)
  long burn_in_sweeps = 500;
  long thin_sweeps = 1;       // sweeps between stored samples
  double proposal_amplitude = 0.0;  // 0 = auto from k_B T / eps, tuned in burn-in
  double cutoff_alpha = 1.0;        // cutoff = eps0 + alpha k_B T ...
  double cutoff_energy = 0.0;       // ... unless this absolute value (J) is set
  unsigned long long seed = 1;
  bool constrain_norm = true;  // fixed total N by projection after each move
  TransverseSpec transverse;
  bool store_fields = false;      // materialize grid-space samples
  bool store_mode_occupations = false;
  long audit_stride = 0;          // >0: log every k-th proposal for the audit
};

struct AuditRecord {
  double delta_e = 0.0;        // J, incremental candidate energy difference
  double delta_e_scratch = 0.0;  // J, recomputed from scratch
  double log_q_ratio = 0.0;    // log q(b->a)/q(a->b) of the projected proposal
  double accept_prob = 0.0;
};

struct BlockStats {
  Eigen::MatrixXcd g_mode;  // per-block sum over samples of c c^dagger (x-mode space)
  double sum_d = 0.0, sum_d2 = 0.0;  // d = n_L - n_R
  long count = 0;
};

struct SampleResult {
  ModeBasis basis;
  long n_samples = 0;
  double acceptance_rate = 0.0;
  double tuned_amplitude = 0.0;
  std::vector<double> energies;       // J, per stored sample
  std::vector<double> imbalances;     // n_L - n_R per stored sample
  Eigen::MatrixXcd g_mode;            // summed over samples and branches
  std::vector<BlockStats> blocks;     // 32 contiguous chain blocks
  std::vector<FieldSample> fields;    // when store_fields
  std::vector<std::vector<double>> mode_occupations;  // |c|^2 per mode per sample
  std::vector<AuditRecord> audit;
  std::vector<std::string> warnings;
};

// Metropolis chain over mode coefficients. With constrain_norm the move is a
// Gaussian perturbation of one coefficient followed by projection back to the
// norm sphere; the acceptance carries the exact projection proposal-density
// correction so the kernel is reversible on the sphere.
SampleResult sample(const std::vector<double>& potential, const Grid& grid,
                    const gpe::GpeParams& params, const SamplerConfig& config);

// E = integral hbar^2|grad psi|^2/2m + V|psi|^2 + (g/2)|psi_total|^4, plus
// transverse branch offsets for multi-component samples.
double gp_energy(const FieldSample& sample, const std::vector<double>& potential,
                 const gpe::GpeParams& params,
                 const std::vector<double>& branch_offsets = {});

// N2m: sum of the two largest eigenvalues of G(x,x') = <psi*(x')psi(x)>.
double condensed_population(const std::vector<FieldSample>& ensemble,
                            par::Mode mode = par::default_mode());
// Fast path on the accumulated mode-space density matrix.
double condensed_population(const Eigen::MatrixXcd& g_mode_sum, long n_samples);

struct FluctuationReport {
  double var_normal = 0.0;      // normally-ordered part of Var(N_L - N_R)
  double n_two_modes = 0.0;     // N2m
  double var_total = 0.0;       // (N - N2m) + var_normal
  double xi2 = 0.0;
  double xi2_err = 0.0;         // jackknife over chain blocks
  double n2m_err = 0.0;
  bool classical_field_valid = true;  // false at the quantum-floor plateau
};

FluctuationReport fluctuations(const SampleResult& run, double n_atoms);
// Grid-space variant for externally built ensembles.
FluctuationReport fluctuations(const std::vector<FieldSample>& ensemble,
                               double n_two_modes, double n_atoms,
                               double partition_x = 0.0);

struct AuditReport {
  double max_energy_mismatch = 0.0;  // |incremental - scratch| / scale
  bool kernel_identity_ok = true;    // alpha_f/alpha_r == exp(-beta dE) q-ratio
  long checked = 0;
};

AuditReport audit_detailed_balance(const SampleResult& run, double temperature);

// k_B Tc = hbar * omega_bar * (N / zeta(3))^(1/3)
double harmonic_tc(double n_atoms, const std::array<double, 3>& f_hz);

struct CurvePoint {
  double t_over_tc = 0.0;
  double temperature = 0.0;  // K
  double xi2 = 0.0;
  double xi2_err = 0.0;
  double n2m_frac = 0.0;
  double xi2_tmm_ext = 0.0;
  bool valid = true;
  double acceptance = 0.0;
};

struct CurveConfig {
  SamplerConfig sampler;
  double e_charging = 0.0;  // J, feeds the extended-TMM companion column
  double tc = 0.0;          // K
};

// One row per temperature; chains run independently with per-T derived seeds.
std::vector<CurvePoint> xi2_curve(const std::vector<double>& potential,
                                  const Grid& grid, const gpe::GpeParams& params,
                                  const std::vector<double>& t_over_tc,
                                  const CurveConfig& config,
                                  par::Mode mode = par::default_mode());

}  // namespace bjj::classicalfield
