#pragma once

#include <vector>

#include "bjj/constants.hpp"
#include "bjj/grid.hpp"
#include "bjj/potential.hpp"

// Gross-Pitaevskii ground states (imaginary-time split-step spectral solver)
// and the two-mode parameters E_C, E_J extracted from them.
namespace bjj::gpe {

struct GpeParams {
  double mass = constants::mass_rb87;  // kg
  double a_scatt = constants::a_scatt_rb87;
  double coupling = 0.0;  // g, J m^dims
  double atom_number = 1.0;

  // g3d = 4 pi hbar^2 a / m
  static GpeParams three_d(double n_atoms, double mass = constants::mass_rb87,
                           double a = constants::a_scatt_rb87);
  // Gaussian transverse reduction: g1d = 2 hbar omega_perp a, with omega_perp
  // the geometric mean of the transverse trap frequencies.
  static GpeParams quasi_1d(double n_atoms, double f_perp_hz,
                            double mass = constants::mass_rb87,
                            double a = constants::a_scatt_rb87);
};

struct Wavefunction {
  Grid grid;
  std::vector<cplx> amp;

  double norm_squared() const;  // integral of |psi|^2
  void normalize(double n_atoms);
};

struct EnergyBreakdown {
  double kinetic = 0, potential = 0, interaction = 0;
  double total() const { return kinetic + potential + interaction; }
  double mu(double n_atoms) const {
    return (kinetic + potential + 2.0 * interaction) / n_atoms;
  }
};

struct SolverOptions {
  double dt = 1e-6;            // s, imaginary time step
  double energy_tol = 1e-10;   // relative per-step energy change
  long max_iterations = 2000000;
  double coarse_dt = 0.0;      // optional first stage (0 = disabled)
  double coarse_tol = 1e-8;
  double boundary_tol = 1e-6;  // max boundary |psi| / peak |psi|
  bool check_monotonic = true;
};

enum class Parity { none, even, odd };

struct GroundState {
  Wavefunction psi;
  double mu = 0.0;  // J
  EnergyBreakdown energy;
  long iterations = 0;
};

// Imaginary-time relaxation to the lowest state of the given parity sector.
GroundState ground_state(const std::vector<double>& potential, const Grid& grid,
                         const GpeParams& params, const SolverOptions& opts = {},
                         Parity parity = Parity::none);

struct SymAntisymPair {
  GroundState symmetric;
  GroundState antisymmetric;
  double splitting() const { return antisymmetric.mu - symmetric.mu; }
};

// Lowest even and odd states of a (symmetric) double well; the tilt must be
// small compared to the level spacing.
SymAntisymPair symmetric_antisymmetric_pair(const std::vector<double>& potential,
                                            const Grid& grid, const GpeParams& params,
                                            const SolverOptions& opts = {});

// E_J = N (mu_a - mu_s) / 2
double josephson_energy(const SymAntisymPair& pair, const GpeParams& params);

struct ChargingOptions {
  double delta_n = 0.0;        // 0 = atom_number / 20
  double wall_height = 0.0;    // J, 0 = auto
  double saddle_x = 0.0;       // m, wall position
  SolverOptions solver;
};

// E_C = 2 dmu_w/dN_w at N_w = N/2 by symmetric finite difference, from
// single-well solves with a hard wall at the saddle.
double charging_energy(const std::vector<double>& potential, const Grid& grid,
                       const GpeParams& params, const ChargingOptions& opts = {});

struct TwoModeParameters {
  double e_charging = 0.0;  // J
  double e_josephson = 0.0; // J
  double mu = 0.0;          // J (symmetric state)
  double barrier = 0.0;     // J, context
  double n_atoms = 0.0;
};

TwoModeParameters two_mode_parameters(const std::vector<double>& potential,
                                      const Grid& grid, const GpeParams& params,
                                      const ChargingOptions& copts = {},
                                      const SolverOptions& sopts = {});

// Per-step (E_C, E_J) along a barrier ramp given as quartic shapes; the
// schedule must be monotone in V_b. Failures carry the step index.
std::vector<TwoModeParameters> ramp_parameters(
    const std::vector<potential::DoubleWellShape>& schedule, const Grid& grid,
    const GpeParams& params, const ChargingOptions& copts = {},
    const SolverOptions& sopts = {});

// Real-time split-step propagation (used by the Rabi oracle test and nothing
// else in the pipeline).
void propagate_real(Wavefunction& psi, const std::vector<double>& potential,
                    const GpeParams& params, double duration, double dt);

EnergyBreakdown energy_breakdown(const Wavefunction& psi,
                                 const std::vector<double>& potential,
                                 const GpeParams& params);

// potential builders
std::vector<double> harmonic_potential(const Grid& grid, double mass,
                                       const std::array<double, 3>& f_hz);
std::vector<double> quartic_x_potential(const Grid& grid,
                                        const potential::DoubleWellShape& shape);

}  // namespace bjj::gpe
