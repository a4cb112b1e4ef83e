#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "bjj/constants.hpp"
#include "bjj/error.hpp"
#include "bjj/grid.hpp"
#include "bjj/parallel.hpp"

// Two-mode model on the Fock ladder n = (N_L - N_R)/2: Hamiltonian, thermal
// states, von Neumann evolution through a barrier ramp, and the derived
// observables.
namespace bjj::twomode {

struct TwoModeSystem {
  long n_atoms = 2;         // even, >= 2
  double e_charging = 0.0;  // J
  double e_josephson = 0.0; // J
  double tilt = 0.0;        // J

  TwoModeSystem() = default;
  TwoModeSystem(long n, double ec, double ej, double de = 0.0);
  // odd experimental counts are rounded down to the ladder's even N
  static TwoModeSystem from_experimental(double n, double ec, double ej,
                                         double de = 0.0);
  long dim() const { return n_atoms + 1; }
};

// Hermitian tridiagonal: diag (E_C/2) n^2 + tilt n, off-diagonal
// -(E_J/N) sqrt((N/2-n)(N/2+n+1)).
struct TridiagonalHamiltonian {
  std::vector<double> diag;
  std::vector<double> off;  // size dim-1
  Eigen::MatrixXd dense() const;
};

TridiagonalHamiltonian build_hamiltonian(const TwoModeSystem& system);

struct FockDensityMatrix {
  Eigen::MatrixXcd rho;
  long n_atoms = 0;

  void validate() const;  // trace 1, Hermitian, eigenvalues >= -1e-10
};

// exp(-H/kT)/Z by spectral decomposition; T = 0 gives the ground-state
// projector.
FockDensityMatrix thermal_state(const TwoModeSystem& system, double temperature);

// Spectral form kept by the propagator: rho = sum_k weight_k |col_k><col_k|.
// The columns may live on a contiguous window of the ladder (index_offset is
// the ladder index of the first component); the propagator verifies that no
// population reaches the window edge.
struct StateEnsemble {
  long n_atoms = 0;
  long basis_dim = 0;     // window size, n_atoms + 1 when unwindowed
  long index_offset = 0;  // ladder index of component 0
  std::vector<double> weights;
  std::vector<cplx> states;  // basis_dim x count, column-major
  long dim() const { return basis_dim; }
  long count() const { return static_cast<long>(weights.size()); }
  double n_value(long i) const {
    return static_cast<double>(index_offset + i) - n_atoms / 2.0;
  }

  double trace() const;
  double purity() const;
  double edge_weight() const;  // population in the outermost window sites
  FockDensityMatrix density_matrix() const;  // embedded in the full ladder
};

StateEnsemble thermal_ensemble(const TwoModeSystem& system, double temperature,
                               double weight_cutoff = 1e-13);
// exact spectral decomposition of an arbitrary density matrix
StateEnsemble decompose(const FockDensityMatrix& rho, double weight_cutoff = 1e-13);

struct RampPoint {
  double time = 0.0;  // s
  double e_charging = 0.0, e_josephson = 0.0, tilt = 0.0;
};

struct RampSchedule {
  std::vector<RampPoint> points;  // strictly increasing times
  void validate() const;
  RampPoint at(double t) const;  // piecewise linear
  double t_begin() const { return points.front().time; }
  double t_end() const { return points.back().time; }
};

struct TwoModeObservables {
  double n_mean = 0.0;
  double n2_mean = 0.0;
  double xi2 = 0.0;           // 4 Var(n) / N
  double coherence = 0.0;     // <cos phi>
  double plasma_omega = 0.0;  // rad/s
  double gain_db = 0.0;       // 10 log10(xi^2 / <cos phi>^2)
  double spreading_rate = 0.0;  // xi sqrt(N) E_C / hbar
};

TwoModeObservables observables(const FockDensityMatrix& rho,
                               const TwoModeSystem& system);
TwoModeObservables observables(const StateEnsemble& ens,
                               const TwoModeSystem& system);

enum class Integrator {
  spectral,  // midpoint-exponential step in the instantaneous eigenbasis
  rk4        // commutator-based 4th order on the full density matrix
};

struct EvolveOptions {
  double dt = 2.5e-4;  // s
  Integrator method = Integrator::spectral;
  double weight_cutoff = 1e-13;
  // spectral method: restrict the ladder to |n| <= n_support (0 = full).
  // Evolution aborts if population reaches the window edge.
  long n_support = 0;
  double edge_tolerance = 1e-9;
  par::Mode mode = par::default_mode();
};

struct TrajectoryPoint {
  double time = 0.0;
  TwoModeObservables obs;
  double trace = 0.0;
  double purity = 0.0;
};

struct Trajectory {
  std::vector<TrajectoryPoint> points;
  StateEnsemble final_state;
  const TrajectoryPoint& final_point() const { return points.back(); }
};

// i hbar drho/dt = [H(t), rho] across the schedule span (or `duration` from
// the schedule start, which must not exceed the span).
Trajectory evolve(const StateEnsemble& initial, const TwoModeSystem& base,
                  const RampSchedule& schedule, const EvolveOptions& opts = {},
                  std::optional<double> duration = std::nullopt);
Trajectory evolve(const FockDensityMatrix& rho, const TwoModeSystem& base,
                  const RampSchedule& schedule, const EvolveOptions& opts = {},
                  std::optional<double> duration = std::nullopt);

// xi^2 = 4 k_B T / (N E_C) + 1 - N2m/N
double extended_xi2(double n_atoms, double e_charging, double temperature,
                    double n_two_modes);

double squeezing_db(double xi2);
double squeezing_from_db(double db);
double plasma_frequency(const TwoModeSystem& system);      // rad/s
double metrology_gain_db(double xi2, double coherence);

}  // namespace bjj::twomode
