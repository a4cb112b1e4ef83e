#pragma once

#include <map>
#include <string>
#include <vector>

#include "bjj/parallel.hpp"

// Scenario runners behind the bjjsim front door: full-pipeline sweeps with
// CSV output, plain-text summaries and shape checks.
namespace bjj::scenarios {

struct RunSummary {
  std::string scenario;
  double wall_seconds = 0.0;
  std::map<std::string, double> scalars;
  std::vector<std::pair<std::string, bool>> checks;
  std::vector<std::string> outputs;  // emitted CSV files
  std::string config_hash;
  std::string build_id;

  bool all_ok() const;
  void write(const std::string& out_dir) const;
  std::string text() const;
};

std::string build_id();
// FNV-1a over the canonical "key=value\n" serialization
std::string config_hash(const std::map<std::string, double>& numeric,
                        const std::map<std::string, std::string>& text = {});

struct Fig1cConfig {
  std::string layout_path;  // empty = shipped default chip
  double i2_start_ma = 0.0;
  double i2_stop_ma = 3.2;
  double i2_step_ma = 0.2;
  double grid_pitch_um = 0.25;
  std::string out_dir = ".";
};

RunSummary run_fig1c(const Fig1cConfig& cfg);

struct Fig2Config {
  std::string layout_path;
  double n_atoms = 1300.0;
  double t_initial_nk = 50.0;
  std::vector<double> tau_r_ms = {10, 20, 30, 40, 50, 60, 70, 80};
  double i2_start_ma = 1.9;
  double i2_stop_ma = 3.9;
  int ramp_table_points = 21;
  double dt_ms = 0.25;
  std::string params_csv;   // optional cached table (vb_Hz,ec_Hz,ej_Hz,mu_Hz,n)
  std::string out_dir = ".";
  bool use_cache = true;
};

RunSummary run_fig2(const Fig2Config& cfg);

struct Fig4Config {
  std::vector<double> n_values = {600.0, 1700.0};
  double vb_hz = 2690.0;
  double x0_um = 3.8;
  double f_y_hz = 1120.0;
  double f_z_hz = 1473.0;
  // longitudinal frequency of the harmonic trap prior to splitting, used for
  // the T_c normalization (calibration constant, see README)
  double presplit_fx_hz = 774.5;
  double t_start = 0.3, t_stop = 2.2, t_step = 0.1;  // in units of Tc
  double cutoff_alpha = 1.0;
  long sweeps = 4000;
  long burn_in = 1000;
  unsigned long long seed = 7;
  std::string out_dir = ".";
};

RunSummary run_fig4(const Fig4Config& cfg);

struct EstimatorBenchConfig {
  double n_atoms = 1300.0;
  long shots = 10000;
  long coverage_reps = 50;
  long coverage_shots = 400;
  unsigned long long seed = 3;
  std::string out_dir = ".";
};

RunSummary run_estimator_bench(const EstimatorBenchConfig& cfg);

// shared helpers for the CLI and the acceptance suite

struct GpeParamsRow {
  double vb_hz, ec_hz, ej_hz, mu_hz, n;
};

// two-mode parameter table for the quartic geometry at a given barrier list
std::vector<GpeParamsRow> quartic_params_table(const std::vector<double>& vb_hz,
                                               double x0_um, double f_perp_hz,
                                               double n_atoms);

struct ChipRampTable {
  std::vector<double> i2_ma;
  std::vector<GpeParamsRow> rows;
};

// full pipeline: chip layout -> axis potential per I2 -> 1D GPE -> (E_C, E_J)
ChipRampTable chip_ramp_table(const std::string& layout_path, double i2_start_ma,
                              double i2_stop_ma, int points, double n_atoms,
                              const std::string& cache_dir, bool use_cache);

}  // namespace bjj::scenarios
