#pragma once

#include <functional>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "bjj/constants.hpp"
#include "bjj/error.hpp"
#include "bjj/parallel.hpp"

// Measurement statistics: synthetic shot generation with photon noise, the
// number-squeezing estimator with photon-noise correction, and bootstrap
// confidence intervals.
namespace bjj::stats {

struct ShotRecord {
  double n_left = 0.0, n_right = 0.0;      // atoms (non-integer allowed)
  double noise_left = 0.0, noise_right = 0.0;  // per-shot photon-noise sigma
};

struct ShotDataset {
  std::vector<ShotRecord> shots;
  std::string source;                     // "synthetic" or "file"
  std::optional<double> truth_xi2;        // generator truth when synthetic

  void validate() const;
};

struct ImagingNoiseModel {
  double quantum_efficiency = 0.84;
  double pulse_duration = 50e-6;                         // s
  double cross_section = constants::sigma0_d2_rb87;      // m^2
  double linewidth = constants::gamma_d2_rb87;           // rad/s
  double pixel_area = 9.5e-12;                           // m^2
  double pixels_left = 400.0, pixels_right = 400.0;
  double fringe_amplitude = 0.0;                         // atoms, optional

  void validate() const;
};

// sqrt(16 / (q sigma Gamma tau)), the photon-shot-noise density in 1/m.
double photon_noise_density(const ImagingNoiseModel& model);
// atom-number noise over a region of n_pixels: density * sqrt(area)
double region_noise_atoms(const ImagingNoiseModel& model, double n_pixels);

struct TruthSpec {
  enum class Kind { binomial, gaussian_n, uniform_n, fock } kind = Kind::binomial;
  double n_total = 0.0;
  double f_left = 0.5;
  double var_n = 0.0;        // gaussian_n: Var of the imbalance n
  double total_drift = 0.0;  // relative shot-to-shot drift of N (uniform +-)

  double xi2() const;  // exact xi^2 of the truth distribution
};

ShotDataset synthesize(const TruthSpec& truth, const ImagingNoiseModel& model,
                       long n_shots, unsigned long long seed,
                       bool photon_noise = true);
// arbitrary imbalance sampler (e.g. diagonal of a two-mode density matrix)
ShotDataset synthesize_from_sampler(const std::function<double(std::mt19937_64&)>& draw_n,
                                    double n_total, const ImagingNoiseModel& model,
                                    long n_shots, unsigned long long seed,
                                    bool photon_noise = true);

struct EstimateResult {
  double f_left = 0.0, f_right = 0.0;
  double xi2 = 0.0;
  double z2_mean = 0.0;    // <z^2>
  double zp2_mean = 0.0;   // <z_p^2>
  double ci_low = 0.0, ci_high = 0.0;  // 68% bootstrap interval on xi^2
  long n_shots = 0;
  std::vector<std::string> warnings;
};

struct EstimateOptions {
  long bootstrap_resamples = 2000;
  unsigned long long bootstrap_seed = 12345;
  par::Mode mode = par::default_mode();
};

// f_{L,R} = <N_{L,R}/N>; n = f_R N_L - f_L N_R; z = n / sqrt(f_L f_R (N_L+N_R));
// z_p^2 = (f_R^2 dN_L^2 + f_L^2 dN_R^2) / (f_L f_R (N_L+N_R));
// xi^2 = <z^2> - <z_p^2>. Negative results are reported as-is.
EstimateResult estimate(const ShotDataset& dataset, const EstimateOptions& opts = {});

struct BootstrapResult {
  double low = 0.0, high = 0.0;
  bool degenerate = false;  // all-identical dataset
};

// percentile interval (68% by default) of an arbitrary statistic under
// resampling of shots; deterministic under a fixed seed.
BootstrapResult bootstrap_ci(const ShotDataset& dataset,
                             const std::function<double(const ShotDataset&)>& statistic,
                             long resamples, unsigned long long seed,
                             double coverage = 0.68,
                             par::Mode mode = par::default_mode());

// Fringe-level estimate from counts measured in atom-free regions, expressed
// as the xi^2 a binomial cloud of n_reference atoms would show.
double fringe_xi2(const std::vector<std::pair<double, double>>& empty_region_counts,
                  double n_reference);

// dataset file: header "NL,NR,dNL,dNR", one shot per row
ShotDataset load_dataset(const std::string& path);
void save_dataset(const ShotDataset& dataset, const std::string& path);
ImagingNoiseModel load_noise_model(const std::string& path);

}  // namespace bjj::stats
