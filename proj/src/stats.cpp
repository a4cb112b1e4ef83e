#include "bjj/stats.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

namespace bjj::stats {

void ShotDataset::validate() const {
  require(shots.size() >= 2, "dataset: need at least 2 shots");
  for (const auto& s : shots) {
    require(s.noise_left >= 0.0 && s.noise_right >= 0.0,
            "dataset: negative noise sigma");
    require(s.n_left + s.n_right > 0.0, "dataset: non-positive total count");
  }
}

void ImagingNoiseModel::validate() const {
  require(quantum_efficiency > 0.0 && quantum_efficiency <= 1.0,
          "noise model: q must be in (0, 1]");
  require(pulse_duration > 0.0 && cross_section > 0.0 && linewidth > 0.0 &&
              pixel_area > 0.0,
          "noise model: tau, sigma, Gamma, pixel area must be positive");
}

double photon_noise_density(const ImagingNoiseModel& model) {
  model.validate();
  return std::sqrt(16.0 / (model.quantum_efficiency * model.cross_section *
                           model.linewidth * model.pulse_duration));
}

double region_noise_atoms(const ImagingNoiseModel& model, double n_pixels) {
  return photon_noise_density(model) * std::sqrt(n_pixels * model.pixel_area);
}

double TruthSpec::xi2() const {
  switch (kind) {
    case Kind::binomial:
      return 1.0;
    case Kind::gaussian_n:
      return 4.0 * var_n / n_total;
    case Kind::uniform_n: {
      const double d = std::floor(n_total) + 1.0;
      return 4.0 * (d * d - 1.0) / 12.0 / n_total;
    }
    case Kind::fock:
      return 0.0;
  }
  return 0.0;
}

namespace {

ShotDataset synthesize_impl(const std::function<double(std::mt19937_64&, double)>& draw_left,
                            double n_total, double total_drift,
                            const ImagingNoiseModel& model, long n_shots,
                            unsigned long long seed, bool photon_noise,
                            double truth_xi2) {
  model.validate();
  require(n_shots >= 2, "synthesize: need at least 2 shots");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);

  const double dl = photon_noise ? region_noise_atoms(model, model.pixels_left) : 0.0;
  const double dr = photon_noise ? region_noise_atoms(model, model.pixels_right) : 0.0;

  ShotDataset ds;
  ds.source = "synthetic";
  ds.truth_xi2 = truth_xi2;
  ds.shots.reserve(static_cast<std::size_t>(n_shots));
  for (long s = 0; s < n_shots; ++s) {
    double nt = n_total;
    if (total_drift > 0.0) nt = n_total * (1.0 + total_drift * unif(rng));
    ShotRecord rec;
    const double nl = draw_left(rng, nt);
    rec.n_left = nl;
    rec.n_right = nt - nl;
    rec.noise_left = dl;
    rec.noise_right = dr;
    if (photon_noise) {
      rec.n_left += dl * gauss(rng);
      rec.n_right += dr * gauss(rng);
    }
    if (model.fringe_amplitude > 0.0) {
      rec.n_left += model.fringe_amplitude * gauss(rng);
      rec.n_right += model.fringe_amplitude * gauss(rng);
    }
    ds.shots.push_back(rec);
  }
  return ds;
}

}  // namespace

ShotDataset synthesize(const TruthSpec& truth, const ImagingNoiseModel& model,
                       long n_shots, unsigned long long seed, bool photon_noise) {
  require(truth.n_total >= 2.0, "synthesize: N must be >= 2");
  require(truth.f_left > 0.0 && truth.f_left < 1.0,
          "synthesize: f_L must be inside (0, 1)");

  std::function<double(std::mt19937_64&, double)> draw_left;
  switch (truth.kind) {
    case TruthSpec::Kind::binomial:
      draw_left = [f = truth.f_left](std::mt19937_64& rng, double nt) {
        std::binomial_distribution<long> bin(static_cast<long>(std::llround(nt)), f);
        return static_cast<double>(bin(rng));
      };
      break;
    case TruthSpec::Kind::gaussian_n:
      draw_left = [v = truth.var_n](std::mt19937_64& rng, double nt) {
        std::normal_distribution<double> g(0.0, std::sqrt(v));
        return nt / 2.0 + g(rng);
      };
      break;
    case TruthSpec::Kind::uniform_n:
      draw_left = [](std::mt19937_64& rng, double nt) {
        const long half = static_cast<long>(std::llround(nt)) / 2;
        std::uniform_int_distribution<long> u(-half, half);
        return nt / 2.0 + static_cast<double>(u(rng));
      };
      break;
    case TruthSpec::Kind::fock:
      draw_left = [](std::mt19937_64&, double nt) { return nt / 2.0; };
      break;
  }
  return synthesize_impl(draw_left, truth.n_total, truth.total_drift, model,
                         n_shots, seed, photon_noise, truth.xi2());
}

ShotDataset synthesize_from_sampler(const std::function<double(std::mt19937_64&)>& draw_n,
                                    double n_total, const ImagingNoiseModel& model,
                                    long n_shots, unsigned long long seed,
                                    bool photon_noise) {
  auto draw_left = [&draw_n](std::mt19937_64& rng, double nt) {
    return nt / 2.0 + draw_n(rng);
  };
  ShotDataset ds = synthesize_impl(draw_left, n_total, 0.0, model, n_shots, seed,
                                   photon_noise, 0.0);
  ds.truth_xi2.reset();
  return ds;
}

namespace {

struct CoreEstimate {
  double f_left, f_right, z2, zp2, xi2;
};

CoreEstimate core_estimate(const std::vector<ShotRecord>& shots) {
  double fl = 0.0;
  for (const auto& s : shots) fl += s.n_left / (s.n_left + s.n_right);
  fl /= static_cast<double>(shots.size());
  const double fr = 1.0 - fl;

  double z2 = 0.0, zp2 = 0.0;
  for (const auto& s : shots) {
    const double total = s.n_left + s.n_right;
    const double n = fr * s.n_left - fl * s.n_right;
    const double denom = fl * fr * total;
    z2 += n * n / denom;
    zp2 += (fr * fr * s.noise_left * s.noise_left +
            fl * fl * s.noise_right * s.noise_right) /
           denom;
  }
  z2 /= static_cast<double>(shots.size());
  zp2 /= static_cast<double>(shots.size());
  return {fl, fr, z2, zp2, z2 - zp2};
}

}  // namespace

EstimateResult estimate(const ShotDataset& dataset, const EstimateOptions& opts) {
  dataset.validate();
  EstimateResult res;
  if (dataset.shots.size() < 100)
    res.warnings.push_back("fewer than 100 shots; variance estimate is noisy");

  const auto core = core_estimate(dataset.shots);
  res.f_left = core.f_left;
  res.f_right = core.f_right;
  res.z2_mean = core.z2;
  res.zp2_mean = core.zp2;
  res.xi2 = core.xi2;
  res.n_shots = static_cast<long>(dataset.shots.size());

  if (opts.bootstrap_resamples > 0) {
    const auto ci = bootstrap_ci(
        dataset,
        [](const ShotDataset& d) { return core_estimate(d.shots).xi2; },
        opts.bootstrap_resamples, opts.bootstrap_seed, 0.68, opts.mode);
    res.ci_low = ci.low;
    res.ci_high = ci.high;
    if (ci.degenerate)
      res.warnings.push_back("degenerate dataset: zero-width confidence interval");
  }
  return res;
}

BootstrapResult bootstrap_ci(const ShotDataset& dataset,
                             const std::function<double(const ShotDataset&)>& statistic,
                             long resamples, unsigned long long seed,
                             double coverage, par::Mode mode) {
  dataset.validate();
  require(resamples >= 1000, "bootstrap: need at least 1000 resamples");
  const std::size_t n = dataset.shots.size();

  std::vector<double> values(static_cast<std::size_t>(resamples));
  par::parallel_for(static_cast<std::size_t>(resamples), mode, [&](std::size_t r) {
    // independent, scheduling-free stream per resample
    unsigned long long z = seed + 0x9E3779B97F4A7C15ULL * (r + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    std::mt19937_64 rng(z ^ (z >> 31));
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    ShotDataset resample;
    resample.shots.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
      resample.shots.push_back(dataset.shots[pick(rng)]);
    values[r] = statistic(resample);
  });

  std::sort(values.begin(), values.end());
  const double alpha = (1.0 - coverage) / 2.0;
  const auto at = [&](double q) {
    const double pos = q * static_cast<double>(values.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return values[lo] * (1.0 - frac) + values[hi] * frac;
  };
  BootstrapResult out;
  out.low = at(alpha);
  out.high = at(1.0 - alpha);
  out.degenerate = (out.high - out.low) == 0.0;
  return out;
}

double fringe_xi2(const std::vector<std::pair<double, double>>& empty_region_counts,
                  double n_reference) {
  require(empty_region_counts.size() >= 2, "fringe_xi2: need at least 2 regions");
  require(n_reference > 0.0, "fringe_xi2: reference atom number must be positive");
  double mean = 0.0;
  for (const auto& [cl, cr] : empty_region_counts) mean += 0.5 * (cl - cr);
  mean /= static_cast<double>(empty_region_counts.size());
  double var = 0.0;
  for (const auto& [cl, cr] : empty_region_counts) {
    const double n = 0.5 * (cl - cr) - mean;
    var += n * n;
  }
  var /= static_cast<double>(empty_region_counts.size());
  return 4.0 * var / n_reference;
}

ShotDataset load_dataset(const std::string& path) {
  std::ifstream f(path);
  require(f.good(), "dataset: cannot open " + path);
  std::string header;
  require(static_cast<bool>(std::getline(f, header)), "dataset: missing header");
  ShotDataset ds;
  ds.source = "file";
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ls(line);
    ShotRecord rec;
    require(static_cast<bool>(ls >> rec.n_left >> rec.n_right >> rec.noise_left >>
                              rec.noise_right),
            "dataset: bad row '" + line + "'");
    ds.shots.push_back(rec);
  }
  ds.validate();
  return ds;
}

void save_dataset(const ShotDataset& dataset, const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  require(f.good(), "dataset: cannot open " + path + " for writing");
  f << "NL,NR,dNL,dNR\n";
  char buf[160];
  for (const auto& s : dataset.shots) {
    std::snprintf(buf, sizeof(buf), "%.10g,%.10g,%.10g,%.10g\n", s.n_left,
                  s.n_right, s.noise_left, s.noise_right);
    f << buf;
  }
}

ImagingNoiseModel load_noise_model(const std::string& path) {
  std::ifstream f(path);
  require(f.good(), "noise model: cannot open " + path);
  ImagingNoiseModel m;
  std::string line;
  while (std::getline(f, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    std::istringstream ls(line);
    std::string key;
    double value;
    if (!(ls >> key >> value)) continue;
    if (key == "q")
      m.quantum_efficiency = value;
    else if (key == "tau_us")
      m.pulse_duration = value * 1e-6;
    else if (key == "sigma_m2")
      m.cross_section = value;
    else if (key == "gamma_mhz")
      m.linewidth = 2.0 * constants::pi * value * 1e6;
    else if (key == "pixel_area_um2")
      m.pixel_area = value * 1e-12;
    else if (key == "pixels_left")
      m.pixels_left = value;
    else if (key == "pixels_right")
      m.pixels_right = value;
    else if (key == "fringe_atoms")
      m.fringe_amplitude = value;
    else
      throw InvalidInput("noise model: unknown key '" + key + "'");
  }
  m.validate();
  return m;
}

}  // namespace bjj::stats
