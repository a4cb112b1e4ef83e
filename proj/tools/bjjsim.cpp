#include <CLI11.hpp>
#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "bjj/classicalfield.hpp"
#include "bjj/csv.hpp"
#include "bjj/gpe.hpp"
#include "bjj/potential.hpp"
#include "bjj/scenarios.hpp"
#include "bjj/stats.hpp"
#include "bjj/twomode.hpp"

namespace {

using namespace bjj;

// "a:b:step", "a..b[:step]", comma list, or a single value
std::vector<double> parse_range(const std::string& spec, double default_step) {
  std::vector<double> out;
  const auto dots = spec.find("..");
  if (dots != std::string::npos) {
    const double a = std::stod(spec.substr(0, dots));
    std::string rest = spec.substr(dots + 2);
    double step = default_step;
    const auto colon = rest.find(':');
    if (colon != std::string::npos) {
      step = std::stod(rest.substr(colon + 1));
      rest = rest.substr(0, colon);
    }
    const double b = std::stod(rest);
    for (double v = a; v <= b + 1e-9 * std::abs(step); v += step) out.push_back(v);
    return out;
  }
  std::vector<std::string> parts;
  std::string cur;
  for (char c : spec + ",") {
    if (c == ',') {
      if (!cur.empty()) parts.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (parts.size() == 1) {
    const auto c1 = parts[0].find(':');
    if (c1 != std::string::npos) {
      const auto c2 = parts[0].find(':', c1 + 1);
      require(c2 != std::string::npos, "range: expected start:stop:step");
      const double a = std::stod(parts[0].substr(0, c1));
      const double b = std::stod(parts[0].substr(c1 + 1, c2 - c1 - 1));
      const double step = std::stod(parts[0].substr(c2 + 1));
      for (double v = a; v <= b + 1e-9 * std::abs(step); v += step)
        out.push_back(v);
      return out;
    }
  }
  for (const auto& p : parts) out.push_back(std::stod(p));
  return out;
}

int cmd_potential_sweep(const std::string& layout, const std::string& i2_spec,
                        const std::string& out) {
  const auto values_ma = parse_range(i2_spec, 0.2);
  scenarios::Fig1cConfig cfg;
  cfg.layout_path = layout;
  require(values_ma.size() >= 2, "potential sweep: need at least two currents");
  cfg.i2_start_ma = values_ma.front();
  cfg.i2_stop_ma = values_ma.back();
  cfg.i2_step_ma = values_ma.size() > 1 ? values_ma[1] - values_ma[0] : 0.2;
  cfg.out_dir = std::filesystem::path(out).parent_path().string();
  if (cfg.out_dir.empty()) cfg.out_dir = ".";
  const auto sum = scenarios::run_fig1c(cfg);
  std::filesystem::copy_file(sum.outputs.front(), out,
                             std::filesystem::copy_options::overwrite_existing);
  std::cout << sum.text();
  return sum.all_ok() ? 0 : 1;
}

int cmd_gpe_params(const std::string& vb_spec, double x0_um, double n_atoms,
                   double fperp_hz, const std::string& out) {
  const auto vb = parse_range(vb_spec, 500.0);
  const auto rows = scenarios::quartic_params_table(vb, x0_um, fperp_hz, n_atoms);
  CsvWriter csv({"vb_Hz", "ec_Hz", "ej_Hz", "mu_Hz", "n"});
  for (const auto& r : rows) csv.add_row({r.vb_hz, r.ec_hz, r.ej_hz, r.mu_hz, r.n});
  csv.write(out);
  std::cout << "wrote " << out << " (" << rows.size() << " rows)\n";
  return 0;
}

int cmd_tmm_evolve(const std::string& params_csv, double n_atoms, double ti_nk,
                   const std::string& tau_spec, const std::string& out) {
  scenarios::Fig2Config cfg;
  cfg.params_csv = params_csv;
  cfg.n_atoms = n_atoms;
  cfg.t_initial_nk = ti_nk;
  cfg.tau_r_ms = parse_range(tau_spec, 10.0);
  cfg.out_dir = std::filesystem::path(out).parent_path().string();
  if (cfg.out_dir.empty()) cfg.out_dir = ".";
  const auto sum = scenarios::run_fig2(cfg);
  std::filesystem::copy_file(sum.outputs.front(), out,
                             std::filesystem::copy_options::overwrite_existing);
  std::cout << sum.text();
  return sum.all_ok() ? 0 : 1;
}

int cmd_cfield_curve(double vb_hz, double x0_um, double n_atoms,
                     const std::string& t_spec, unsigned long long seed,
                     double fy, double fz, double tc_fx, double alpha,
                     long sweeps, const std::string& out) {
  const double f_perp = std::sqrt(fy * fz);
  const Grid grid = Grid::make_1d(256, std::max(10.0 * x0_um * 1e-6, 20e-6));
  potential::DoubleWellShape shape{constants::hz_to_joule(vb_hz), x0_um * 1e-6, 0.0};
  const auto pot = gpe::quartic_x_potential(grid, shape);
  const auto params = gpe::GpeParams::quasi_1d(n_atoms, f_perp);
  const auto table = scenarios::quartic_params_table({vb_hz}, x0_um, f_perp, n_atoms);

  classicalfield::CurveConfig ccfg;
  ccfg.e_charging = constants::hz_to_joule(table.front().ec_hz);
  ccfg.tc = classicalfield::harmonic_tc(n_atoms, {tc_fx, fy, fz});
  ccfg.sampler.seed = seed;
  ccfg.sampler.sweeps = sweeps;
  ccfg.sampler.burn_in_sweeps = sweeps / 4;
  ccfg.sampler.thin_sweeps = 2;
  ccfg.sampler.cutoff_alpha = alpha;
  ccfg.sampler.transverse = {true, fy, fz};

  const auto pts =
      classicalfield::xi2_curve(pot, grid, params, parse_range(t_spec, 0.1), ccfg);
  CsvWriter csv({"t_over_tc", "xi2", "xi2_err", "n2m_frac", "xi2_tmm_ext",
                 "validity_flag"});
  for (const auto& p : pts)
    csv.add_row({p.t_over_tc, p.xi2, p.xi2_err, p.n2m_frac, p.xi2_tmm_ext,
                 p.valid ? 1.0 : 0.0});
  csv.write(out);
  std::cout << "wrote " << out << " (" << pts.size() << " rows, E_C/h = "
            << table.front().ec_hz << " Hz, Tc = " << ccfg.tc * 1e6 << " uK)\n";
  return 0;
}

int cmd_stats_estimate(const std::string& in, long resamples,
                       const std::string& out) {
  const auto ds = stats::load_dataset(in);
  stats::EstimateOptions opts;
  opts.bootstrap_resamples = resamples;
  const auto res = stats::estimate(ds, opts);
  nlohmann::json j{{"n_shots", res.n_shots},
                   {"f_left", res.f_left},
                   {"f_right", res.f_right},
                   {"z2_mean", res.z2_mean},
                   {"zp2_mean", res.zp2_mean},
                   {"xi2", res.xi2},
                   {"ci68_low", res.ci_low},
                   {"ci68_high", res.ci_high},
                   {"warnings", res.warnings}};
  if (res.xi2 > 0.0) j["xi2_db"] = twomode::squeezing_db(res.xi2);
  std::ofstream f(out.empty() ? "/dev/stdout" : out);
  f << j.dump() << "\n";
  if (!out.empty()) std::cout << "wrote " << out << "\n";
  return 0;
}

int cmd_stats_synth(const std::string& dist, double n_atoms, double fl,
                    long shots, unsigned long long seed,
                    const std::string& noise_model, double var_n, double drift,
                    const std::string& out) {
  stats::TruthSpec truth;
  if (dist == "binomial")
    truth.kind = stats::TruthSpec::Kind::binomial;
  else if (dist == "gaussian-n")
    truth.kind = stats::TruthSpec::Kind::gaussian_n;
  else if (dist == "uniform-n")
    truth.kind = stats::TruthSpec::Kind::uniform_n;
  else if (dist == "fock")
    truth.kind = stats::TruthSpec::Kind::fock;
  else
    throw InvalidInput("stats synth: unknown --dist " + dist);
  truth.n_total = n_atoms;
  truth.f_left = fl;
  truth.var_n = var_n;
  truth.total_drift = drift;
  stats::ImagingNoiseModel model;
  if (!noise_model.empty()) model = stats::load_noise_model(noise_model);
  const auto ds = stats::synthesize(truth, model, shots, seed, true);
  stats::save_dataset(ds, out);
  std::cout << "wrote " << out << " (" << ds.shots.size()
            << " shots, truth xi2 = " << truth.xi2() << ")\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"double-well BEC splitter simulation toolkit"};
  app.require_subcommand(1);
  int threads = 0;
  bool serial = false;
  app.add_option("--threads", threads, "OpenMP thread count (0 = runtime default)");
  app.add_flag("--serial", serial, "run all kernels on their serial path");

  // potential sweep
  auto* pot = app.add_subcommand("potential", "chip-trap characterization");
  auto* sweep = pot->add_subcommand("sweep", "barrier sweep over I2");
  std::string layout, i2_spec = "0:3.2:0.2", out_csv = "sweep.csv";
  sweep->add_option("--layout", layout, "layout file (default: built-in chip)");
  sweep->add_option("--i2", i2_spec, "I2 range in mA, START:STOP:STEP");
  sweep->add_option("--out", out_csv, "output CSV")->required();

  // gpe params
  auto* gpe_cmd = app.add_subcommand("gpe", "Gross-Pitaevskii solves");
  auto* gparams = gpe_cmd->add_subcommand("params", "two-mode parameter table");
  std::string gpe_pot = "quartic", vb_spec = "2690";
  double x0_um = 3.8, gpe_n = 6000, fperp_hz = 1284.4;
  std::string gpe_out = "params.csv";
  gparams->add_option("--potential", gpe_pot, "potential family (quartic)");
  gparams->add_option("--vb-hz", vb_spec, "barrier height(s) V_b/h in Hz");
  gparams->add_option("--x0-um", x0_um, "half well spacing in um");
  gparams->add_option("--n", gpe_n, "atom number");
  gparams->add_option("--fperp-hz", fperp_hz, "transverse frequency (geometric mean)");
  gparams->add_option("--out", gpe_out, "output CSV")->required();

  // tmm evolve
  auto* tmm = app.add_subcommand("tmm", "two-mode model dynamics");
  auto* tevolve = tmm->add_subcommand("evolve", "ramp sweep over tau_r");
  std::string tmm_params, tau_spec = "10..80";
  double tmm_n = 1300, ti_nk = 50;
  std::string tmm_out = "fig2.csv";
  tevolve->add_option("--params", tmm_params, "gpe params CSV")->required();
  tevolve->add_option("--n", tmm_n, "atom number");
  tevolve->add_option("--ti-nk", ti_nk, "initial temperature in nK");
  tevolve->add_option("--tau-r-ms", tau_spec, "ramp times, e.g. 10..80");
  tevolve->add_option("--out", tmm_out, "output CSV")->required();

  // cfield curve
  auto* cf = app.add_subcommand("cfield", "classical-field thermodynamics");
  auto* curve = cf->add_subcommand("curve", "xi^2 versus temperature");
  std::string cf_pot = "quartic", t_spec = "0.3:2.2:0.1";
  double cf_vb = 2690, cf_x0 = 3.8, cf_n = 6000, cf_fy = 1120, cf_fz = 1473,
         cf_tcfx = 774.5, cf_alpha = 1.0;
  long cf_sweeps = 4000;
  unsigned long long cf_seed = 7;
  std::string cf_out = "curve.csv";
  curve->add_option("--potential", cf_pot, "potential family (quartic)");
  curve->add_option("--vb-hz", cf_vb, "barrier height V_b/h in Hz");
  curve->add_option("--x0-um", cf_x0, "half well spacing in um");
  curve->add_option("--n", cf_n, "atom number");
  curve->add_option("--t-over-tc", t_spec, "temperature grid, START:STOP:STEP");
  curve->add_option("--seed", cf_seed, "RNG seed");
  curve->add_option("--fy-hz", cf_fy, "transverse frequency y");
  curve->add_option("--fz-hz", cf_fz, "transverse frequency z");
  curve->add_option("--tc-fx-hz", cf_tcfx, "pre-split longitudinal frequency for Tc");
  curve->add_option("--alpha", cf_alpha, "mode cutoff in units of k_B T");
  curve->add_option("--sweeps", cf_sweeps, "measurement sweeps per point");
  curve->add_option("--out", cf_out, "output CSV")->required();

  // stats
  auto* st = app.add_subcommand("stats", "measurement statistics");
  auto* est = st->add_subcommand("estimate", "number-squeezing estimator");
  std::string est_in, est_out;
  long est_boot = 2000;
  est->add_option("--in", est_in, "dataset file (NL,NR,dNL,dNR)")->required();
  est->add_option("--bootstrap", est_boot, "bootstrap resamples");
  est->add_option("--out", est_out, "summary output (default stdout)");
  auto* synth = st->add_subcommand("synth", "synthetic shot generator");
  std::string sy_dist = "binomial", sy_noise, sy_out = "shots.csv";
  double sy_n = 1300, sy_fl = 0.5, sy_var = 0.0, sy_drift = 0.0;
  long sy_shots = 10000;
  unsigned long long sy_seed = 3;
  synth->add_option("--dist", sy_dist, "binomial|gaussian-n|uniform-n|fock");
  synth->add_option("--n", sy_n, "total atom number");
  synth->add_option("--fl", sy_fl, "left fraction");
  synth->add_option("--shots", sy_shots, "number of shots");
  synth->add_option("--seed", sy_seed, "RNG seed");
  synth->add_option("--noise-model", sy_noise, "imaging noise model file");
  synth->add_option("--var-n", sy_var, "Var(n) for gaussian-n");
  synth->add_option("--drift", sy_drift, "relative total-N drift");
  synth->add_option("--out", sy_out, "output dataset")->required();

  // scenarios
  scenarios::Fig1cConfig f1;
  scenarios::Fig2Config f2;
  scenarios::Fig4Config f4;
  scenarios::EstimatorBenchConfig eb;
  std::string f2_tau = "10..80", f4_nlist = "600,1700";

  auto* s1 = app.add_subcommand("fig1c", "barrier sweep scenario");
  s1->set_config("--config");
  s1->add_option("--layout", f1.layout_path);
  s1->add_option("--i2-start-ma", f1.i2_start_ma);
  s1->add_option("--i2-stop-ma", f1.i2_stop_ma);
  s1->add_option("--i2-step-ma", f1.i2_step_ma);
  s1->add_option("--out", f1.out_dir);

  auto* s2 = app.add_subcommand("fig2", "splitting-time sweep scenario");
  s2->set_config("--config");
  s2->add_option("--layout", f2.layout_path);
  s2->add_option("--n", f2.n_atoms);
  s2->add_option("--ti-nk", f2.t_initial_nk);
  s2->add_option("--tau-r-ms", f2_tau);
  s2->add_option("--i2-start-ma", f2.i2_start_ma);
  s2->add_option("--i2-stop-ma", f2.i2_stop_ma);
  s2->add_option("--table-points", f2.ramp_table_points);
  s2->add_option("--dt-ms", f2.dt_ms);
  s2->add_option("--params-csv", f2.params_csv);
  s2->add_option("--out", f2.out_dir);

  auto* s4 = app.add_subcommand("fig4", "temperature sweep scenario");
  s4->set_config("--config");
  s4->add_option("--n-values", f4_nlist);
  s4->add_option("--vb-hz", f4.vb_hz);
  s4->add_option("--x0-um", f4.x0_um);
  s4->add_option("--fy-hz", f4.f_y_hz);
  s4->add_option("--fz-hz", f4.f_z_hz);
  s4->add_option("--presplit-fx-hz", f4.presplit_fx_hz);
  s4->add_option("--t-start", f4.t_start);
  s4->add_option("--t-stop", f4.t_stop);
  s4->add_option("--t-step", f4.t_step);
  s4->add_option("--alpha", f4.cutoff_alpha);
  s4->add_option("--sweeps", f4.sweeps);
  s4->add_option("--burn-in", f4.burn_in);
  s4->add_option("--seed", f4.seed);
  s4->add_option("--out", f4.out_dir);

  auto* s5 = app.add_subcommand("estimator-bench", "estimator benchmark scenario");
  s5->set_config("--config");
  s5->add_option("--n", eb.n_atoms);
  s5->add_option("--shots", eb.shots);
  s5->add_option("--coverage-reps", eb.coverage_reps);
  s5->add_option("--seed", eb.seed);
  s5->add_option("--out", eb.out_dir);

  CLI11_PARSE(app, argc, argv);
  if (threads > 0) omp_set_num_threads(threads);
  if (serial) par::set_default_mode(par::Mode::serial);

  try {
    if (sweep->parsed()) return cmd_potential_sweep(layout, i2_spec, out_csv);
    if (gparams->parsed())
      return cmd_gpe_params(vb_spec, x0_um, gpe_n, fperp_hz, gpe_out);
    if (tevolve->parsed())
      return cmd_tmm_evolve(tmm_params, tmm_n, ti_nk, tau_spec, tmm_out);
    if (curve->parsed())
      return cmd_cfield_curve(cf_vb, cf_x0, cf_n, t_spec, cf_seed, cf_fy, cf_fz,
                              cf_tcfx, cf_alpha, cf_sweeps, cf_out);
    if (est->parsed()) return cmd_stats_estimate(est_in, est_boot, est_out);
    if (synth->parsed())
      return cmd_stats_synth(sy_dist, sy_n, sy_fl, sy_shots, sy_seed, sy_noise,
                             sy_var, sy_drift, sy_out);
    if (s1->parsed()) {
      const auto sum = scenarios::run_fig1c(f1);
      std::cout << sum.text();
      return sum.all_ok() ? 0 : 1;
    }
    if (s2->parsed()) {
      f2.tau_r_ms = parse_range(f2_tau, 10.0);
      const auto sum = scenarios::run_fig2(f2);
      std::cout << sum.text();
      return sum.all_ok() ? 0 : 1;
    }
    if (s4->parsed()) {
      f4.n_values = parse_range(f4_nlist, 1.0);
      const auto sum = scenarios::run_fig4(f4);
      std::cout << sum.text();
      return sum.all_ok() ? 0 : 1;
    }
    if (s5->parsed()) {
      const auto sum = scenarios::run_estimator_bench(eb);
      std::cout << sum.text();
      return sum.all_ok() ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  std::cerr << "error: no command\n";
  return 2;
}
