#include "dpql/cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>
#include <numeric>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <json.hpp>
#include <openssl/evp.h>

#include "dpql/bbr_kinetics.hpp"
#include "dpql/dataset_io.hpp"
#include "dpql/hmm_detector.hpp"
#include "dpql/run_statistics.hpp"
#include "dpql/spectroscopy.hpp"
#include "dpql/sweep_dynamics.hpp"
#include "dpql/trajectory_sim.hpp"

namespace dpql::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConsistencyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Globals {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::vector<double> temperatures;
  std::string out_dir = ".";
  bool reference_defaults = false;
};

struct Setup {
  spectroscopy::MolecularConstants molecule;
  sim::ExperimentConfig experiment;
  sweep::SweepConfig sweep;

  std::string effective_config() const {
    KeyValueConfig c;
    molecule.write_config(c);
    experiment.write_config(c);
    sweep.write_config(c);
    return c.to_text();
  }
};

Setup load_setup(const Globals& g) {
  Setup s;
  if (!g.config_path.empty() && !g.reference_defaults) {
    const KeyValueConfig config = KeyValueConfig::load(g.config_path);
    s.molecule = spectroscopy::MolecularConstants::from_config(config);
    s.experiment = sim::ExperimentConfig::from_config(config);
    s.sweep = sweep::SweepConfig::from_config(config);
    config.reject_unused();
  }
  if (g.seed) s.experiment.seed = *g.seed;
  if (!g.temperatures.empty()) s.experiment.temperature = g.temperatures.front();
  s.experiment.validate();
  return s;
}

/// Tracks written files for the manifest.
class Outputs {
 public:
  explicit Outputs(fs::path dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }

  fs::path path(const std::string& name) const { return dir_ / name; }

  void write(const std::string& name, const std::string& contents) {
    const fs::path p = path(name);
    fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary);
    if (!out) throw InputError("cannot write " + p.string());
    out << contents;
    if (!out) throw InputError("failed writing " + p.string());
    add(name);
  }

  void add(const std::string& name) { files_.push_back(name); }

  void write_manifest(const std::vector<std::string>& args, const Setup& setup) const {
    json m;
    m["tool_version"] = kToolVersion;
    m["command_line"] = std::vector<std::string>(args.begin() + 1, args.end());
    m["seed"] = setup.experiment.seed;
    m["config"] = setup.effective_config();
    json files = json::array();
    for (const auto& f : files_) {
      files.push_back({{"path", f}, {"sha256", sha256_file(path(f))}});
    }
    m["outputs"] = files;
    std::ofstream out(path("manifest.json"), std::ios::binary);
    if (!out) throw InputError("cannot write manifest");
    out << m.dump(2) << '\n';
  }

 private:
  fs::path dir_;
  std::vector<std::string> files_;
};

std::string num(double v) { return format_double(v); }

// ---------------------------------------------------------------- thermal

void cmd_thermal(const Setup& s, const Globals& g, Outputs& o, std::ostream& out) {
  std::vector<double> temps = g.temperatures;
  if (temps.empty()) temps.push_back(s.experiment.temperature);
  const auto levels = spectroscopy::level_set(s.molecule);
  std::vector<spectroscopy::StateDistribution> dists;
  for (double T : temps) {
    dists.push_back(spectroscopy::thermal_distribution(s.molecule, T));
    if (std::abs(dists.back().total() - 1.0) > 1e-9) {
      throw ConsistencyError(fmt::format("populations at {} K do not sum to 1", T));
    }
  }
  std::ostringstream csv;
  csv << "v,omega,J,energy_per_cm";
  for (double T : temps) csv << ",population_T" << num(T) << "K";
  csv << '\n';
  for (std::size_t i = 0; i < levels.size(); ++i) {
    const auto& l = levels[i];
    csv << l.v << ',' << num(l.omega()) << ',' << num(l.J()) << ','
        << num(spectroscopy::level_energy(l, s.molecule));
    for (const auto& d : dists) csv << ',' << num(d.populations[i]);
    csv << '\n';
  }
  o.write("thermal.csv", csv.str());
  for (std::size_t t = 0; t < temps.size(); ++t) {
    out << fmt::format("T = {} K: P(v=0, Omega=3/2, J=3/2) = {:.6f}\n", temps[t],
                       dists[t].probability_of(spectroscopy::kGroundRotational));
  }
}

// --------------------------------------------------------------- lifetime

struct LifetimeFlags {
  double t_min = 200, t_max = 600, t_step = 25;
};

void cmd_lifetime(const Setup& s, const LifetimeFlags& f, Outputs& o, std::ostream& out) {
  if (!(f.t_min > 0) || !(f.t_max >= f.t_min) || !(f.t_step > 0)) {
    throw UsageError("temperature range must satisfy 0 < t-min <= t-max and t-step > 0");
  }
  std::vector<double> temps;
  for (double T = f.t_min; T <= f.t_max + 1e-9; T += f.t_step) temps.push_back(T);
  const auto rows = bbr::lifetime_sweep(s.molecule, temps);
  std::ostringstream csv;
  bbr::write_lifetime_sweep(csv, rows);
  o.write("lifetime.csv", csv.str());
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (!(rows[i].lifetime < rows[i - 1].lifetime)) {
      throw ConsistencyError("lifetime is not decreasing with temperature");
    }
  }
  for (const auto& r : rows) {
    out << fmt::format("T = {} K: lifetime = {:.4f} s\n", r.temperature, r.lifetime);
  }
}

// --------------------------------------------------------------- simulate

struct SimulateFlags {
  double hours = 0;
  std::size_t trials = 1;
  std::string start;
};

void cmd_simulate(Setup& s, const SimulateFlags& f, Outputs& o, std::ostream& out) {
  if (!(f.hours > 0)) throw UsageError("--hours must be positive");
  if (f.trials == 0) throw UsageError("--trials must be >= 1");
  if (!f.start.empty()) s.experiment.start = sim::start_mode_from_string(f.start);
  s.experiment.experiments_per_trial =
      static_cast<std::size_t>(std::llround(f.hours * 3600.0 / s.experiment.cycle));
  s.experiment.validate();
  const sim::MonteCarloModel model(s.molecule, s.experiment);
  const auto trials = sim::simulate_trials(model, s.experiment.seed, f.trials);

  json summary;
  json list = json::array();
  std::vector<double> fractions;
  for (std::size_t i = 0; i < trials.size(); ++i) {
    const std::string name = fmt::format("datasets/trial_{:03d}.csv", i);
    fs::create_directories(o.path("datasets"));
    io::save_dataset(o.path(name), trials[i], s.molecule);
    o.add(name);
    o.add(name + ".config");
    const auto outcomes = trials[i].outcomes();
    const double dark = std::accumulate(outcomes.begin(), outcomes.end(), 0.0) /
                        static_cast<double>(outcomes.size());
    const double pg = sim::ground_occupancy_fraction(trials[i]);
    fractions.push_back(pg);
    list.push_back({{"file", name}, {"seed", trials[i].seed}, {"records", outcomes.size()},
                    {"ground_fraction", pg}, {"dark_fraction", dark}});
  }
  const double mean =
      std::accumulate(fractions.begin(), fractions.end(), 0.0) / static_cast<double>(fractions.size());
  double var = 0;
  for (double x : fractions) var += (x - mean) * (x - mean);
  const double sd = fractions.size() > 1 ? std::sqrt(var / static_cast<double>(fractions.size() - 1)) : 0.0;
  summary["trials"] = list;
  summary["mean_ground_fraction"] = mean;
  summary["sd_ground_fraction"] = sd;
  summary["temperature_K"] = s.experiment.temperature;
  o.write("simulation_summary.json", summary.dump(2) + "\n");
  out << fmt::format("{} trial(s), mean ground fraction {:.5f}, sd {:.5f}\n", trials.size(), mean, sd);
}

// ---------------------------------------------------------------- analyze

struct AnalyzeFlags {
  std::string dataset;
  std::string mode;
  std::string params;
  std::optional<double> p_dark;
  std::size_t window = 20;
  double train_hours = 0;
};

sim::TrialDataset load_input(const std::string& path) {
  if (!fs::exists(path)) throw InputError("dataset not found: " + path);
  return io::load_dataset(path);
}

void analyze_bins(const Setup& s, const sim::ExperimentConfig& ec, const sim::TrialDataset& d,
                  const AnalyzeFlags& f, Outputs& o, std::ostream& out) {
  const auto outcomes = d.outcomes();
  const auto hist = sim::disjoint_bin_histogram(outcomes, f.window);
  const double bins = static_cast<double>(outcomes.size() / f.window);
  if (bins < 1) throw InputError("dataset is shorter than one bin");
  stats::NoiseSignalModel model;
  model.bin = f.window;
  model.p_b = ec.p_bright_noise;
  model.p_d = ec.detection_fidelity;
  model.p_s = bbr::leave_probability_per_cycle(s.molecule, ec.temperature, ec.cycle);
  double sigma = 0.0;
  if (auto ref = stats::reference_ground_occupancy(ec.temperature)) {
    model.p_g = ref->mean;
    sigma = ref->sigma;
  } else {
    model.p_g = spectroscopy::thermal_population(spectroscopy::kGroundRotational, s.molecule,
                                                 ec.temperature);
  }
  const auto pred = stats::bin_value_distribution(bins, model, sigma);
  const auto noise = stats::noise_pmf(model);
  std::ostringstream csv;
  csv << "k,observed_bins,noise_predicted_count,predicted_count,sigma_band_low,sigma_band_high\n";
  for (std::size_t k = 0; k <= f.window; ++k) {
    csv << k << ',' << num(hist[k]) << ',' << num(bins * noise[k]) << ',' << num(pred[k].predicted)
        << ',' << num(pred[k].band_low) << ',' << num(pred[k].band_high) << '\n';
  }
  o.write("bins.csv", csv.str());

  const auto series = sim::bin_series(outcomes, f.window);
  std::ostringstream ma;
  ma << "index,moving_average\n";
  for (std::size_t i = 0; i < series.size(); ++i) ma << i << ',' << num(series[i]) << '\n';
  o.write("moving_average.csv", ma.str());
  const double peak = series.empty() ? 0.0 : *std::max_element(series.begin(), series.end());
  out << fmt::format("{} bins of {}; peak moving average {:.2f}\n", bins, f.window, peak);
}

void analyze_runs(const sim::ExperimentConfig& ec, const sim::TrialDataset& d,
                  const AnalyzeFlags& f, Outputs& o, std::ostream& out) {
  const auto outcomes = d.outcomes();
  std::size_t best = 0, best_start = 0, run = 0;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    run = outcomes[i] ? run + 1 : 0;
    if (run > best) {
      best = run;
      best_start = i + 1 - run;
    }
  }
  const double p_dark = f.p_dark.value_or(ec.p_bright_noise);
  const auto r = stats::significance(outcomes.size(), best, p_dark);
  o.write("significance.json", stats::to_json(r) + "\n");
  out << fmt::format("longest dark run {} at record {}; p = {:.4g}, Z = {:.3f} ({})\n", best,
                     best_start, r.p_value, r.z, stats::to_string(r.method));
}

void analyze_hmm(const Setup& s, const sim::ExperimentConfig& ec, const sim::TrialDataset& d,
                 const AnalyzeFlags& f, Outputs& o, std::ostream& out) {
  hmm::HmmParams params;
  if (!f.params.empty()) {
    params = hmm::HmmParams::from_config(KeyValueConfig::load(f.params));
  } else if (f.train_hours > 0) {
    sim::ExperimentConfig train = ec;
    train.experiments_per_trial =
        static_cast<std::size_t>(std::llround(f.train_hours * 3600.0 / ec.cycle));
    const sim::MonteCarloModel model(s.molecule, train);
    const auto sets = sim::simulate_trials(model, derive_seed(s.experiment.seed, 0x7261696eULL), 1);
    params = hmm::estimate_params_supervised(sets);
  } else {
    params = hmm::default_params(s.molecule, ec);
  }
  KeyValueConfig pc;
  params.write_config(pc);
  o.write("hmm_params.txt", pc.to_text());

  const auto outcomes = d.outcomes();
  const auto decoded = hmm::forward_backward(params, outcomes);
  std::ostringstream csv;
  hmm::write_decoded(csv, outcomes, decoded);
  o.write("decoded.csv", csv.str());

  json signals = json::array();
  for (std::size_t i = 0; i < decoded.states.size();) {
    if (decoded.states[i] != hmm::kSignal) {
      ++i;
      continue;
    }
    std::size_t j = i;
    double sum = 0;
    while (j < decoded.states.size() && decoded.states[j] == hmm::kSignal) sum += decoded.posteriors[j++];
    signals.push_back({{"start", i}, {"length", j - i},
                       {"mean_posterior", sum / static_cast<double>(j - i)}});
    i = j;
  }
  json report;
  report["log_likelihood"] = decoded.log_likelihood;
  report["signals"] = signals;
  if (d.labelled()) {
    const auto m = hmm::evaluate(decoded.states, d.labels());
    report["metrics"] = {{"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1},
                         {"correct_positive", m.correct_positive},
                         {"incorrect_positive", m.incorrect_positive},
                         {"incorrect_negative", m.incorrect_negative}};
    out << fmt::format("precision {:.4f} recall {:.4f} F1 {:.4f}\n", m.precision, m.recall, m.f1);
  }
  o.write("hmm_report.json", report.dump(2) + "\n");
  out << fmt::format("{} signal segment(s)\n", signals.size());
}

void cmd_analyze(const Setup& s, const Globals& g, const AnalyzeFlags& f, Outputs& o,
                 std::ostream& out) {
  const sim::TrialDataset d = load_input(f.dataset);
  if (d.records.empty()) throw InputError("dataset has no records");
  if (f.window == 0) throw UsageError("--window must be >= 1");
  // The dataset's own experiment settings apply unless overridden on the command line.
  sim::ExperimentConfig ec = fs::exists(io::sidecar_path(f.dataset)) ? d.config : s.experiment;
  if (!g.temperatures.empty()) ec.temperature = g.temperatures.front();
  if (f.mode == "bins") {
    analyze_bins(s, ec, d, f, o, out);
  } else if (f.mode == "runs") {
    analyze_runs(ec, d, f, o, out);
  } else {
    analyze_hmm(s, ec, d, f, o, out);
  }
}

// ------------------------------------------------------------------ sweep

struct SweepFlags {
  double mol_min_khz = 400, mol_max_khz = 500, mol_step_khz = 0.25;
  std::vector<double> g_q_hz;
  double threshold = 0.99;
};

void cmd_sweep(const Setup& s, const SweepFlags& f, Outputs& o, std::ostream& out) {
  const double tp = constants::two_pi;
  if (!(f.mol_max_khz >= f.mol_min_khz) || !(f.mol_step_khz > 0)) {
    throw UsageError("omega_mol grid must satisfy min <= max and step > 0");
  }
  const auto grid = sweep::frequency_grid(tp * 1e3 * f.mol_min_khz, tp * 1e3 * f.mol_max_khz,
                                          tp * 1e3 * f.mol_step_khz);
  std::vector<double> couplings;
  for (double g : f.g_q_hz) couplings.push_back(tp * g);
  if (couplings.empty()) couplings.push_back(s.sweep.g_q);
  const auto map = sweep::transfer_window_map(s.sweep, grid, couplings);
  for (const auto& row : map.transfer) {
    for (double v : row) {
      if (!(v >= -1e-9 && v <= 1.0 + 1e-9)) throw ConsistencyError("transfer outside [0, 1]");
    }
  }
  std::ostringstream csv;
  sweep::write_transfer_map(csv, map);
  o.write("transfer_map.csv", csv.str());
  json windows = json::array();
  for (std::size_t i = 0; i < map.g_q.size(); ++i) {
    const auto w = sweep::high_fidelity_window(map, i, f.threshold);
    json entry = {{"g_q_Hz", map.g_q[i] / tp}, {"threshold", f.threshold},
                  {"landau_zener", sweep::landau_zener_oracle(map.g_q[i], s.sweep.ramp_rate)}};
    if (w) {
      entry["omega_mol_low_Hz"] = w->first / tp;
      entry["omega_mol_high_Hz"] = w->second / tp;
      out << fmt::format("g_q = {} Hz: transfer > {} for omega_mol in [{:.2f}, {:.2f}] kHz\n",
                         map.g_q[i] / tp, f.threshold, w->first / tp / 1e3, w->second / tp / 1e3);
    } else {
      entry["omega_mol_low_Hz"] = nullptr;
      entry["omega_mol_high_Hz"] = nullptr;
      out << fmt::format("g_q = {} Hz: no point exceeds {}\n", map.g_q[i] / tp, f.threshold);
    }
    windows.push_back(entry);
  }
  o.write("window.json", windows.dump(2) + "\n");
}

// ----------------------------------------------------------- significance

struct SignificanceFlags {
  std::size_t n = 0;
  std::optional<std::size_t> x;
  std::optional<double> z_target;
  double p_dark = 0.03;
};

void cmd_significance(const SignificanceFlags& f, Outputs& o, std::ostream& out) {
  if (f.x.has_value() == f.z_target.has_value()) {
    throw UsageError("give exactly one of --x and --z-target");
  }
  const auto r = f.x ? stats::significance(f.n, *f.x, f.p_dark)
                     : stats::required_run_length(f.n, f.p_dark, *f.z_target);
  o.write("significance.json", stats::to_json(r) + "\n");
  out << fmt::format("n = {}, x = {}: p = {:.4g}, Z = {:.3f}\n", r.n, r.x, r.p_value, r.z);
}

}  // namespace

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read " + path.string());
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 initialisation failed");
  }
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), digest, &len);
  std::string hex;
  for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", digest[i]);
  return hex;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Molecular-ion DPQL simulation and analysis toolkit", "dpql"};
  app.require_subcommand(1);
  Globals g;
  auto* config_opt = app.add_option("--config", g.config_path, "key = value configuration file");
  app.add_option("--seed", g.seed, "base RNG seed");
  app.add_option("--temperature", g.temperatures, "temperature in K (repeatable for thermal)");
  app.add_option("--out", g.out_dir, "output directory");
  app.add_flag("--paper-defaults", g.reference_defaults, "use the built-in reference constants")
      ->excludes(config_opt);

  auto* thermal = app.add_subcommand("thermal", "thermal populations per level");

  LifetimeFlags lf;
  auto* lifetime = app.add_subcommand("lifetime", "ground-level lifetime over temperature");
  lifetime->add_option("--t-min", lf.t_min, "lowest temperature, K");
  lifetime->add_option("--t-max", lf.t_max, "highest temperature, K");
  lifetime->add_option("--t-step", lf.t_step, "temperature step, K");

  SimulateFlags sf;
  auto* simulate = app.add_subcommand("simulate", "Monte Carlo measurement streams");
  simulate->add_option("--hours", sf.hours, "simulated hours per trial")->required();
  simulate->add_option("--trials", sf.trials, "number of independent trials");
  simulate->add_option("--start", sf.start, "thermal, omega_half or ground");

  AnalyzeFlags af;
  auto* analyze = app.add_subcommand("analyze", "analyse a measurement stream");
  analyze->add_option("--dataset", af.dataset, "dataset CSV")->required();
  analyze->add_option("--mode", af.mode, "bins, runs or hmm")
      ->required()
      ->check(CLI::IsMember({"bins", "runs", "hmm"}));
  analyze->add_option("--params", af.params, "HMM parameter file (hmm mode)");
  analyze->add_option("--p-dark", af.p_dark, "noise dark probability (runs mode)");
  analyze->add_option("--window", af.window, "bin size");
  analyze->add_option("--train-hours", af.train_hours,
                      "train the HMM on this many simulated hours (hmm mode)");

  SweepFlags wf;
  auto* sweep_cmd = app.add_subcommand("sweep", "adiabatic sweep transfer map");
  sweep_cmd->add_option("--omega-mol-min-khz", wf.mol_min_khz);
  sweep_cmd->add_option("--omega-mol-max-khz", wf.mol_max_khz);
  sweep_cmd->add_option("--omega-mol-step-khz", wf.mol_step_khz);
  sweep_cmd->add_option("--g-q-hz", wf.g_q_hz, "coupling values (repeatable)");
  sweep_cmd->add_option("--threshold", wf.threshold, "high-fidelity transfer threshold");

  SignificanceFlags gf;
  auto* signif = app.add_subcommand("significance", "longest-run significance");
  signif->add_option("--n", gf.n, "number of measurements")->required();
  signif->add_option("--x", gf.x, "observed longest dark run");
  signif->add_option("--z-target", gf.z_target, "solve for the run length reaching this Z");
  signif->add_option("--p-dark", gf.p_dark, "noise dark probability");

  try {
    std::vector<std::string> rest(args.rbegin(), args.rend() - 1);
    app.parse(rest);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsageError;
  }

  try {
    Setup setup = load_setup(g);
    Outputs outputs(g.out_dir);
    if (thermal->parsed()) {
      cmd_thermal(setup, g, outputs, out);
    } else if (lifetime->parsed()) {
      cmd_lifetime(setup, lf, outputs, out);
    } else if (simulate->parsed()) {
      cmd_simulate(setup, sf, outputs, out);
    } else if (analyze->parsed()) {
      cmd_analyze(setup, g, af, outputs, out);
    } else if (sweep_cmd->parsed()) {
      cmd_sweep(setup, wf, outputs, out);
    } else if (signif->parsed()) {
      cmd_significance(gf, outputs, out);
    }
    outputs.write_manifest(args, setup);
    return kOk;
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << '\n';
    return kUsageError;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kUsageError;
  } catch (const io::DatasetError& e) {
    err << "input error: " << e.what() << '\n';
    return kInputError;
  } catch (const InputError& e) {
    err << "input error: " << e.what() << '\n';
    return kInputError;
  } catch (const ode::IntegrationError& e) {
    err << "integration error at t = " << e.last_valid_time() << " s: " << e.what() << '\n';
    return kNumericalError;
  } catch (const hmm::EstimationError& e) {
    err << "estimation error: " << e.what() << '\n';
    return kNumericalError;
  } catch (const std::domain_error& e) {
    err << "domain error: " << e.what() << '\n';
    return kNumericalError;
  } catch (const ConsistencyError& e) {
    err << "consistency check failed: " << e.what() << '\n';
    return kConsistencyError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kInternalError;
  }
}

}  // namespace dpql::cli
