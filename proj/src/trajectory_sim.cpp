#include "dpql/trajectory_sim.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <stdexcept>
#include <thread>

#include "dpql/bbr_kinetics.hpp"

namespace dpql::sim {
namespace {

void require_probability(double p, const char* name) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw ConfigError(std::string(name) + " must lie in [0, 1], got " + format_double(p));
  }
}

std::vector<double> cumulative(std::span<const double> weights) {
  std::vector<double> cdf(weights.size());
  double acc = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    acc += weights[i];
    cdf[i] = acc;
  }
  return cdf;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (!(cycle > 0)) throw ConfigError("cycle must be positive");
  if (experiments_per_trial == 0) throw ConfigError("experiments_per_trial must be >= 1");
  require_probability(p_bright_noise, "p_bright_noise");
  require_probability(detection_fidelity, "detection_fidelity");
  if (ramp_fidelity_1) require_probability(*ramp_fidelity_1, "ramp_fidelity_1");
  if (ramp_fidelity_2) require_probability(*ramp_fidelity_2, "ramp_fidelity_2");
  if (shelving_fidelity) require_probability(*shelving_fidelity, "shelving_fidelity");
  if (ramp_fidelity_1 && ramp_fidelity_2 && shelving_fidelity) {
    const double product = *ramp_fidelity_1 * *ramp_fidelity_2 * *shelving_fidelity;
    if (std::abs(product - detection_fidelity) > 1e-6) {
      throw ConfigError("ramp and shelving fidelities multiply to " + format_double(product) +
                        ", not the detection fidelity " + format_double(detection_fidelity));
    }
  }
  if (!(collision_rate >= 0)) throw ConfigError("collision_rate must be non-negative");
  if (!(thermalization_wait >= 0)) throw ConfigError("thermalization_wait must be non-negative");
  if (!(temperature > 0)) throw ConfigError("temperature must be positive");
  if (trial_cap && !(*trial_cap > 0)) throw ConfigError("trial_cap must be positive");
}

std::size_t ExperimentConfig::record_count() const {
  if (!trial_cap) return experiments_per_trial;
  const auto capped = static_cast<std::size_t>(std::floor(*trial_cap / cycle + 1e-9));
  return std::min(experiments_per_trial, capped);
}

std::string to_string(StartMode mode) {
  switch (mode) {
    case StartMode::thermal: return "thermal";
    case StartMode::omega_half: return "omega_half";
    case StartMode::ground: return "ground";
  }
  return "thermal";
}

StartMode start_mode_from_string(const std::string& text) {
  if (text == "thermal") return StartMode::thermal;
  if (text == "omega_half") return StartMode::omega_half;
  if (text == "ground") return StartMode::ground;
  throw ConfigError("unknown start mode '" + text + "'");
}

ExperimentConfig ExperimentConfig::from_config(const KeyValueConfig& config) {
  ExperimentConfig e;
  e.cycle = config.get_double("experiment.cycle_s", e.cycle);
  if (auto n = config.get_int("experiment.experiments_per_trial")) {
    if (*n < 1) throw ConfigError("experiment.experiments_per_trial must be >= 1");
    e.experiments_per_trial = static_cast<std::size_t>(*n);
  }
  e.p_bright_noise = config.get_double("experiment.p_bright_noise", e.p_bright_noise);
  e.detection_fidelity = config.get_double("experiment.detection_fidelity", e.detection_fidelity);
  e.ramp_fidelity_1 = config.get_double("experiment.ramp_fidelity_1");
  e.ramp_fidelity_2 = config.get_double("experiment.ramp_fidelity_2");
  e.shelving_fidelity = config.get_double("experiment.shelving_fidelity");
  e.collision_rate = config.get_double("experiment.collision_rate_per_s", e.collision_rate);
  e.thermalization_wait = config.get_double("experiment.thermalization_wait_s", e.thermalization_wait);
  e.temperature = config.get_double("experiment.temperature_K", e.temperature);
  if (auto s = config.get_uint("experiment.seed")) e.seed = static_cast<std::uint64_t>(*s);
  if (auto m = config.get_string("experiment.start")) e.start = start_mode_from_string(*m);
  e.trial_cap = config.get_double("experiment.trial_cap_s");
  e.validate();
  return e;
}

void ExperimentConfig::write_config(KeyValueConfig& config) const {
  config.set("experiment.cycle_s", format_double(cycle));
  config.set("experiment.experiments_per_trial", std::to_string(experiments_per_trial));
  config.set("experiment.p_bright_noise", format_double(p_bright_noise));
  config.set("experiment.detection_fidelity", format_double(detection_fidelity));
  if (ramp_fidelity_1) config.set("experiment.ramp_fidelity_1", format_double(*ramp_fidelity_1));
  if (ramp_fidelity_2) config.set("experiment.ramp_fidelity_2", format_double(*ramp_fidelity_2));
  if (shelving_fidelity) {
    config.set("experiment.shelving_fidelity", format_double(*shelving_fidelity));
  }
  config.set("experiment.collision_rate_per_s", format_double(collision_rate));
  config.set("experiment.thermalization_wait_s", format_double(thermalization_wait));
  config.set("experiment.temperature_K", format_double(temperature));
  config.set("experiment.seed", std::to_string(seed));
  config.set("experiment.start", to_string(start));
  if (trial_cap) config.set("experiment.trial_cap_s", format_double(*trial_cap));
}

std::vector<int> TrialDataset::outcomes() const {
  std::vector<int> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.outcome);
  return out;
}

std::vector<int> TrialDataset::labels() const {
  std::vector<int> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    if (!r.in_ground) {
      throw std::invalid_argument("record " + std::to_string(r.index) + " has no hidden label");
    }
    out.push_back(*r.in_ground ? 1 : 0);
  }
  return out;
}

bool TrialDataset::labelled() const {
  return std::all_of(records.begin(), records.end(),
                     [](const MeasurementRecord& r) { return r.in_ground.has_value(); });
}

MonteCarloModel::MonteCarloModel(const MolecularConstants& molecule,
                                 const ExperimentConfig& experiment)
    : levels_(spectroscopy::level_set(molecule)), experiment_(experiment) {
  molecule.validate();
  experiment.validate();
  ground_ = index_of(spectroscopy::kGroundRotational);
  p_collision_ = -std::expm1(-experiment.collision_rate * experiment.cycle);
  thermal_cdf_ = cumulative(
      spectroscopy::boltzmann_distribution(levels_, molecule, experiment.temperature).populations);

  const bbr::RateMatrix rates = bbr::build_rate_matrix(molecule, experiment.temperature);
  std::vector<std::size_t> to_full(rates.levels.size());
  for (std::size_t i = 0; i < rates.levels.size(); ++i) to_full[i] = index_of(rates.levels[i]);

  p_jump_.assign(levels_.size(), 0.0);
  targets_.assign(levels_.size(), {});
  target_cdf_.assign(levels_.size(), {});
  for (std::size_t j = 0; j < rates.levels.size(); ++j) {
    const std::size_t from = to_full[j];
    std::vector<double> w;
    for (std::size_t i = 0; i < rates.levels.size(); ++i) {
      const double r = i == j ? 0.0 : rates.generator(static_cast<Eigen::Index>(i),
                                                      static_cast<Eigen::Index>(j));
      if (r > 0) {
        targets_[from].push_back(to_full[i]);
        w.push_back(r);
      }
    }
    p_jump_[from] = -std::expm1(-rates.out_rate(j) * experiment.cycle);
    target_cdf_[from] = cumulative(w);
  }
}

std::size_t MonteCarloModel::index_of(const RoVibState& s) const {
  RoVibState key = s;
  key.parity.reset();
  const auto it = std::find(levels_.begin(), levels_.end(), key);
  if (it == levels_.end()) {
    throw std::domain_error("level outside the simulated set: " + spectroscopy::to_string(s));
  }
  return static_cast<std::size_t>(it - levels_.begin());
}

double MonteCarloModel::jump_probability(std::size_t state) const { return p_jump_.at(state); }

std::size_t MonteCarloModel::sample_thermal(Rng& rng) const { return rng.categorical(thermal_cdf_); }

std::size_t MonteCarloModel::step(std::size_t state, Rng& rng) const {
  if (rng.bernoulli(p_collision_)) return sample_thermal(rng);
  if (p_jump_[state] > 0 && rng.bernoulli(p_jump_[state])) {
    return targets_[state][rng.categorical(target_cdf_[state])];
  }
  return state;
}

int MonteCarloModel::emit(std::size_t state, Rng& rng) const {
  const double p = state == ground_ ? experiment_.detection_fidelity : experiment_.p_bright_noise;
  return rng.bernoulli(p) ? 1 : 0;
}

std::size_t MonteCarloModel::initial_state(Rng& rng) const {
  switch (experiment_.start) {
    case StartMode::thermal: return sample_thermal(rng);
    case StartMode::omega_half: return index_of({0, 1, 1, std::nullopt});
    case StartMode::ground: return ground_;
  }
  return sample_thermal(rng);
}

RoVibState step_hidden_state(const MonteCarloModel& model, const RoVibState& current, Rng& rng) {
  return model.levels()[model.step(model.index_of(current), rng)];
}

int emit_measurement(const MonteCarloModel& model, const RoVibState& hidden, Rng& rng) {
  return model.emit(model.index_of(hidden), rng);
}

TrialDataset simulate_trial(const MonteCarloModel& model, std::uint64_t seed) {
  const ExperimentConfig& cfg = model.experiment();
  Rng rng(seed);
  std::size_t state = model.initial_state(rng);
  const auto wait_cycles =
      static_cast<std::size_t>(std::llround(cfg.thermalization_wait / cfg.cycle));
  for (std::size_t i = 0; i < wait_cycles; ++i) state = model.step(state, rng);

  TrialDataset out;
  out.config = cfg;
  out.seed = seed;
  const std::size_t n = cfg.record_count();
  out.records.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    state = model.step(state, rng);
    auto& r = out.records[i];
    r.index = i;
    r.outcome = model.emit(state, rng);
    r.time = static_cast<double>(i) * cfg.cycle;
    r.in_ground = state == model.ground_index();
  }
  return out;
}

std::vector<TrialDataset> simulate_trials(const MonteCarloModel& model, std::uint64_t base_seed,
                                          std::size_t count, unsigned workers) {
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  std::vector<TrialDataset> out(count);
  std::vector<std::future<void>> jobs;
  for (unsigned w = 0; w < workers; ++w) {
    jobs.push_back(std::async(std::launch::async, [&, w] {
      for (std::size_t i = w; i < count; i += workers) {
        out[i] = simulate_trial(model, derive_seed(base_seed, i));
      }
    }));
  }
  for (auto& j : jobs) j.get();
  return out;
}

double ground_occupancy_fraction(const TrialDataset& dataset) {
  if (dataset.records.empty()) return 0.0;
  const auto labels = dataset.labels();
  std::size_t hits = 0;
  for (int l : labels) hits += static_cast<std::size_t>(l);
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

std::vector<double> bin_series(std::span<const int> outcomes, std::size_t window) {
  if (window == 0) throw std::invalid_argument("window must be >= 1");
  if (window > outcomes.size()) return {};
  std::vector<double> out(outcomes.size() - window + 1);
  long long sum = 0;
  for (std::size_t i = 0; i < window; ++i) sum += outcomes[i];
  out[0] = static_cast<double>(sum) / static_cast<double>(window);
  for (std::size_t i = window; i < outcomes.size(); ++i) {
    sum += outcomes[i] - outcomes[i - window];
    out[i - window + 1] = static_cast<double>(sum) / static_cast<double>(window);
  }
  return out;
}

std::vector<double> disjoint_bin_histogram(std::span<const int> outcomes, std::size_t window) {
  if (window == 0) throw std::invalid_argument("window must be >= 1");
  std::vector<double> hist(window + 1, 0.0);
  if (window > outcomes.size()) return hist;
  for (std::size_t offset = 0; offset < window; ++offset) {
    for (std::size_t start = offset; start + window <= outcomes.size(); start += window) {
      int k = 0;
      for (std::size_t i = start; i < start + window; ++i) k += outcomes[i];
      hist[static_cast<std::size_t>(k)] += 1.0;
    }
  }
  for (double& h : hist) h /= static_cast<double>(window);
  return hist;
}

void inject_ground_visit(TrialDataset& dataset, std::size_t start, std::size_t length,
                         double dark_probability, Rng& rng) {
  if (start + length > dataset.records.size()) {
    throw std::out_of_range("injected visit runs past the end of the dataset");
  }
  for (std::size_t i = start; i < start + length; ++i) {
    dataset.records[i].in_ground = true;
    dataset.records[i].outcome = rng.bernoulli(dark_probability) ? 1 : 0;
  }
}

void inject_dark_run(TrialDataset& dataset, std::size_t start, std::size_t length) {
  if (start + length > dataset.records.size()) {
    throw std::out_of_range("injected run goes past the end of the dataset");
  }
  for (std::size_t i = start; i < start + length; ++i) dataset.records[i].outcome = 1;
}

}  // namespace dpql::sim
