#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dpql/config.hpp"
#include "dpql/rng.hpp"
#include "dpql/spectroscopy.hpp"

namespace dpql::sim {

using spectroscopy::MolecularConstants;
using spectroscopy::RoVibState;

/// Where the hidden state starts before the thermalisation wait.
enum class StartMode { thermal, omega_half, ground };

struct ExperimentConfig {
  double cycle = 0.040;                       // s
  std::size_t experiments_per_trial = 30000;
  double p_bright_noise = 0.03;               // dark probability when J != 3/2
  double detection_fidelity = 0.72;           // dark probability when J = 3/2
  /// Optional decomposition of the detection fidelity into the two ramp
  /// fidelities and the shelving fidelity; checked only when all are set.
  std::optional<double> ramp_fidelity_1;
  std::optional<double> ramp_fidelity_2;
  std::optional<double> shelving_fidelity;
  double collision_rate = 0.008;              // s^-1
  double thermalization_wait = 300.0;         // s
  double temperature = 300.0;                 // K
  std::uint64_t seed = 1;
  StartMode start = StartMode::thermal;
  /// Molecule lifetime cap; records past it are not generated.
  std::optional<double> trial_cap;            // s

  void validate() const;
  /// Number of records a trial produces after applying `trial_cap`.
  std::size_t record_count() const;

  /// Reads `experiment.*` keys; absent keys keep their defaults.
  static ExperimentConfig from_config(const KeyValueConfig& config);
  void write_config(KeyValueConfig& config) const;
};

std::string to_string(StartMode mode);
StartMode start_mode_from_string(const std::string& text);

struct MeasurementRecord {
  std::size_t index = 0;
  int outcome = 0;     // 0 bright, 1 dark
  double time = 0.0;   // s from trial start
  /// True when the hidden state is (v=0, Omega=3/2, J=3/2); absent for real data.
  std::optional<bool> in_ground;

  bool operator==(const MeasurementRecord&) const = default;
};

struct TrialDataset {
  std::vector<MeasurementRecord> records;
  ExperimentConfig config;
  std::uint64_t seed = 0;

  std::vector<int> outcomes() const;
  /// Hidden labels as 0/1; throws std::invalid_argument if any record lacks one.
  std::vector<int> labels() const;
  bool labelled() const;
};

/// Precomputed sampling tables for one (molecule, experiment) pair.
///
/// Hidden states are indices into spectroscopy::level_set(). Collisions
/// resample the full Boltzmann distribution; otherwise an Omega = 3/2 level
/// makes at most one radiative jump per cycle, leaving with probability
/// 1 - exp(-rate * cycle) towards a destination chosen in proportion to the
/// individual rates. Omega = 1/2 levels change only through collisions.
class MonteCarloModel {
 public:
  MonteCarloModel(const MolecularConstants& molecule, const ExperimentConfig& experiment);

  const std::vector<RoVibState>& levels() const { return levels_; }
  const ExperimentConfig& experiment() const { return experiment_; }
  std::size_t ground_index() const { return ground_; }
  std::size_t index_of(const RoVibState& s) const;

  double collision_probability() const { return p_collision_; }
  /// Probability of a radiative jump out of `state` within one cycle.
  double jump_probability(std::size_t state) const;

  std::size_t sample_thermal(Rng& rng) const;
  std::size_t step(std::size_t state, Rng& rng) const;
  int emit(std::size_t state, Rng& rng) const;
  std::size_t initial_state(Rng& rng) const;

 private:
  std::vector<RoVibState> levels_;
  ExperimentConfig experiment_;
  std::size_t ground_ = 0;
  double p_collision_ = 0.0;
  std::vector<double> thermal_cdf_;
  std::vector<double> p_jump_;                     // per level, zero for Omega = 1/2
  std::vector<std::vector<std::size_t>> targets_;  // jump destinations per level
  std::vector<std::vector<double>> target_cdf_;
};

/// One cycle of hidden-state evolution (collision, else radiative jump).
RoVibState step_hidden_state(const MonteCarloModel& model, const RoVibState& current, Rng& rng);

/// Bright (0) or dark (1) outcome for a hidden state; does not change the state.
int emit_measurement(const MonteCarloModel& model, const RoVibState& hidden, Rng& rng);

/// Deterministic in `seed`: same model and seed give an identical dataset.
TrialDataset simulate_trial(const MonteCarloModel& model, std::uint64_t seed);

/// `count` trials with seeds derive_seed(base_seed, i), run concurrently.
std::vector<TrialDataset> simulate_trials(const MonteCarloModel& model, std::uint64_t base_seed,
                                          std::size_t count, unsigned workers = 0);

/// Fraction of records whose hidden label is the ground rotational level.
double ground_occupancy_fraction(const TrialDataset& dataset);

/// Sliding-window mean of the outcomes; empty if window > size.
std::vector<double> bin_series(std::span<const int> outcomes, std::size_t window = 20);

/// Dark-count histogram of disjoint windows, averaged over all window
/// offsets. Entry k is the mean number of bins holding k darks.
std::vector<double> disjoint_bin_histogram(std::span<const int> outcomes, std::size_t window = 20);

/// Overwrites records [start, start + length) with a ground-level visit:
/// labels set to in_ground and outcomes redrawn at `dark_probability`.
void inject_ground_visit(TrialDataset& dataset, std::size_t start, std::size_t length,
                         double dark_probability, Rng& rng);

/// Forces `length` consecutive darks starting at `start` (labels untouched).
void inject_dark_run(TrialDataset& dataset, std::size_t start, std::size_t length);

}  // namespace dpql::sim
