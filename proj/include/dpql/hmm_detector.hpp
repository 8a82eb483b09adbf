#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dpql/config.hpp"
#include "dpql/spectroscopy.hpp"
#include "dpql/trajectory_sim.hpp"

namespace dpql::hmm {

/// Hidden state indices.
inline constexpr int kNoise = 0;   // J != 3/2
inline constexpr int kSignal = 1;  // J = 3/2

std::string state_name(int state);

/// Two-state model. Rows of `trans` and `emit` are conditioned on the hidden
/// state; emission columns are {bright, dark}.
struct HmmParams {
  std::array<std::array<double, 2>, 2> trans{};
  std::array<std::array<double, 2>, 2> emit{};
  std::array<double, 2> initial{};

  /// Throws std::domain_error unless every row is a probability vector.
  void validate() const;

  static HmmParams from_config(const KeyValueConfig& config);
  void write_config(KeyValueConfig& config) const;
};

/// Model with dark probabilities (p_b, p_d), a per-cycle exit probability
/// `p_leave` from J = 3/2 and an entry probability fixed so that the chain is
/// stationary at ground occupancy p_g.
HmmParams params_from_rates(double p_b, double p_d, double p_g, double p_leave);

/// Defaults derived from the level dynamics: thermal p_g and an exit
/// probability combining radiative departure and collisions within a cycle.
HmmParams default_params(const spectroscopy::MolecularConstants& molecule,
                         const sim::ExperimentConfig& experiment);

class EstimationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Maximum-likelihood counts with add-one smoothing over labelled datasets.
/// Throws EstimationError naming any hidden state that never occurs.
HmmParams estimate_params_supervised(std::span<const sim::TrialDataset> datasets);

struct DecodedSeries {
  std::vector<int> states;         // posterior argmax per record
  std::vector<double> posteriors;  // P(J = 3/2 | all observations)
  double log_likelihood = 0.0;
};

/// Scaled forward-backward smoothing.
DecodedSeries forward_backward(const HmmParams& params, std::span<const int> observations);

/// Most probable hidden path; ties resolve to J != 3/2.
std::vector<int> viterbi(const HmmParams& params, std::span<const int> observations);

/// log P(observations, path).
double path_log_likelihood(const HmmParams& params, std::span<const int> observations,
                           std::span<const int> path);

struct BaumWelchResult {
  HmmParams params;
  double log_likelihood = 0.0;
  std::size_t iterations = 0;
  bool converged = false;
};

/// Unsupervised re-estimation starting from `initial`.
BaumWelchResult baum_welch(const HmmParams& initial,
                           const std::vector<std::vector<int>>& sequences,
                           std::size_t max_iterations = 200, double tolerance = 1e-8);

/// P(signal | x) = P(x|signal) P(signal) / P(x) for two hypotheses.
double bayes_posterior(double p_x_given_signal, double p_x_given_noise, double prior_signal);

struct DetectionMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t correct_positive = 0;    // predicted J = 3/2, truly J = 3/2
  std::size_t incorrect_positive = 0;  // predicted J = 3/2, truly J != 3/2
  std::size_t incorrect_negative = 0;  // predicted J != 3/2, truly J = 3/2
  std::size_t correct_negative = 0;
};

/// Per-record metrics with f1 = 2 P R / (P + R). A ratio whose denominator is
/// zero counts as 1 only when there was nothing to find and nothing flagged.
DetectionMetrics evaluate(std::span<const int> predictions, std::span<const int> truth);

/// CSV with header `index,outcome,predicted_state,posterior`.
void write_decoded(std::ostream& out, std::span<const int> observations,
                   const DecodedSeries& decoded);

}  // namespace dpql::hmm
