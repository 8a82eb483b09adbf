#include "dpql/hmm_detector.hpp"

#include <cmath>
#include <limits>
#include <ostream>

#include "dpql/bbr_kinetics.hpp"

namespace dpql::hmm {
namespace {

constexpr double kRowTolerance = 1e-12;

void check_row(std::span<const double> row, const std::string& what) {
  double sum = 0.0;
  for (double v : row) {
    if (!(v >= 0.0 && v <= 1.0)) throw std::domain_error(what + " has an entry outside [0, 1]");
    sum += v;
  }
  if (std::abs(sum - 1.0) > kRowTolerance) throw std::domain_error(what + " does not sum to 1");
}

void check_observations(std::span<const int> obs) {
  for (int o : obs) {
    if (o != 0 && o != 1) throw std::domain_error("observations must be 0 (bright) or 1 (dark)");
  }
}

std::string key(const char* table, int i, int j) {
  return std::string("hmm.") + table + "." + std::to_string(i) + "." + std::to_string(j);
}

double safe_log(double v) {
  return v > 0 ? std::log(v) : -std::numeric_limits<double>::infinity();
}

struct Trellis {
  std::vector<std::array<double, 2>> alpha;  // scaled forward
  std::vector<std::array<double, 2>> beta;   // scaled backward
  std::vector<double> scale;
  double log_likelihood = 0.0;
};

Trellis run_trellis(const HmmParams& p, std::span<const int> obs) {
  const std::size_t n = obs.size();
  Trellis t;
  t.alpha.resize(n);
  t.beta.resize(n);
  t.scale.resize(n);
  if (n == 0) return t;
  for (int s = 0; s < 2; ++s) t.alpha[0][s] = p.initial[s] * p.emit[s][obs[0]];
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0) {
      for (int s = 0; s < 2; ++s) {
        t.alpha[i][s] = (t.alpha[i - 1][0] * p.trans[0][s] + t.alpha[i - 1][1] * p.trans[1][s]) *
                        p.emit[s][obs[i]];
      }
    }
    const double c = t.alpha[i][0] + t.alpha[i][1];
    if (!(c > 0)) throw std::domain_error("observation sequence has zero probability");
    t.scale[i] = c;
    t.alpha[i][0] /= c;
    t.alpha[i][1] /= c;
    t.log_likelihood += std::log(c);
  }
  t.beta[n - 1] = {1.0, 1.0};
  for (std::size_t i = n - 1; i-- > 0;) {
    for (int s = 0; s < 2; ++s) {
      double acc = 0.0;
      for (int r = 0; r < 2; ++r) acc += p.trans[s][r] * p.emit[r][obs[i + 1]] * t.beta[i + 1][r];
      t.beta[i][s] = acc / t.scale[i + 1];
    }
  }
  return t;
}

}  // namespace

std::string state_name(int state) { return state == kSignal ? "J=3/2" : "J!=3/2"; }

void HmmParams::validate() const {
  for (int s = 0; s < 2; ++s) {
    check_row(trans[s], "transition row for " + state_name(s));
    check_row(emit[s], "emission row for " + state_name(s));
  }
  check_row(initial, "initial distribution");
}

HmmParams HmmParams::from_config(const KeyValueConfig& config) {
  HmmParams p;
  const auto need = [&config](const std::string& k) {
    const auto v = config.get_double(k);
    if (!v) throw ConfigError("missing key '" + k + "'");
    return *v;
  };
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      p.trans[i][j] = need(key("trans", i, j));
      p.emit[i][j] = need(key("emit", i, j));
    }
    p.initial[i] = need("hmm.initial." + std::to_string(i));
  }
  p.validate();
  return p;
}

void HmmParams::write_config(KeyValueConfig& config) const {
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      config.set(key("trans", i, j), format_double(trans[i][j]));
      config.set(key("emit", i, j), format_double(emit[i][j]));
    }
    config.set("hmm.initial." + std::to_string(i), format_double(initial[i]));
  }
}

HmmParams params_from_rates(double p_b, double p_d, double p_g, double p_leave) {
  if (!(p_g > 0 && p_g < 1)) throw std::domain_error("p_g must lie in (0, 1)");
  const double p_enter = p_g * p_leave / (1.0 - p_g);
  HmmParams p;
  p.trans = {{{1.0 - p_enter, p_enter}, {p_leave, 1.0 - p_leave}}};
  p.emit = {{{1.0 - p_b, p_b}, {1.0 - p_d, p_d}}};
  p.initial = {1.0 - p_g, p_g};
  p.validate();
  return p;
}

HmmParams default_params(const spectroscopy::MolecularConstants& molecule,
                         const sim::ExperimentConfig& experiment) {
  const double T = experiment.temperature;
  const double p_g = spectroscopy::thermal_population(spectroscopy::kGroundRotational, molecule, T);
  const double p_s = bbr::leave_probability_per_cycle(molecule, T, experiment.cycle);
  const double p_collision = -std::expm1(-experiment.collision_rate * experiment.cycle);
  const double p_leave = p_collision * (1.0 - p_g) + (1.0 - p_collision) * p_s;
  return params_from_rates(experiment.p_bright_noise, experiment.detection_fidelity, p_g, p_leave);
}

HmmParams estimate_params_supervised(std::span<const sim::TrialDataset> datasets) {
  std::array<std::array<double, 2>, 2> trans_count{};
  std::array<std::array<double, 2>, 2> emit_count{};
  std::array<double, 2> initial_count{};
  std::array<std::size_t, 2> seen{};
  for (const auto& d : datasets) {
    const auto labels = d.labels();
    if (labels.empty()) continue;
    initial_count[static_cast<std::size_t>(labels[0])] += 1.0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      const int s = labels[i];
      ++seen[static_cast<std::size_t>(s)];
      emit_count[s][d.records[i].outcome] += 1.0;
      if (i + 1 < labels.size()) trans_count[s][labels[i + 1]] += 1.0;
    }
  }
  for (int s = 0; s < 2; ++s) {
    if (seen[static_cast<std::size_t>(s)] == 0) {
      throw EstimationError("hidden state " + state_name(s) + " never occurs in the training data");
    }
  }
  HmmParams p;
  for (int s = 0; s < 2; ++s) {
    const double tn = trans_count[s][0] + trans_count[s][1] + 2.0;
    const double en = emit_count[s][0] + emit_count[s][1] + 2.0;
    for (int r = 0; r < 2; ++r) {
      p.trans[s][r] = (trans_count[s][r] + 1.0) / tn;
      p.emit[s][r] = (emit_count[s][r] + 1.0) / en;
    }
  }
  const double in = initial_count[0] + initial_count[1] + 2.0;
  p.initial = {(initial_count[0] + 1.0) / in, (initial_count[1] + 1.0) / in};
  p.validate();
  return p;
}

DecodedSeries forward_backward(const HmmParams& params, std::span<const int> observations) {
  params.validate();
  check_observations(observations);
  const Trellis t = run_trellis(params, observations);
  DecodedSeries out;
  out.log_likelihood = t.log_likelihood;
  out.posteriors.resize(observations.size());
  out.states.resize(observations.size());
  for (std::size_t i = 0; i < observations.size(); ++i) {
    const double a = t.alpha[i][0] * t.beta[i][0];
    const double b = t.alpha[i][1] * t.beta[i][1];
    out.posteriors[i] = b / (a + b);
    out.states[i] = out.posteriors[i] > 0.5 ? kSignal : kNoise;
  }
  return out;
}

std::vector<int> viterbi(const HmmParams& params, std::span<const int> observations) {
  params.validate();
  check_observations(observations);
  const std::size_t n = observations.size();
  if (n == 0) return {};
  std::array<std::array<double, 2>, 2> lt{};
  std::array<std::array<double, 2>, 2> le{};
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      lt[i][j] = safe_log(params.trans[i][j]);
      le[i][j] = safe_log(params.emit[i][j]);
    }
  }
  std::vector<std::array<int, 2>> back(n);
  std::array<double, 2> score{safe_log(params.initial[0]) + le[0][observations[0]],
                              safe_log(params.initial[1]) + le[1][observations[0]]};
  for (std::size_t i = 1; i < n; ++i) {
    std::array<double, 2> next{};
    for (int s = 0; s < 2; ++s) {
      const double from_noise = score[0] + lt[0][s];
      const double from_signal = score[1] + lt[1][s];
      // Strict comparison keeps ties on the J != 3/2 predecessor.
      back[i][s] = from_signal > from_noise ? kSignal : kNoise;
      next[s] = std::max(from_noise, from_signal) + le[s][observations[i]];
    }
    score = next;
  }
  std::vector<int> path(n);
  path[n - 1] = score[1] > score[0] ? kSignal : kNoise;
  for (std::size_t i = n - 1; i > 0; --i) path[i - 1] = back[i][path[i]];
  return path;
}

double path_log_likelihood(const HmmParams& params, std::span<const int> observations,
                           std::span<const int> path) {
  if (observations.size() != path.size()) {
    throw std::domain_error("path and observations differ in length");
  }
  if (path.empty()) return 0.0;
  double ll = safe_log(params.initial[path[0]]) + safe_log(params.emit[path[0]][observations[0]]);
  for (std::size_t i = 1; i < path.size(); ++i) {
    ll += safe_log(params.trans[path[i - 1]][path[i]]) +
          safe_log(params.emit[path[i]][observations[i]]);
  }
  return ll;
}

BaumWelchResult baum_welch(const HmmParams& initial,
                           const std::vector<std::vector<int>>& sequences,
                           std::size_t max_iterations, double tolerance) {
  initial.validate();
  BaumWelchResult result;
  result.params = initial;
  double previous = -std::numeric_limits<double>::infinity();
  for (std::size_t it = 0; it < max_iterations; ++it) {
    std::array<std::array<double, 2>, 2> xi_sum{};
    std::array<std::array<double, 2>, 2> emit_sum{};
    std::array<double, 2> start_sum{};
    double ll = 0.0;
    const HmmParams& p = result.params;
    for (const auto& seq : sequences) {
      if (seq.empty()) continue;
      check_observations(seq);
      const Trellis t = run_trellis(p, seq);
      ll += t.log_likelihood;
      for (std::size_t i = 0; i < seq.size(); ++i) {
        const double g0 = t.alpha[i][0] * t.beta[i][0];
        const double g1 = t.alpha[i][1] * t.beta[i][1];
        const double norm = g0 + g1;
        const std::array<double, 2> gamma{g0 / norm, g1 / norm};
        if (i == 0) {
          start_sum[0] += gamma[0];
          start_sum[1] += gamma[1];
        }
        emit_sum[0][seq[i]] += gamma[0];
        emit_sum[1][seq[i]] += gamma[1];
        if (i + 1 < seq.size()) {
          for (int a = 0; a < 2; ++a) {
            for (int b = 0; b < 2; ++b) {
              xi_sum[a][b] += t.alpha[i][a] * p.trans[a][b] * p.emit[b][seq[i + 1]] *
                              t.beta[i + 1][b] / t.scale[i + 1];
            }
          }
        }
      }
    }
    HmmParams next = p;
    for (int a = 0; a < 2; ++a) {
      const double tn = xi_sum[a][0] + xi_sum[a][1];
      const double en = emit_sum[a][0] + emit_sum[a][1];
      for (int b = 0; b < 2; ++b) {
        if (tn > 0) next.trans[a][b] = xi_sum[a][b] / tn;
        if (en > 0) next.emit[a][b] = emit_sum[a][b] / en;
      }
    }
    const double sn = start_sum[0] + start_sum[1];
    if (sn > 0) next.initial = {start_sum[0] / sn, start_sum[1] / sn};
    // Renormalise away rounding so validate() holds exactly.
    for (int a = 0; a < 2; ++a) {
      next.trans[a][1] = 1.0 - next.trans[a][0];
      next.emit[a][1] = 1.0 - next.emit[a][0];
    }
    next.initial[1] = 1.0 - next.initial[0];

    result.log_likelihood = ll;
    result.iterations = it + 1;
    result.params = next;
    if (std::abs(ll - previous) < tolerance * std::max(1.0, std::abs(ll))) {
      result.converged = true;
      break;
    }
    previous = ll;
  }
  return result;
}

double bayes_posterior(double p_x_given_signal, double p_x_given_noise, double prior_signal) {
  if (!(p_x_given_signal >= 0) || !(p_x_given_noise >= 0)) {
    throw std::domain_error("likelihoods must be non-negative");
  }
  if (!(prior_signal >= 0 && prior_signal <= 1)) throw std::domain_error("prior must lie in [0, 1]");
  const double evidence = p_x_given_signal * prior_signal + p_x_given_noise * (1.0 - prior_signal);
  if (!(evidence > 0)) throw std::domain_error("posterior undefined: evidence is zero");
  return p_x_given_signal * prior_signal / evidence;
}

DetectionMetrics evaluate(std::span<const int> predictions, std::span<const int> truth) {
  if (predictions.size() != truth.size()) {
    throw std::domain_error("predictions and truth differ in length");
  }
  DetectionMetrics m;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const bool p = predictions[i] == kSignal;
    const bool t = truth[i] == kSignal;
    if (p && t) ++m.correct_positive;
    if (p && !t) ++m.incorrect_positive;
    if (!p && t) ++m.incorrect_negative;
    if (!p && !t) ++m.correct_negative;
  }
  const double cp = static_cast<double>(m.correct_positive);
  const std::size_t flagged = m.correct_positive + m.incorrect_positive;
  const std::size_t actual = m.correct_positive + m.incorrect_negative;
  m.precision = flagged ? cp / static_cast<double>(flagged) : (actual ? 0.0 : 1.0);
  m.recall = actual ? cp / static_cast<double>(actual) : (flagged ? 0.0 : 1.0);
  m.f1 = m.precision + m.recall > 0
             ? 2.0 * m.precision * m.recall / (m.precision + m.recall)
             : 0.0;
  return m;
}

void write_decoded(std::ostream& out, std::span<const int> observations,
                   const DecodedSeries& decoded) {
  if (observations.size() != decoded.states.size()) {
    throw std::domain_error("decoded series does not match the observations");
  }
  out << "index,outcome,predicted_state,posterior\n";
  for (std::size_t i = 0; i < observations.size(); ++i) {
    out << i << ',' << observations[i] << ',' << decoded.states[i] << ','
        << format_double(decoded.posteriors[i]) << '\n';
  }
}

}  // namespace dpql::hmm
