#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "dpql/hmm_detector.hpp"
#include "dpql/rng.hpp"

using namespace dpql;
using namespace dpql::hmm;

namespace {

HmmParams example_params() { return params_from_rates(0.03, 0.72, 0.0047, 0.0104); }

double path_probability(const HmmParams& p, const std::vector<int>& obs, const std::vector<int>& path) {
  double w = p.initial[path[0]] * p.emit[path[0]][obs[0]];
  for (std::size_t t = 1; t < obs.size(); ++t) {
    w *= p.trans[path[t - 1]][path[t]] * p.emit[path[t]][obs[t]];
  }
  return w;
}

std::vector<int> path_from_bits(std::uint32_t bits, std::size_t n) {
  std::vector<int> path(n);
  for (std::size_t t = 0; t < n; ++t) path[t] = static_cast<int>(bits >> t & 1u);
  return path;
}

// Labelled records drawn from a known two-state chain.
sim::TrialDataset sample_chain(const HmmParams& p, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  sim::TrialDataset d;
  int state = rng.bernoulli(p.initial[kSignal]) ? kSignal : kNoise;
  for (std::size_t i = 0; i < n; ++i) {
    const int outcome = rng.bernoulli(p.emit[state][1]) ? 1 : 0;
    d.records.push_back({i, outcome, 0.04 * static_cast<double>(i), state == kSignal});
    state = rng.bernoulli(p.trans[state][kSignal]) ? kSignal : kNoise;
  }
  return d;
}

}  // namespace

TEST_CASE("rate-derived parameters are stationary at the ground occupancy") {
  const auto p = example_params();
  CHECK_NOTHROW(p.validate());
  const double pi1 = p.initial[kSignal];
  CHECK(pi1 == doctest::Approx(0.0047));
  CHECK((1 - pi1) * p.trans[kNoise][kSignal] + pi1 * p.trans[kSignal][kSignal] ==
        doctest::Approx(pi1).epsilon(1e-12));
  CHECK(p.emit[kNoise][1] == 0.03);
  CHECK(p.emit[kSignal][1] == 0.72);
}

TEST_CASE("default parameters follow the level dynamics") {
  const auto p = default_params({}, {});
  CHECK(p.initial[kSignal] == doctest::Approx(spectroscopy::thermal_population(
                                  spectroscopy::kGroundRotational, {}, 300.0)));
  CHECK(p.trans[kSignal][kNoise] > 0.01);
  CHECK(p.trans[kSignal][kNoise] < 0.02);
}

TEST_CASE("parameter validation and configuration round-trip") {
  auto p = example_params();
  KeyValueConfig kv;
  p.write_config(kv);
  const auto back = HmmParams::from_config(KeyValueConfig::parse(kv.to_text()));
  CHECK(back.trans == p.trans);
  CHECK(back.emit == p.emit);
  p.emit[0][1] = 0.5;
  CHECK_THROWS_AS(p.validate(), std::domain_error);
}

TEST_CASE("forward-backward matches brute-force marginals") {
  const auto p = params_from_rates(0.1, 0.7, 0.2, 0.3);
  const std::vector<int> obs{0, 1, 1, 0, 1, 1, 1, 0, 0, 1};
  const std::size_t n = obs.size();
  double z = 0.0;
  std::vector<double> marginal(n, 0.0);
  for (std::uint32_t bits = 0; bits < (1u << n); ++bits) {
    const auto path = path_from_bits(bits, n);
    const double w = path_probability(p, obs, path);
    z += w;
    for (std::size_t t = 0; t < n; ++t) marginal[t] += w * path[t];
  }
  const auto d = forward_backward(p, obs);
  CHECK(d.log_likelihood == doctest::Approx(std::log(z)).epsilon(1e-12));
  for (std::size_t t = 0; t < n; ++t) {
    CHECK(d.posteriors[t] == doctest::Approx(marginal[t] / z).epsilon(1e-10));
    CHECK(d.states[t] == (d.posteriors[t] > 0.5 ? kSignal : kNoise));
  }
}

TEST_CASE("Viterbi matches brute-force path search") {
  const auto p = params_from_rates(0.1, 0.7, 0.2, 0.3);
  const std::vector<int> obs{1, 1, 0, 0, 0, 1, 1, 1, 0, 1, 0};
  const std::size_t n = obs.size();
  double best = -1.0;
  std::vector<int> best_path;
  for (std::uint32_t bits = 0; bits < (1u << n); ++bits) {
    const auto path = path_from_bits(bits, n);
    const double w = path_probability(p, obs, path);
    if (w > best) {
      best = w;
      best_path = path;
    }
  }
  const auto path = viterbi(p, obs);
  CHECK(path == best_path);
  CHECK(path_log_likelihood(p, obs, path) == doctest::Approx(std::log(best)).epsilon(1e-12));
}

TEST_CASE("Viterbi path is locally optimal on a long sequence") {
  const auto p = example_params();
  const auto d = sample_chain(params_from_rates(0.03, 0.72, 0.05, 0.05), 3000, 4);
  const auto obs = d.outcomes();
  auto path = viterbi(p, obs);
  const double ll = path_log_likelihood(p, obs, path);
  for (std::size_t t = 0; t < path.size(); t += 7) {
    path[t] = 1 - path[t];
    CHECK(path_log_likelihood(p, obs, path) <= ll + 1e-9);
    path[t] = 1 - path[t];
  }
}

TEST_CASE("decoding of simple patterns") {
  const auto p = example_params();
  std::vector<int> obs(400, 0);
  CHECK(viterbi(p, obs) == std::vector<int>(400, kNoise));
  obs[200] = 1;
  CHECK(viterbi(p, obs) == std::vector<int>(400, kNoise));
  for (std::size_t i = 150; i < 165; ++i) obs[i] = 1;
  const auto path = viterbi(p, obs);
  for (std::size_t i = 152; i < 163; ++i) CHECK(path[i] == kSignal);
  CHECK(path[50] == kNoise);
  CHECK(viterbi(p, std::vector<int>{}).empty());
  CHECK(forward_backward(p, std::vector<int>{}).posteriors.empty());
}

TEST_CASE("posteriors for bright stretches and dark runs") {
  const auto p = example_params();
  std::vector<int> obs(5000, 0);
  auto d = forward_backward(p, obs);
  CHECK(*std::max_element(d.posteriors.begin(), d.posteriors.end()) < 0.05);
  for (std::size_t i = 2000; i < 2010; ++i) obs[i] = 1;
  d = forward_backward(p, obs);
  CHECK(d.posteriors[2005] > 0.99);
  CHECK(d.posteriors[100] < 0.01);
}

TEST_CASE("uninformative emissions leave the stationary prior") {
  auto p = example_params();
  p.emit[kNoise] = {0.5, 0.5};
  p.emit[kSignal] = {0.5, 0.5};
  const std::vector<int> obs{1, 1, 1, 0, 1, 0, 0, 1};
  const auto d = forward_backward(p, obs);
  for (double post : d.posteriors) CHECK(post == doctest::Approx(p.initial[kSignal]).epsilon(1e-9));
}

TEST_CASE("Bayes posterior") {
  CHECK(bayes_posterior(0.5, 0.5, 0.3) == doctest::Approx(0.3));
  CHECK(bayes_posterior(1.0, 0.0, 0.01) == 1.0);
  const double a = std::pow(0.72, 10), b = std::pow(0.03, 10), prior = 0.0047;
  CHECK(bayes_posterior(a, b, prior) == doctest::Approx(a * prior / (a * prior + b * (1 - prior))));
  CHECK(bayes_posterior(a, b, prior) > 0.998);
  CHECK_THROWS(bayes_posterior(0.0, 0.0, 0.5));
}

TEST_CASE("detection metrics and their degenerate cases") {
  const std::vector<int> truth{1, 1, 0, 0, 1, 0};
  const std::vector<int> pred{1, 0, 1, 0, 1, 0};
  const auto m = evaluate(pred, truth);
  CHECK(m.correct_positive == 2);
  CHECK(m.incorrect_positive == 1);
  CHECK(m.incorrect_negative == 1);
  CHECK(m.correct_negative == 2);
  CHECK(m.precision == doctest::Approx(2.0 / 3));
  CHECK(m.recall == doctest::Approx(2.0 / 3));
  CHECK(m.f1 == doctest::Approx(2.0 / 3));

  const std::vector<int> zeros(4, 0), ones(4, 1);
  const auto quiet = evaluate(zeros, zeros);
  CHECK(quiet.precision == 1.0);
  CHECK(quiet.recall == 1.0);
  CHECK(quiet.f1 == 1.0);
  const auto missed = evaluate(zeros, ones);
  CHECK(missed.precision == 0.0);
  CHECK(missed.recall == 0.0);
  CHECK(missed.f1 == 0.0);
  const auto false_alarm = evaluate(ones, zeros);
  CHECK(false_alarm.precision == 0.0);
  CHECK(false_alarm.recall == 0.0);
  CHECK_THROWS(evaluate(zeros, std::vector<int>{0}));
}

TEST_CASE("supervised estimation recovers the generating chain") {
  const auto truth = params_from_rates(0.03, 0.72, 0.05, 0.1);
  const std::vector<sim::TrialDataset> data{sample_chain(truth, 200000, 1), sample_chain(truth, 100000, 2)};
  const auto est = estimate_params_supervised(data);
  CHECK(est.emit[kNoise][1] == doctest::Approx(0.03).epsilon(0.05));
  CHECK(est.emit[kSignal][1] == doctest::Approx(0.72).epsilon(0.02));
  CHECK(est.trans[kSignal][kNoise] == doctest::Approx(0.1).epsilon(0.1));
  CHECK_NOTHROW(est.validate());
}

TEST_CASE("estimation fails when a hidden state never occurs") {
  sim::TrialDataset d;
  for (std::size_t i = 0; i < 50; ++i) d.records.push_back({i, 0, 0.04 * i, false});
  const std::vector<sim::TrialDataset> data{d};
  try {
    (void)estimate_params_supervised(data);
    FAIL("expected an EstimationError");
  } catch (const EstimationError& e) {
    CHECK(std::string(e.what()).find(state_name(kSignal)) != std::string::npos);
  }
  d.records[3].in_ground.reset();
  const std::vector<sim::TrialDataset> unlabelled{d};
  CHECK_THROWS(estimate_params_supervised(unlabelled));
}

TEST_CASE("Baum-Welch never decreases the likelihood") {
  const auto truth = params_from_rates(0.05, 0.7, 0.1, 0.1);
  const std::vector<std::vector<int>> seqs{sample_chain(truth, 4000, 3).outcomes()};
  const auto start = params_from_rates(0.2, 0.5, 0.3, 0.3);
  double last = forward_backward(start, seqs[0]).log_likelihood;
  for (std::size_t iters = 1; iters <= 12; ++iters) {
    const auto r = baum_welch(start, seqs, iters, 0.0);
    const double ll = forward_backward(r.params, seqs[0]).log_likelihood;
    CHECK(ll >= last - 1e-7);
    last = ll;
  }
  const auto fit = baum_welch(start, seqs);
  CHECK(fit.params.emit[kSignal][1] == doctest::Approx(0.7).epsilon(0.1));
}

TEST_CASE("decoded output format") {
  const auto p = example_params();
  const std::vector<int> obs{0, 1};
  std::ostringstream csv;
  write_decoded(csv, obs, forward_backward(p, obs));
  CHECK(csv.str().rfind("index,outcome,predicted_state,posterior\n0,0,", 0) == 0);
}

TEST_CASE("Bayes posterior at the headline scale") {
  CHECK(bayes_posterior(0.9, 1e-5, 0.0047) == doctest::Approx(0.9977).epsilon(1e-4));
}
