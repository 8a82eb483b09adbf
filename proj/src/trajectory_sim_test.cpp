#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>

#include "dpql/trajectory_sim.hpp"

using namespace dpql;
using namespace dpql::sim;
using spectroscopy::kGroundRotational;

namespace {

ExperimentConfig short_config(std::size_t records = 2000) {
  ExperimentConfig e;
  e.experiments_per_trial = records;
  e.thermalization_wait = 0.0;
  return e;
}

double dark_fraction(const MonteCarloModel& m, std::size_t state, int draws, Rng& rng) {
  int dark = 0;
  for (int i = 0; i < draws; ++i) dark += m.emit(state, rng);
  return static_cast<double>(dark) / draws;
}

}  // namespace

TEST_CASE("emission probabilities per hidden state") {
  MolecularConstants c;
  const MonteCarloModel m(c, short_config());
  Rng rng(11);
  CHECK(std::abs(dark_fraction(m, m.ground_index(), 200000, rng) - 0.72) < 0.005);
  const std::size_t other = m.index_of({0, 3, 5, std::nullopt});
  CHECK(std::abs(dark_fraction(m, other, 200000, rng) - 0.03) < 0.002);
  CHECK(emit_measurement(m, kGroundRotational, rng) >= 0);
}

TEST_CASE("zero bright noise gives all-bright outcomes outside the ground level") {
  MolecularConstants c;
  auto e = short_config();
  e.p_bright_noise = 0.0;
  const MonteCarloModel m(c, e);
  Rng rng(3);
  for (std::size_t s = 0; s < m.levels().size(); ++s) {
    if (s == m.ground_index()) continue;
    for (int i = 0; i < 50; ++i) CHECK(m.emit(s, rng) == 0);
  }
}

TEST_CASE("without collisions Omega = 1/2 is never left") {
  MolecularConstants c;
  auto e = short_config(5000);
  e.collision_rate = 0.0;
  e.start = StartMode::omega_half;
  const MonteCarloModel m(c, e);
  Rng rng(5);
  std::size_t s = m.initial_state(rng);
  REQUIRE(m.levels()[s].two_omega == 1);
  for (int i = 0; i < 20000; ++i) {
    const std::size_t next = m.step(s, rng);
    CHECK(next == s);
    s = next;
  }
  const auto d = simulate_trial(m, 9);
  for (int label : d.labels()) CHECK(label == 0);
}

TEST_CASE("the ground start begins in the ground level and radiative jumps leave it") {
  MolecularConstants c;
  auto e = short_config();
  e.start = StartMode::ground;
  const MonteCarloModel m(c, e);
  Rng rng(1);
  CHECK(m.initial_state(rng) == m.ground_index());
  CHECK(m.jump_probability(m.ground_index()) > 0.0);
  CHECK(m.jump_probability(m.index_of({0, 1, 1, std::nullopt})) == 0.0);
  CHECK(m.collision_probability() == doctest::Approx(-std::expm1(-0.008 * 0.04)));
}

TEST_CASE("trials are deterministic in the seed") {
  MolecularConstants c;
  const MonteCarloModel m(c, short_config(3000));
  const auto a = simulate_trial(m, 77);
  const auto b = simulate_trial(m, 77);
  const auto other = simulate_trial(m, 78);
  CHECK(a.records == b.records);
  CHECK(a.records != other.records);
  CHECK(a.records.size() == 3000);
  CHECK(a.records[10].time == doctest::Approx(0.4));
  const auto batch = simulate_trials(m, 5, 3, 2);
  REQUIRE(batch.size() == 3);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    CHECK(batch[i].seed == derive_seed(5, i));
    CHECK(batch[i].records == simulate_trial(m, derive_seed(5, i)).records);
  }
}

TEST_CASE("thermal sampling reproduces the Boltzmann marginals") {
  MolecularConstants c;
  const MonteCarloModel m(c, short_config());
  Rng rng(21);
  const int n = 400000;
  int ground = 0, v0 = 0;
  for (int i = 0; i < n; ++i) {
    const auto s = m.sample_thermal(rng);
    ground += s == m.ground_index();
    v0 += m.levels()[s].v == 0;
  }
  const double pg = spectroscopy::thermal_population(kGroundRotational, c, 300.0);
  CHECK(std::abs(static_cast<double>(ground) / n - pg) < 4.0 * std::sqrt(pg / n));
  CHECK(std::abs(static_cast<double>(v0) / n - 0.9544) < 0.002);
}

TEST_CASE("sliding bins") {
  std::vector<int> outcomes(40, 0);
  for (int i = 0; i < 11; ++i) outcomes[i] = 1;
  const auto bins = bin_series(outcomes);
  REQUIRE(bins.size() == 21);
  CHECK(bins[0] == doctest::Approx(0.55));
  CHECK(bins[20] == 0.0);
  CHECK(bin_series(outcomes, 41).empty());
  CHECK_THROWS(bin_series(outcomes, 0));
}

TEST_CASE("disjoint-bin histogram counts every bin once per offset") {
  std::vector<int> outcomes(200);
  Rng rng(4);
  for (auto& o : outcomes) o = rng.bernoulli(0.3);
  const auto hist = disjoint_bin_histogram(outcomes);
  CHECK(std::accumulate(hist.begin(), hist.end(), 0.0) == doctest::Approx((10.0 + 19 * 9.0) / 20.0));
  CHECK(hist.size() == 21);
}

TEST_CASE("trial cap truncates the record count") {
  auto e = short_config(30000);
  e.trial_cap = 10.0;
  CHECK(e.record_count() == 250);
  MolecularConstants c;
  const MonteCarloModel m(c, e);
  CHECK(simulate_trial(m, 1).records.size() == 250);
}

TEST_CASE("fidelity decomposition must multiply to the detection fidelity") {
  ExperimentConfig e;
  e.ramp_fidelity_1 = 0.9;
  e.ramp_fidelity_2 = 0.85;
  e.shelving_fidelity = 0.95;
  CHECK_THROWS_AS(e.validate(), ConfigError);
  e.detection_fidelity = 0.9 * 0.85 * 0.95;
  CHECK_NOTHROW(e.validate());
  e.cycle = 0.0;
  CHECK_THROWS_AS(e.validate(), ConfigError);
}

TEST_CASE("experiment configuration round-trips") {
  ExperimentConfig e;
  e.seed = 18446744073709551615ULL;
  e.start = StartMode::omega_half;
  e.trial_cap = 7200.0;
  KeyValueConfig kv;
  e.write_config(kv);
  const auto back = ExperimentConfig::from_config(KeyValueConfig::parse(kv.to_text()));
  CHECK(back.seed == e.seed);
  CHECK(back.start == StartMode::omega_half);
  CHECK(back.trial_cap == e.trial_cap);
  CHECK_THROWS(start_mode_from_string("hot"));
}

TEST_CASE("signal injection") {
  MolecularConstants c;
  auto e = short_config(500);
  e.p_bright_noise = 0.0;
  const MonteCarloModel m(c, e);
  auto d = simulate_trial(m, 2);
  Rng rng(8);
  inject_ground_visit(d, 100, 50, 1.0, rng);
  inject_dark_run(d, 300, 10);
  const auto labels = d.labels();
  const auto outcomes = d.outcomes();
  for (std::size_t i = 100; i < 150; ++i) {
    CHECK(labels[i] == 1);
    CHECK(outcomes[i] == 1);
  }
  for (std::size_t i = 300; i < 310; ++i) CHECK(outcomes[i] == 1);
  CHECK_THROWS(inject_dark_run(d, 495, 10));
}
