#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>

#include "dpql/spectroscopy.hpp"

using namespace dpql;
using namespace dpql::spectroscopy;

namespace {

// Independent restatement of the level structure used as an oracle: every
// level (v <= 1, both manifolds, 70 J values) with weight 2(2J+1).
struct OracleLevel {
  int v;
  double omega;
  double J;
  double energy;
};

std::vector<OracleLevel> oracle_levels() {
  std::vector<OracleLevel> out;
  for (int v = 0; v <= 1; ++v) {
    for (double omega : {0.5, 1.5}) {
      for (int i = 0; i < 70; ++i) {
        const double J = omega + i;
        const double e = 634.0 * v + (omega == 0.5 ? 130.0 : 0.0) + 0.37 * J * (J + 1.0);
        out.push_back({v, omega, J, e});
      }
    }
  }
  const double e0 = 0.37 * 1.5 * 2.5;
  for (auto& l : out) l.energy -= e0;
  return out;
}

double oracle_population(double T, const std::function<bool(const OracleLevel&)>& pred) {
  const double kT = 0.6950348 * T;
  double z = 0.0, sel = 0.0;
  for (const auto& l : oracle_levels()) {
    const double w = 2.0 * (2.0 * l.J + 1.0) * std::exp(-l.energy / kT);
    z += w;
    if (pred(l)) sel += w;
  }
  return sel / z;
}

}  // namespace

TEST_CASE("level set size and ordering") {
  MolecularConstants c;
  const auto levels = level_set(c);
  CHECK(levels.size() == 280);
  CHECK(levels.front() == RoVibState{0, 3, 3, std::nullopt});
  CHECK(manifold_levels(c, 3).size() == 140);
}

TEST_CASE("energies follow the term formula") {
  MolecularConstants c;
  CHECK(level_energy(kGroundRotational, c) == doctest::Approx(0.0));
  // Omega = 1/2, J = 1/2 lies A_so above the Omega = 3/2 manifold origin.
  const double e = level_energy({0, 1, 1, std::nullopt}, c);
  CHECK(e == doctest::Approx(130.0 + 0.37 * 0.75 - 0.37 * 3.75));
  CHECK(level_energy({1, 3, 3, std::nullopt}, c) == doctest::Approx(634.0));
}

TEST_CASE("inverted fine structure puts Omega = 1/2 lowest") {
  MolecularConstants c;
  c.invert_fine_structure = true;
  CHECK(level_energy({0, 1, 1, std::nullopt}, c) == doctest::Approx(0.0));
  CHECK(level_energy(kGroundRotational, c) > 100.0);
}

TEST_CASE("invalid states are rejected") {
  MolecularConstants c;
  CHECK_THROWS_AS(level_energy({0, 3, 1, std::nullopt}, c), std::domain_error);
  CHECK_THROWS_AS(level_energy({0, 3, 4, std::nullopt}, c), std::domain_error);
  CHECK_THROWS_AS(level_energy({2, 3, 3, std::nullopt}, c), std::domain_error);
  CHECK_THROWS_AS(level_energy({0, 3, 3 + 2 * 70, std::nullopt}, c), std::domain_error);
  CHECK_THROWS_AS(thermal_distribution(c, 0.0), std::domain_error);
}

TEST_CASE("Boltzmann populations match the independent oracle") {
  MolecularConstants c;
  for (double T : {77.0, 300.0, 450.0, 1000.0}) {
    const auto d = thermal_distribution(c, T);
    CHECK(d.total() == doctest::Approx(1.0).epsilon(1e-12));
    const double pv0 = d.marginal([](const RoVibState& s) { return s.v == 0; });
    CHECK(pv0 == doctest::Approx(oracle_population(T, [](const OracleLevel& l) {
                  return l.v == 0;
                })).epsilon(1e-6));
    const double pg = d.probability_of(kGroundRotational);
    CHECK(pg == doctest::Approx(oracle_population(T, [](const OracleLevel& l) {
                 return l.v == 0 && l.omega == 1.5 && l.J == 1.5;
               })).epsilon(1e-6));
    CHECK(thermal_population(kGroundRotational, c, T) == doctest::Approx(pg).epsilon(1e-12));
  }
}

TEST_CASE("thermal anchors at 300 K and 450 K") {
  MolecularConstants c;
  const auto d = thermal_distribution(c, 300.0);
  const double pv0 = d.marginal([](const RoVibState& s) { return s.v == 0; });
  const double p32 = d.marginal([](const RoVibState& s) { return s.v == 0 && s.two_omega == 3; });
  CHECK(std::abs(pv0 - 0.95) <= 0.01);
  CHECK(std::abs(p32 / pv0 - 0.65) <= 0.02);
  CHECK(std::abs(thermal_population(kGroundRotational, c, 300.0) - 0.0047) <= 0.0009);
  CHECK(std::abs(thermal_population(kGroundRotational, c, 450.0) - 0.0028) <= 0.0006);
}

TEST_CASE("most probable rotational level matches a brute-force scan") {
  MolecularConstants c;
  for (double T : {50.0, 300.0, 450.0}) {
    const double kT = 0.6950348 * T;
    double best = -1;
    double best_J = 0;
    for (int i = 0; i < 70; ++i) {
      const double J = 1.5 + i;
      const double w = (2 * J + 1) * std::exp(-0.37 * (J * (J + 1) - 3.75) / kT);
      if (w > best) {
        best = w;
        best_J = J;
      }
    }
    CHECK(most_probable_rotational_state(c, T).J() == best_J);
  }
}

TEST_CASE("low temperature concentrates in the lowest level") {
  MolecularConstants c;
  CHECK(thermal_population(kGroundRotational, c, 0.1) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(most_probable_rotational_state(c, 1e-3) == kGroundRotational);
}

TEST_CASE("parity-resolved queries split a summed level in half") {
  MolecularConstants c;
  const auto d = thermal_distribution(c, 300.0);
  RoVibState e = kGroundRotational;
  e.parity = Parity::e;
  CHECK(d.probability_of(e) == doctest::Approx(0.5 * d.probability_of(kGroundRotational)));
  CHECK(level_weight(kGroundRotational) == 8);
  CHECK(level_weight(e) == 4);
}

TEST_CASE("subset normalisation survives very low temperatures") {
  MolecularConstants c;
  const auto upper = manifold_levels(c, 1);
  const auto d = boltzmann_distribution(upper, c, 0.05);
  CHECK(d.total() == doctest::Approx(1.0));
  CHECK(d.populations.front() == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("molecule configuration round-trips") {
  MolecularConstants c;
  c.B_e = 0.41;
  c.invert_fine_structure = true;
  KeyValueConfig kv;
  c.write_config(kv);
  const auto back = MolecularConstants::from_config(KeyValueConfig::parse(kv.to_text()));
  CHECK(back.B_e == c.B_e);
  CHECK(back.invert_fine_structure);
  CHECK(back.omega_mol == doctest::Approx(c.omega_mol));
  CHECK_THROWS_AS(MolecularConstants::from_config(KeyValueConfig::parse("molecule.B_e_cm = -1")),
                  ConfigError);
}
