#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "dpql/sweep_dynamics.hpp"

using namespace dpql;
using namespace dpql::sweep;
using constants::two_pi;

TEST_CASE("coupling matrix is Hermitian and traceless with the avoided-crossing gap") {
  SweepConfig cfg;
  for (double wq : {two_pi * 440e3, two_pi * 450e3, two_pi * 470e3}) {
    const auto h = jc_coupling_matrix(wq, cfg);
    CHECK(std::abs(h[0][1] - std::conj(h[1][0])) < 1e-12);
    CHECK(std::abs(h[0][0] + h[1][1]) < 1e-12);
    const double gap = 2.0 * std::sqrt(std::norm(h[0][0]) + std::norm(h[0][1]));
    const double delta = cfg.omega_mol - wq;
    CHECK(gap == doctest::Approx(std::sqrt(delta * delta + cfg.g_q * cfg.g_q)));
  }
}

TEST_CASE("default sweep transfers almost all population and matches Landau-Zener") {
  SweepConfig cfg;
  const auto amps = evolve_amplitudes(cfg);
  CHECK(amps.norm() == doctest::Approx(1.0).epsilon(1e-6));
  const double p = std::norm(amps.amp_e_np1);
  CHECK(p == doctest::Approx(evolve_sweep(cfg)));
  CHECK(p > 0.99);
  CHECK(std::abs(p - landau_zener_oracle(cfg.g_q, cfg.ramp_rate)) < 0.01);
}

TEST_CASE("weak coupling follows Landau-Zener") {
  SweepConfig cfg;
  for (double g : {200.0, 400.0, 800.0}) {
    cfg.g_q = two_pi * g;
    CHECK(std::abs(evolve_sweep(cfg) - landau_zener_oracle(cfg.g_q, cfg.ramp_rate)) < 0.01);
  }
}

TEST_CASE("Landau-Zener limits") {
  CHECK(landau_zener_oracle(0.0, 1.0) == 0.0);
  CHECK(landau_zener_oracle(two_pi * 2.6e3, two_pi * 1e4) == doctest::Approx(1.0));
  const double g = two_pi * 1e3;
  const double r = two_pi * 1e7;
  CHECK(landau_zener_oracle(g, r) == doctest::Approx(-std::expm1(-2.0 * M_PI * g * g / 4.0 / r)));
}

TEST_CASE("resonance outside the sweep range is not transferred") {
  SweepConfig cfg;
  cfg.omega_mol = two_pi * 600e3;
  CHECK(evolve_sweep(cfg) < 0.01);
  cfg.omega_mol = two_pi * 300e3;
  CHECK(evolve_sweep(cfg) < 0.01);
}

TEST_CASE("rotating and fixed frames agree") {
  SweepConfig cfg;
  cfg.g_q = two_pi * 1e3;
  const double rotating = evolve_sweep(cfg);
  cfg.frame = Frame::fixed;
  CHECK(evolve_sweep(cfg) == doctest::Approx(rotating).epsilon(1e-6));
}

TEST_CASE("reversing the sweep direction preserves the transfer") {
  SweepConfig down;
  down.g_q = two_pi * 800.0;
  SweepConfig up = down;
  std::swap(up.omega_start, up.omega_end);
  CHECK(evolve_sweep(up) == doctest::Approx(evolve_sweep(down)).epsilon(1e-3));
}

TEST_CASE("transfer grows with the coupling") {
  SweepConfig cfg;
  double last = 0.0;
  for (double g : {100.0, 300.0, 900.0, 1800.0, 2600.0}) {
    cfg.g_q = two_pi * g;
    const double p = evolve_sweep(cfg);
    CHECK(p > last);
    last = p;
  }
}

TEST_CASE("high-fidelity window around the default resonance") {
  SweepConfig cfg;
  const auto grid = frequency_grid(two_pi * 400e3, two_pi * 500e3, two_pi * 2e3);
  CHECK(grid.front() == doctest::Approx(two_pi * 400e3));
  CHECK(grid.back() == doctest::Approx(two_pi * 500e3));
  CHECK(grid.size() == 51);
  const std::vector<double> g{cfg.g_q};
  const auto map = transfer_window_map(cfg, grid, g, 2);
  const auto w = high_fidelity_window(map, 0, 0.99);
  REQUIRE(w.has_value());
  CHECK(w->first < two_pi * 450e3);
  CHECK(w->second > two_pi * 450e3);
  CHECK(w->first > cfg.omega_end);
  CHECK(w->second < cfg.omega_start);
  CHECK_FALSE(high_fidelity_window(map, 0, 1.5).has_value());

  std::ostringstream csv;
  write_transfer_map(csv, map);
  CHECK(csv.str().rfind("omega_mol_Hz,g_q_Hz,transfer\n", 0) == 0);
}

TEST_CASE("off-resonant carrier excitation") {
  const double rabi = two_pi * 1e3;
  const double det = two_pi * 10e3;
  CHECK(offres_carrier_excitation(rabi, det, 1.0, 0.0) ==
        doctest::Approx(rabi * rabi / (rabi * rabi + det * det)).epsilon(1e-6));
  CHECK_THROWS(offres_carrier_excitation(rabi, 0.0, 1.0, 0.0));
  CHECK(offres_carrier_excitation(rabi, det, 1e-9, 0.0) < 1e-9);
  CHECK(offres_carrier_excitation(rabi, det, 1.0, two_pi * 2e3) >
        offres_carrier_excitation(rabi, det, 1.0, 0.0));
}

TEST_CASE("sweep configuration validation and round-trip") {
  SweepConfig cfg;
  cfg.ramp_rate = -1.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = SweepConfig{};
  cfg.omega_end = cfg.omega_start;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = SweepConfig{};
  cfg.frame = Frame::fixed;
  KeyValueConfig kv;
  cfg.write_config(kv);
  const auto back = SweepConfig::from_config(KeyValueConfig::parse(kv.to_text()));
  CHECK(back.frame == Frame::fixed);
  CHECK(back.omega_mol == doctest::Approx(cfg.omega_mol));
  CHECK(back.duration() == doctest::Approx(8.2e-3));
}
