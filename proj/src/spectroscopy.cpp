#include "dpql/spectroscopy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace dpql::spectroscopy {
namespace {

void require_temperature(double T) {
  if (!(T > 0) || !std::isfinite(T)) {
    throw std::domain_error("temperature must be positive, got " + format_double(T));
  }
}

// Unshifted term value; the shift to the lowest level is applied by level_energy.
double raw_energy(const RoVibState& s, const MolecularConstants& c) {
  const bool upper_manifold = c.invert_fine_structure ? s.two_omega == 3 : s.two_omega == 1;
  const double J = s.J();
  return c.omega_e * s.v + (upper_manifold ? c.A_so : 0.0) + c.B_e * J * (J + 1.0);
}

double lowest_raw_energy(const MolecularConstants& c) {
  return std::min(raw_energy({0, 3, 3, std::nullopt}, c), raw_energy({0, 1, 1, std::nullopt}, c));
}

}  // namespace

void MolecularConstants::validate() const {
  if (!(omega_e > 0)) throw ConfigError("omega_e must be positive");
  if (!(A_so > 0)) throw ConfigError("A_so must be positive");
  if (!(B_e > 0)) throw ConfigError("B_e must be positive");
  if (!(omega_mol > 0)) throw ConfigError("omega_mol must be positive");
  if (!(g_q_ground >= 0)) throw ConfigError("g_q_ground must be non-negative");
  if (v_max < 0) throw ConfigError("v_max must be >= 0");
  if (J_count < 1) throw ConfigError("J_count must be >= 1");
  if (!(mu_vib_scale >= 0) || !(mu_rot_scale >= 0)) {
    throw ConfigError("dipole scales must be non-negative");
  }
}

MolecularConstants MolecularConstants::from_config(const KeyValueConfig& config) {
  MolecularConstants c;
  c.omega_e = config.get_double("molecule.omega_e_cm", c.omega_e);
  c.A_so = config.get_double("molecule.A_so_cm", c.A_so);
  c.B_e = config.get_double("molecule.B_e_cm", c.B_e);
  if (auto f = config.get_double("molecule.omega_mol_hz")) c.omega_mol = constants::two_pi * *f;
  if (auto f = config.get_double("molecule.g_q_ground_hz")) c.g_q_ground = constants::two_pi * *f;
  if (auto v = config.get_int("molecule.v_max")) c.v_max = static_cast<int>(*v);
  if (auto n = config.get_int("molecule.J_count")) c.J_count = static_cast<int>(*n);
  c.mu_vib_scale = config.get_double("molecule.mu_vib_scale", c.mu_vib_scale);
  c.mu_rot_scale = config.get_double("molecule.mu_rot_scale", c.mu_rot_scale);
  if (auto b = config.get_bool("molecule.invert_fine_structure")) c.invert_fine_structure = *b;
  c.validate();
  return c;
}

void MolecularConstants::write_config(KeyValueConfig& config) const {
  config.set("molecule.omega_e_cm", format_double(omega_e));
  config.set("molecule.A_so_cm", format_double(A_so));
  config.set("molecule.B_e_cm", format_double(B_e));
  config.set("molecule.omega_mol_hz", format_double(omega_mol / constants::two_pi));
  config.set("molecule.g_q_ground_hz", format_double(g_q_ground / constants::two_pi));
  config.set("molecule.v_max", std::to_string(v_max));
  config.set("molecule.J_count", std::to_string(J_count));
  config.set("molecule.mu_vib_scale", format_double(mu_vib_scale));
  config.set("molecule.mu_rot_scale", format_double(mu_rot_scale));
  config.set("molecule.invert_fine_structure", invert_fine_structure ? "true" : "false");
}

std::string to_string(const RoVibState& s) {
  std::string out = "v=" + std::to_string(s.v) + ",Omega=" + std::to_string(s.two_omega) +
                    "/2,J=" + std::to_string(s.two_J) + "/2";
  if (s.parity) out += *s.parity == Parity::e ? ",e" : ",f";
  return out;
}

double StateDistribution::probability_of(const RoVibState& s) const {
  double p = 0.0;
  for (std::size_t i = 0; i < levels.size(); ++i) {
    const auto& l = levels[i];
    if (l.v != s.v || l.two_omega != s.two_omega || l.two_J != s.two_J) continue;
    // A parity-resolved query against a parity-summed table gets half the level.
    if (!l.parity && s.parity) {
      p += 0.5 * populations[i];
    } else if (!s.parity || l.parity == s.parity) {
      p += populations[i];
    }
  }
  return p;
}

double StateDistribution::marginal(const std::function<bool(const RoVibState&)>& pred) const {
  double sum = 0.0;
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (pred(levels[i])) sum += populations[i];
  }
  return sum;
}

double StateDistribution::total() const {
  double sum = 0.0;
  for (double p : populations) sum += p;
  return sum;
}

void check_state(const RoVibState& s, const MolecularConstants& c) {
  if (s.two_omega != 1 && s.two_omega != 3) {
    throw std::domain_error("two_omega must be 1 or 3: " + to_string(s));
  }
  if (s.two_J % 2 == 0 || s.two_J < s.two_omega) {
    throw std::domain_error("two_J must be odd and >= two_omega: " + to_string(s));
  }
  if (s.v < 0 || s.v > c.v_max) {
    throw std::domain_error("v outside [0, v_max]: " + to_string(s));
  }
  if ((s.two_J - s.two_omega) / 2 >= c.J_count) {
    throw std::domain_error("J beyond the rotational truncation: " + to_string(s));
  }
}

double level_energy(const RoVibState& s, const MolecularConstants& c) {
  check_state(s, c);
  return raw_energy(s, c) - lowest_raw_energy(c);
}

int degeneracy(const RoVibState& s) { return s.two_J + 1; }

int level_weight(const RoVibState& s) { return s.parity ? degeneracy(s) : 2 * degeneracy(s); }

std::vector<RoVibState> manifold_levels(const MolecularConstants& c, int two_omega) {
  std::vector<RoVibState> out;
  out.reserve(static_cast<std::size_t>((c.v_max + 1) * c.J_count));
  for (int v = 0; v <= c.v_max; ++v) {
    for (int i = 0; i < c.J_count; ++i) {
      out.push_back({v, two_omega, two_omega + 2 * i, std::nullopt});
    }
  }
  return out;
}

std::vector<RoVibState> level_set(const MolecularConstants& c) {
  std::vector<RoVibState> out;
  out.reserve(static_cast<std::size_t>(2 * (c.v_max + 1) * c.J_count));
  for (int v = 0; v <= c.v_max; ++v) {
    for (int two_omega : {3, 1}) {
      for (int i = 0; i < c.J_count; ++i) {
        out.push_back({v, two_omega, two_omega + 2 * i, std::nullopt});
      }
    }
  }
  return out;
}

StateDistribution boltzmann_distribution(const std::vector<RoVibState>& levels,
                                         const MolecularConstants& c, double T) {
  require_temperature(T);
  const double kT = constants::boltzmann_wavenumber * T;
  StateDistribution d;
  d.levels = levels;
  d.temperature = T;
  d.populations.resize(levels.size());
  // Shift by the subset's own minimum so a subset far above the global ground
  // level still normalises at low temperature.
  double e_min = std::numeric_limits<double>::infinity();
  for (const auto& s : levels) e_min = std::min(e_min, level_energy(s, c));
  double z = 0.0;
  for (std::size_t i = 0; i < levels.size(); ++i) {
    const double w =
        level_weight(levels[i]) * std::exp(-(level_energy(levels[i], c) - e_min) / kT);
    d.populations[i] = w;
    z += w;
  }
  for (double& p : d.populations) p /= z;
  return d;
}

double partition_function(const MolecularConstants& c, double T) {
  require_temperature(T);
  const double kT = constants::boltzmann_wavenumber * T;
  double z = 0.0;
  for (const auto& s : level_set(c)) {
    z += level_weight(s) * std::exp(-level_energy(s, c) / kT);
  }
  return z;
}

double thermal_population(const RoVibState& s, const MolecularConstants& c, double T) {
  check_state(s, c);
  const double kT = constants::boltzmann_wavenumber * T;
  const double z = partition_function(c, T);
  const int g = s.parity ? degeneracy(s) : level_weight(s);
  return g * std::exp(-level_energy(s, c) / kT) / z;
}

StateDistribution thermal_distribution(const MolecularConstants& c, double T) {
  return boltzmann_distribution(level_set(c), c, T);
}

RoVibState most_probable_rotational_state(const MolecularConstants& c, double T) {
  require_temperature(T);
  const double kT = constants::boltzmann_wavenumber * T;
  RoVibState best = kGroundRotational;
  double best_log_weight = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < c.J_count; ++i) {
    const RoVibState s{0, 3, 3 + 2 * i, std::nullopt};
    // Compare in log space so that T -> 0 does not underflow every weight.
    const double lw = std::log(level_weight(s)) - level_energy(s, c) / kT;
    if (lw > best_log_weight) {
      best_log_weight = lw;
      best = s;
    }
  }
  return best;
}

}  // namespace dpql::spectroscopy
