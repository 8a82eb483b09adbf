#pragma once

#include <compare>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dpql/config.hpp"
#include "dpql/physical_constants.hpp"

namespace dpql::spectroscopy {

/// Spectroscopic constants of the molecular ion.
///
/// Wavenumbers are in cm^-1; omega_mol and g_q_ground are angular frequencies
/// (rad/s). The two dipole scales multiply a 1 debye reference transition
/// dipole; their defaults are the values produced by
/// bbr::calibrate_dipole_scales() for the default level structure.
struct MolecularConstants {
  double omega_e = 634.0;
  double A_so = 130.0;
  double B_e = 0.37;
  double omega_mol = constants::two_pi * 450e3;
  double g_q_ground = constants::two_pi * 2.6e3;
  int v_max = 1;
  int J_count = 70;
  double mu_vib_scale = 0.2505587032853;
  double mu_rot_scale = 2.505587032853;
  /// Places the Omega = 1/2 manifold below Omega = 3/2 when set.
  bool invert_fine_structure = false;

  void validate() const;

  /// Reads the `molecule.*` keys; absent keys keep their defaults.
  static MolecularConstants from_config(const KeyValueConfig& config);
  void write_config(KeyValueConfig& config) const;
};

enum class Parity { e, f };

/// One rovibrational level. Half-integer quantum numbers are stored doubled.
/// A level without a parity label stands for both Omega-doublet components.
struct RoVibState {
  int v = 0;
  int two_omega = 3;
  int two_J = 3;
  std::optional<Parity> parity;

  double J() const { return two_J / 2.0; }
  double omega() const { return two_omega / 2.0; }

  auto operator<=>(const RoVibState&) const = default;
  bool operator==(const RoVibState&) const = default;
};

/// (v = 0, Omega = 3/2, J = 3/2), the level carrying the Omega doublet used
/// for the dipole-phonon interaction.
inline constexpr RoVibState kGroundRotational{0, 3, 3, std::nullopt};

std::string to_string(const RoVibState& s);

struct StateDistribution {
  std::vector<RoVibState> levels;
  std::vector<double> populations;
  double temperature = 0.0;  // K, annotation only

  double probability_of(const RoVibState& s) const;
  /// Sum of populations over levels accepted by `pred`.
  double marginal(const std::function<bool(const RoVibState&)>& pred) const;
  double total() const;
};

/// Throws std::domain_error unless `s` lies inside the truncated level set of `c`.
void check_state(const RoVibState& s, const MolecularConstants& c);

/// Term energy relative to the lowest level of the truncated set, cm^-1.
double level_energy(const RoVibState& s, const MolecularConstants& c);

/// 2J + 1 for a single parity component.
int degeneracy(const RoVibState& s);

/// Statistical weight used in Boltzmann sums: 2J + 1, times two for an
/// unlabelled level (both doublet components).
int level_weight(const RoVibState& s);

/// All parity-summed levels: v <= v_max, both Omega manifolds, J_count
/// rotational levels each. Ordered by (v, Omega = 3/2 first, J).
std::vector<RoVibState> level_set(const MolecularConstants& c);

/// Levels of one fine-structure manifold only (used by the radiative model).
std::vector<RoVibState> manifold_levels(const MolecularConstants& c, int two_omega);

double partition_function(const MolecularConstants& c, double T);
double thermal_population(const RoVibState& s, const MolecularConstants& c, double T);

/// Boltzmann populations of `levels` normalised over `levels` only.
StateDistribution boltzmann_distribution(const std::vector<RoVibState>& levels,
                                         const MolecularConstants& c, double T);

/// Boltzmann populations over the full truncated level set.
StateDistribution thermal_distribution(const MolecularConstants& c, double T);

/// Most populated J within (v = 0, Omega = 3/2).
RoVibState most_probable_rotational_state(const MolecularConstants& c, double T);

}  // namespace dpql::spectroscopy
