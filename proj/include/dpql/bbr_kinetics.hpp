#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "dpql/ode.hpp"
#include "dpql/spectroscopy.hpp"

namespace dpql::bbr {

using spectroscopy::MolecularConstants;
using spectroscopy::RoVibState;
using spectroscopy::StateDistribution;

/// Blackbody spectral energy density per unit frequency, J s m^-3.
double planck_energy_density(double nu, double T);

/// Mean photon occupation 1 / (exp(h nu / k T) - 1); zero at T = 0.
double photon_occupation(double nu, double T);

/// One allowed electric-dipole line between two levels of the radiative set.
struct RadiativeLine {
  std::size_t upper = 0;
  std::size_t lower = 0;
  double frequency = 0.0;  // Hz
  double A = 0.0;          // s^-1
  double B = 0.0;          // emission coefficient; rho * B is in s^-1
};

/// Einstein coefficients over the Omega = 3/2 rovibrational levels.
///
/// Line strengths are rigid-rotor Honl-London factors for an Omega-conserving
/// transition, scaled by a harmonic sqrt(v') for vibrational lines. The
/// transition dipole is mu_rot_scale (rotational) or mu_vib_scale
/// (vibrational) times one debye.
struct EinsteinCoefficients {
  std::vector<RoVibState> levels;
  std::vector<RadiativeLine> lines;
  Eigen::MatrixXd A;  // A(upper, lower), s^-1
  Eigen::MatrixXd B;  // B(upper, lower), emission direction

  std::size_t index_of(const RoVibState& s) const;
};

/// Honl-London factor for emission from J_upper to J_lower with projection
/// Omega. Sums to 2 J_upper + 1 over the three branches.
double honl_london(double J_upper, double J_lower, double omega);

EinsteinCoefficients build_einstein_coefficients(const MolecularConstants& c);

/// Total spontaneous v -> v-1 rate out of (v = 1, Omega = 3/2, J).
double vibrational_decay_rate(const MolecularConstants& c, int two_J = 3);

/// Dipole scales reproducing `vib_decay_rate` for (v = 1, J = 3/2) with the
/// rotational dipole `rot_to_vib` times larger. Returns {mu_vib, mu_rot}.
std::pair<double, double> calibrate_dipole_scales(const MolecularConstants& c,
                                                  double vib_decay_rate = 5.0,
                                                  double rot_to_vib = 10.0);

/// Population master equation dN/dt = G N over the radiative level set.
/// Column j of the generator holds the rates out of level j.
struct RateMatrix {
  std::vector<RoVibState> levels;
  Eigen::MatrixXd generator;
  double temperature = 0.0;

  std::size_t index_of(const RoVibState& s) const;
  /// Total rate out of level i.
  double out_rate(std::size_t i) const { return -generator(i, i); }
  /// Largest |column sum| relative to the largest diagonal entry.
  double conservation_error() const;
  /// |G p| / |diag(G) p| for the Boltzmann vector p at `temperature`.
  double detailed_balance_residual(const MolecularConstants& c) const;
  Eigen::SparseMatrix<double> sparse() const;
};

/// Builds the generator for temperature T >= 0 (T = 0 keeps spontaneous terms only).
RateMatrix build_rate_matrix(const MolecularConstants& c, double T);

/// Boltzmann populations restricted to the rate matrix levels.
StateDistribution stationary_distribution(const RateMatrix& m, const MolecularConstants& c);

struct PopulationTrajectory {
  std::vector<double> times;
  std::vector<StateDistribution> distributions;

  /// Population of one level across all snapshots.
  std::vector<double> series(const RoVibState& s) const;
};

struct EvolveOptions {
  double tol = 1e-8;  // absolute tolerance per level and normalisation budget
  std::size_t snapshots = 101;  // evenly spaced, including both endpoints
  std::vector<double> output_times;  // overrides `snapshots` when non-empty
};

/// Integrates the master equation from `init` (which must sum to one) for
/// `duration` seconds. Throws ode::IntegrationError on step-size underflow or
/// when normalisation drifts by more than `tol`.
PopulationTrajectory evolve_populations(const RateMatrix& m, const StateDistribution& init,
                                        double duration, const EvolveOptions& options = {});

/// Unit population in one level of the rate matrix set.
StateDistribution point_distribution(const RateMatrix& m, const RoVibState& s, double T = 0.0);

/// Mean uninterrupted stay in (v=0, Omega=3/2, J=3/2): the 1/e time of the
/// survival population, obtained by evolving the master equation with inflow
/// into the level switched off and fitting an exponential to the first two
/// decades of decay.
double ground_state_residence_lifetime(const MolecularConstants& c, double T);

/// 1/e time of the ground-level excess population (N - N_eq) / (1 - N_eq)
/// when returns through the v = 1 manifold are allowed.
double ground_state_relaxation_time(const MolecularConstants& c, double T);

/// Time for the ground-level population, starting from unit population in
/// `initial`, to first reach `fraction` of its thermal value. Empty if it does
/// not within `horizon` seconds.
std::optional<double> ground_state_refill_time(const MolecularConstants& c, double T,
                                               const RoVibState& initial,
                                               double fraction = 1.0 - 0.36787944117144233,
                                               double horizon = 5000.0);

/// p_s: 1 - exp(-cycle / lifetime), or `override_value` when supplied.
double leave_probability_per_cycle(const MolecularConstants& c, double T, double cycle,
                                   std::optional<double> override_value = std::nullopt);

struct LifetimeRow {
  double temperature = 0.0;
  double lifetime = 0.0;
  double thermal_population = 0.0;
};

/// Residence lifetime and thermal ground population for each temperature,
/// evaluated concurrently.
std::vector<LifetimeRow> lifetime_sweep(const MolecularConstants& c,
                                        std::span<const double> temperatures);

/// CSV with a `time_s` column followed by one population column per tracked level.
void write_trajectory(std::ostream& out, const PopulationTrajectory& trajectory,
                      std::span<const RoVibState> tracked);

/// CSV with header `T_K,lifetime_s,thermal_population`.
void write_lifetime_sweep(std::ostream& out, std::span<const LifetimeRow> rows);

}  // namespace dpql::bbr
