#pragma once

#include <array>
#include <complex>
#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "dpql/config.hpp"
#include "dpql/physical_constants.hpp"

namespace dpql::sweep {

/// Frame in which the two-level Schrodinger equation is integrated.
/// `rotating` removes the instantaneous diagonal phase; `fixed` integrates the
/// bare Hamiltonian and serves as a cross-check.
enum class Frame { rotating, fixed };

/// Linear sweep of the phonon-mode frequency through the molecular Omega-doublet
/// resonance. All frequencies are angular (rad/s); ramp_rate is rad/s^2.
struct SweepConfig {
  double omega_start = constants::two_pi * 492e3;
  double omega_end = constants::two_pi * 410e3;
  double ramp_rate = constants::two_pi * 10e3 / 1e-3;
  double omega_mol = constants::two_pi * 450e3;
  double g_q = constants::two_pi * 2.6e3;
  double time_step = 2e-6;  // largest integrator step, s
  double tolerance = 1e-10;
  Frame frame = Frame::rotating;

  void validate() const;
  double duration() const;
  /// Mode frequency at time t into the sweep.
  double omega_q(double t) const;

  /// Reads `sweep.*` keys (frequencies in Hz, ramp in Hz/s).
  static SweepConfig from_config(const KeyValueConfig& config);
  void write_config(KeyValueConfig& config) const;
};

using Matrix2c = std::array<std::array<std::complex<double>, 2>, 2>;

/// Coupling Hamiltonian in the {|f,0>, |e,1>} basis (hbar = 1): detuning
/// +-(omega_mol - omega_q)/2 on the diagonal and g_q/2 off it.
Matrix2c jc_coupling_matrix(double omega_q, const SweepConfig& cfg);

struct TwoLevelAmplitudes {
  std::complex<double> amp_f_n{1.0, 0.0};
  std::complex<double> amp_e_np1{0.0, 0.0};

  double norm() const { return std::norm(amp_f_n) + std::norm(amp_e_np1); }
};

/// Evolves |f,0> through the sweep and returns the final amplitudes (in the
/// bare basis up to a diagonal phase). Throws ode::IntegrationError if the
/// norm drifts by more than 1e-6.
TwoLevelAmplitudes evolve_amplitudes(const SweepConfig& cfg);

/// Final |e,1> population after the sweep.
double evolve_sweep(const SweepConfig& cfg);

/// Landau-Zener transfer 1 - exp(-2 pi (g_q/2)^2 / ramp_rate) for a complete
/// passage; the coupling is the off-diagonal element g_q/2.
double landau_zener_oracle(double g_q, double ramp_rate);

struct TransferMap {
  std::vector<double> omega_mol;  // rad/s
  std::vector<double> g_q;        // rad/s
  /// transfer[i][j] for g_q[i], omega_mol[j].
  std::vector<std::vector<double>> transfer;
};

/// evolve_sweep over every (g_q, omega_mol) pair, evaluated concurrently.
TransferMap transfer_window_map(const SweepConfig& cfg, std::span<const double> omega_mol_values,
                                std::span<const double> g_q_values, unsigned workers = 0);

/// Smallest interval containing every omega_mol with transfer > threshold in
/// one row of a map; empty if no point qualifies.
std::optional<std::pair<double, double>> high_fidelity_window(const TransferMap& map,
                                                              std::size_t g_row,
                                                              double threshold = 0.99);

/// Evenly spaced grid from `lo` to `hi` inclusive with spacing close to `step`.
std::vector<double> frequency_grid(double lo, double hi, double step);

/// Worst-case off-resonant carrier excitation: the Rabi formula
/// rabi^2 / W^2 sin^2(W t / 2), W^2 = rabi^2 + (detuning + d)^2, maximised
/// over t <= pulse and carrier offsets |d| <= carrier_noise.
double offres_carrier_excitation(double rabi, double detuning, double pulse,
                                 double carrier_noise);

/// CSV with header `omega_mol_Hz,g_q_Hz,transfer`.
void write_transfer_map(std::ostream& out, const TransferMap& map);

}  // namespace dpql::sweep
