#include "dpql/sweep_dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <numbers>
#include <ostream>
#include <stdexcept>
#include <thread>

#include "dpql/ode.hpp"

namespace dpql::sweep {
namespace {

using cd = std::complex<double>;
constexpr double kNormBudget = 1e-6;

// Sign of dDelta/dt where Delta = omega_mol - omega_q.
double detuning_slope(const SweepConfig& cfg) {
  return cfg.omega_end < cfg.omega_start ? cfg.ramp_rate : -cfg.ramp_rate;
}

// Integral of the detuning from 0 to t.
double accumulated_phase(const SweepConfig& cfg, double t) {
  return (cfg.omega_mol - cfg.omega_start) * t + 0.5 * detuning_slope(cfg) * t * t;
}

}  // namespace

void SweepConfig::validate() const {
  if (!(ramp_rate > 0)) throw ConfigError("ramp_rate must be positive");
  if (omega_start == omega_end) throw ConfigError("omega_start and omega_end must differ");
  if (!(g_q >= 0)) throw ConfigError("g_q must be non-negative");
  if (!(time_step > 0)) throw ConfigError("time_step must be positive");
  if (!(tolerance > 0)) throw ConfigError("tolerance must be positive");
}

double SweepConfig::duration() const { return std::abs(omega_end - omega_start) / ramp_rate; }

double SweepConfig::omega_q(double t) const {
  return omega_end < omega_start ? omega_start - ramp_rate * t : omega_start + ramp_rate * t;
}

SweepConfig SweepConfig::from_config(const KeyValueConfig& config) {
  SweepConfig s;
  const double tp = constants::two_pi;
  if (auto v = config.get_double("sweep.omega_start_hz")) s.omega_start = tp * *v;
  if (auto v = config.get_double("sweep.omega_end_hz")) s.omega_end = tp * *v;
  if (auto v = config.get_double("sweep.ramp_rate_hz_per_s")) s.ramp_rate = tp * *v;
  if (auto v = config.get_double("sweep.omega_mol_hz")) s.omega_mol = tp * *v;
  if (auto v = config.get_double("sweep.g_q_hz")) s.g_q = tp * *v;
  s.time_step = config.get_double("sweep.time_step_s", s.time_step);
  s.tolerance = config.get_double("sweep.tolerance", s.tolerance);
  if (auto f = config.get_string("sweep.frame")) {
    if (*f == "rotating") {
      s.frame = Frame::rotating;
    } else if (*f == "fixed") {
      s.frame = Frame::fixed;
    } else {
      throw ConfigError("sweep.frame must be 'rotating' or 'fixed'");
    }
  }
  s.validate();
  return s;
}

void SweepConfig::write_config(KeyValueConfig& config) const {
  const double tp = constants::two_pi;
  config.set("sweep.omega_start_hz", format_double(omega_start / tp));
  config.set("sweep.omega_end_hz", format_double(omega_end / tp));
  config.set("sweep.ramp_rate_hz_per_s", format_double(ramp_rate / tp));
  config.set("sweep.omega_mol_hz", format_double(omega_mol / tp));
  config.set("sweep.g_q_hz", format_double(g_q / tp));
  config.set("sweep.time_step_s", format_double(time_step));
  config.set("sweep.tolerance", format_double(tolerance));
  config.set("sweep.frame", frame == Frame::rotating ? "rotating" : "fixed");
}

Matrix2c jc_coupling_matrix(double omega_q, const SweepConfig& cfg) {
  const double half_detuning = 0.5 * (cfg.omega_mol - omega_q);
  const double half_coupling = 0.5 * cfg.g_q;  // sqrt(n + 1) = 1 for n = 0
  return {{{cd(half_detuning), cd(half_coupling)}, {cd(half_coupling), cd(-half_detuning)}}};
}

TwoLevelAmplitudes evolve_amplitudes(const SweepConfig& cfg) {
  cfg.validate();
  const double half_g = 0.5 * cfg.g_q;
  // State layout: Re f, Im f, Re e, Im e.
  ode::Rhs rhs;
  if (cfg.frame == Frame::rotating) {
    // c_f' = -i g/2 e^{+i theta} c_e,  c_e' = -i g/2 e^{-i theta} c_f.
    rhs = [&cfg, half_g](double t, std::span<const double> y, std::span<double> dy) {
      const cd f(y[0], y[1]);
      const cd e(y[2], y[3]);
      const cd phase = std::polar(1.0, accumulated_phase(cfg, t));
      const cd df = cd(0, -half_g) * phase * e;
      const cd de = cd(0, -half_g) * std::conj(phase) * f;
      dy[0] = df.real();
      dy[1] = df.imag();
      dy[2] = de.real();
      dy[3] = de.imag();
    };
  } else {
    rhs = [&cfg](double t, std::span<const double> y, std::span<double> dy) {
      const Matrix2c h = jc_coupling_matrix(cfg.omega_q(t), cfg);
      const cd f(y[0], y[1]);
      const cd e(y[2], y[3]);
      const cd df = cd(0, -1) * (h[0][0] * f + h[0][1] * e);
      const cd de = cd(0, -1) * (h[1][0] * f + h[1][1] * e);
      dy[0] = df.real();
      dy[1] = df.imag();
      dy[2] = de.real();
      dy[3] = de.imag();
    };
  }
  const ode::StepObserver observer = [](double t, std::span<const double> y) {
    const double n = y[0] * y[0] + y[1] * y[1] + y[2] * y[2] + y[3] * y[3];
    if (std::abs(n - 1.0) > kNormBudget) throw ode::IntegrationError("norm drift exceeds 1e-6", t);
    return true;
  };
  ode::Options opt;
  opt.abs_tol = cfg.tolerance;
  opt.rel_tol = cfg.tolerance;
  opt.max_step = cfg.time_step;

  std::vector<double> y{1.0, 0.0, 0.0, 0.0};
  const double T = cfg.duration();
  ode::integrate(rhs, y, 0.0, T, opt, observer);

  TwoLevelAmplitudes out{cd(y[0], y[1]), cd(y[2], y[3])};
  if (cfg.frame == Frame::rotating) {
    const double theta = accumulated_phase(cfg, T);
    out.amp_f_n *= std::polar(1.0, -0.5 * theta);
    out.amp_e_np1 *= std::polar(1.0, 0.5 * theta);
  }
  return out;
}

double evolve_sweep(const SweepConfig& cfg) { return std::norm(evolve_amplitudes(cfg).amp_e_np1); }

double landau_zener_oracle(double g_q, double ramp_rate) {
  if (!(ramp_rate > 0)) throw std::domain_error("ramp_rate must be positive");
  const double half_g = 0.5 * g_q;
  return -std::expm1(-constants::two_pi * half_g * half_g / ramp_rate);
}

TransferMap transfer_window_map(const SweepConfig& cfg, std::span<const double> omega_mol_values,
                                std::span<const double> g_q_values, unsigned workers) {
  if (omega_mol_values.empty() || g_q_values.empty()) {
    throw std::invalid_argument("transfer map grids must be non-empty");
  }
  TransferMap map;
  map.omega_mol.assign(omega_mol_values.begin(), omega_mol_values.end());
  map.g_q.assign(g_q_values.begin(), g_q_values.end());
  map.transfer.assign(map.g_q.size(), std::vector<double>(map.omega_mol.size(), 0.0));

  const std::size_t cells = map.g_q.size() * map.omega_mol.size();
  if (workers == 0) workers = std::max(1u, std::thread::hardware_concurrency());
  std::vector<std::future<void>> jobs;
  for (unsigned w = 0; w < workers; ++w) {
    jobs.push_back(std::async(std::launch::async, [&, w] {
      for (std::size_t k = w; k < cells; k += workers) {
        const std::size_t i = k / map.omega_mol.size();
        const std::size_t j = k % map.omega_mol.size();
        SweepConfig point = cfg;
        point.g_q = map.g_q[i];
        point.omega_mol = map.omega_mol[j];
        map.transfer[i][j] = evolve_sweep(point);
      }
    }));
  }
  for (auto& j : jobs) j.get();
  return map;
}

std::optional<std::pair<double, double>> high_fidelity_window(const TransferMap& map,
                                                              std::size_t g_row,
                                                              double threshold) {
  const auto& row = map.transfer.at(g_row);
  std::optional<std::pair<double, double>> window;
  for (std::size_t j = 0; j < row.size(); ++j) {
    if (!(row[j] > threshold)) continue;
    const double w = map.omega_mol[j];
    if (!window) {
      window = std::pair{w, w};
    } else {
      window->first = std::min(window->first, w);
      window->second = std::max(window->second, w);
    }
  }
  return window;
}

std::vector<double> frequency_grid(double lo, double hi, double step) {
  if (!(hi >= lo) || !(step > 0)) throw std::invalid_argument("bad frequency grid");
  const auto n = static_cast<std::size_t>(std::llround((hi - lo) / step));
  std::vector<double> out(n + 1);
  for (std::size_t i = 0; i <= n; ++i) {
    out[i] = n == 0 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n);
  }
  return out;
}

double offres_carrier_excitation(double rabi, double detuning, double pulse,
                                 double carrier_noise) {
  if (detuning == 0.0) throw std::domain_error("detuning must be non-zero");
  if (!(pulse >= 0) || !(carrier_noise >= 0)) {
    throw std::domain_error("pulse and carrier noise must be non-negative");
  }
  if (rabi == 0.0) return 0.0;
  const auto excitation = [&](double offset) {
    const double d = detuning + offset;
    const double w2 = rabi * rabi + d * d;
    const double w = std::sqrt(w2);
    const double amplitude = rabi * rabi / w2;
    // sin^2(W t / 2) reaches one within the pulse once W * pulse >= pi.
    if (w * pulse >= std::numbers::pi) return amplitude;
    const double s = std::sin(0.5 * w * pulse);
    return amplitude * s * s;
  };
  const int samples = 4000;
  double best = std::max(excitation(-carrier_noise), excitation(carrier_noise));
  for (int i = 0; i <= samples; ++i) {
    const double offset = -carrier_noise + 2.0 * carrier_noise * i / samples;
    best = std::max(best, excitation(offset));
  }
  if (std::abs(detuning) <= carrier_noise) best = std::max(best, excitation(-detuning));
  return best;
}

void write_transfer_map(std::ostream& out, const TransferMap& map) {
  out << "omega_mol_Hz,g_q_Hz,transfer\n";
  for (std::size_t i = 0; i < map.g_q.size(); ++i) {
    for (std::size_t j = 0; j < map.omega_mol.size(); ++j) {
      out << format_double(map.omega_mol[j] / constants::two_pi) << ','
          << format_double(map.g_q[i] / constants::two_pi) << ','
          << format_double(map.transfer[i][j]) << '\n';
    }
  }
}

}  // namespace dpql::sweep
