#include "dpql/bbr_kinetics.hpp"

#include <algorithm>
#include <cmath>
#include <future>
#include <numbers>
#include <ostream>
#include <stdexcept>

#include "dpql/config.hpp"
#include "dpql/physical_constants.hpp"

namespace dpql::bbr {
namespace {

using spectroscopy::level_energy;

constexpr double kPi = std::numbers::pi;

std::size_t find_level(const std::vector<RoVibState>& levels, const RoVibState& s) {
  RoVibState key = s;
  key.parity.reset();
  const auto it = std::find(levels.begin(), levels.end(), key);
  if (it == levels.end()) {
    throw std::domain_error("level outside the radiative set: " + spectroscopy::to_string(s));
  }
  return static_cast<std::size_t>(it - levels.begin());
}

// Radiative level set: both Omega = 3/2 vibrational manifolds.
std::vector<RoVibState> radiative_levels(const MolecularConstants& c) {
  return spectroscopy::manifold_levels(c, 3);
}

double line_frequency(const RoVibState& upper, const RoVibState& lower,
                      const MolecularConstants& c) {
  return constants::wavenumber_to_hz(level_energy(upper, c) - level_energy(lower, c));
}

// Squared transition dipole (C^2 m^2) for an allowed pair, zero otherwise.
double dipole_squared(const RoVibState& upper, const RoVibState& lower,
                      const MolecularConstants& c) {
  if (upper.two_omega != lower.two_omega) return 0.0;
  const int dv = upper.v - lower.v;
  const int dJ2 = std::abs(upper.two_J - lower.two_J);
  double scale = 0.0;
  if (dv == 0 && dJ2 == 2) {
    scale = c.mu_rot_scale * c.mu_rot_scale;
  } else if (dv == 1 && dJ2 <= 2) {
    scale = c.mu_vib_scale * c.mu_vib_scale * upper.v;
  } else {
    return 0.0;
  }
  return scale * constants::debye * constants::debye;
}

double spontaneous_rate(const RoVibState& upper, const RoVibState& lower,
                        const MolecularConstants& c) {
  const double mu2 = dipole_squared(upper, lower, c);
  if (mu2 == 0.0) return 0.0;
  const double nu = line_frequency(upper, lower, c);
  if (!(nu > 0)) return 0.0;
  const double S = honl_london(upper.J(), lower.J(), upper.omega());
  using namespace constants;
  return 16.0 * kPi * kPi * kPi * nu * nu * nu * mu2 * S /
         (3.0 * vacuum_permittivity * planck * speed_of_light * speed_of_light *
          speed_of_light * (upper.two_J + 1));
}

// B (emission) from A; rho * B has units of s^-1.
double stimulated_from_spontaneous(double A, double nu) {
  using namespace constants;
  return A * speed_of_light * speed_of_light * speed_of_light / (8.0 * kPi * planck * nu * nu * nu);
}

std::vector<double> to_vector(const StateDistribution& d) { return d.populations; }

PopulationTrajectory run(const std::vector<RoVibState>& levels,
                         const Eigen::SparseMatrix<double>& generator, double T,
                         std::vector<double> y, std::span<const double> output_times,
                         double tol, bool check_normalisation) {
  const double initial_total = [&] {
    double s = 0;
    for (double v : y) s += v;
    return s;
  }();
  const ode::Rhs rhs = [&generator](double, std::span<const double> x, std::span<double> dx) {
    Eigen::Map<const Eigen::VectorXd> xv(x.data(), static_cast<Eigen::Index>(x.size()));
    Eigen::Map<Eigen::VectorXd> dv(dx.data(), static_cast<Eigen::Index>(dx.size()));
    dv.noalias() = generator * xv;
  };
  const ode::StepObserver observer = [&](double t, std::span<const double> x) {
    double sum = 0;
    for (double v : x) {
      if (v < -tol) throw ode::IntegrationError("population fell below -tol", t);
      sum += v;
    }
    if (check_normalisation && std::abs(sum - initial_total) > tol) {
      throw ode::IntegrationError("normalisation drift exceeds tol", t);
    }
    return true;
  };
  // Local error control sits well inside the positivity and normalisation budget.
  ode::Options opt;
  opt.abs_tol = 1e-3 * tol;
  opt.rel_tol = 1e-3 * tol;

  PopulationTrajectory out;
  ode::integrate_to_outputs(
      rhs, y, 0.0, output_times,
      [&](double t, std::span<const double> x) {
        out.times.push_back(t);
        StateDistribution d;
        d.levels = levels;
        d.populations.assign(x.begin(), x.end());
        d.temperature = T;
        out.distributions.push_back(std::move(d));
      },
      opt, observer);
  return out;
}

std::vector<double> linear_grid(double duration, std::size_t points) {
  std::vector<double> t(std::max<std::size_t>(points, 2));
  for (std::size_t i = 0; i < t.size(); ++i) {
    t[i] = duration * static_cast<double>(i) / static_cast<double>(t.size() - 1);
  }
  return t;
}

}  // namespace

double planck_energy_density(double nu, double T) {
  if (!(nu > 0) || !(T > 0)) {
    throw std::domain_error("planck_energy_density needs nu > 0 and T > 0");
  }
  using namespace constants;
  return 8.0 * kPi * planck * nu * nu * nu / (speed_of_light * speed_of_light * speed_of_light) *
         photon_occupation(nu, T);
}

double photon_occupation(double nu, double T) {
  if (T <= 0) return 0.0;
  const double x = constants::planck * nu / (constants::boltzmann * T);
  return 1.0 / std::expm1(x);
}

double honl_london(double J_upper, double J_lower, double omega) {
  const double J = J_upper;
  const double d = J_lower - J_upper;
  if (std::abs(d + 1.0) < 1e-9) return (J + omega) * (J - omega) / J;
  if (std::abs(d) < 1e-9) return omega * omega * (2.0 * J + 1.0) / (J * (J + 1.0));
  if (std::abs(d - 1.0) < 1e-9) return (J + 1.0 + omega) * (J + 1.0 - omega) / (J + 1.0);
  return 0.0;
}

std::size_t EinsteinCoefficients::index_of(const RoVibState& s) const {
  return find_level(levels, s);
}

EinsteinCoefficients build_einstein_coefficients(const MolecularConstants& c) {
  c.validate();
  EinsteinCoefficients e;
  e.levels = radiative_levels(c);
  const auto n = static_cast<Eigen::Index>(e.levels.size());
  e.A = Eigen::MatrixXd::Zero(n, n);
  e.B = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t u = 0; u < e.levels.size(); ++u) {
    for (std::size_t l = 0; l < e.levels.size(); ++l) {
      if (u == l) continue;
      const double nu = line_frequency(e.levels[u], e.levels[l], c);
      if (!(nu > 0)) continue;
      const double A = spontaneous_rate(e.levels[u], e.levels[l], c);
      if (A == 0.0) continue;
      const double B = stimulated_from_spontaneous(A, nu);
      e.A(static_cast<Eigen::Index>(u), static_cast<Eigen::Index>(l)) = A;
      e.B(static_cast<Eigen::Index>(u), static_cast<Eigen::Index>(l)) = B;
      e.lines.push_back({u, l, nu, A, B});
    }
  }
  return e;
}

double vibrational_decay_rate(const MolecularConstants& c, int two_J) {
  const RoVibState upper{1, 3, two_J, std::nullopt};
  spectroscopy::check_state(upper, c);
  double total = 0.0;
  for (int d : {-2, 0, 2}) {
    const RoVibState lower{0, 3, two_J + d, std::nullopt};
    if (lower.two_J < 3 || (lower.two_J - 3) / 2 >= c.J_count) continue;
    total += spontaneous_rate(upper, lower, c);
  }
  return total;
}

std::pair<double, double> calibrate_dipole_scales(const MolecularConstants& c,
                                                  double vib_decay_rate, double rot_to_vib) {
  if (!(vib_decay_rate > 0) || !(rot_to_vib > 0)) {
    throw std::invalid_argument("calibration targets must be positive");
  }
  MolecularConstants unit = c;
  unit.mu_vib_scale = 1.0;
  const double rate_at_unit = vibrational_decay_rate(unit, 3);
  const double mu_vib = std::sqrt(vib_decay_rate / rate_at_unit);
  return {mu_vib, rot_to_vib * mu_vib};
}

std::size_t RateMatrix::index_of(const RoVibState& s) const { return find_level(levels, s); }

double RateMatrix::conservation_error() const {
  const double scale = generator.diagonal().cwiseAbs().maxCoeff();
  if (scale == 0.0) return 0.0;
  return generator.colwise().sum().cwiseAbs().maxCoeff() / scale;
}

double RateMatrix::detailed_balance_residual(const MolecularConstants& c) const {
  const auto p = spectroscopy::boltzmann_distribution(levels, c, temperature).populations;
  const Eigen::Map<const Eigen::VectorXd> pv(p.data(), static_cast<Eigen::Index>(p.size()));
  const Eigen::VectorXd flux = generator * pv;
  const Eigen::VectorXd outflow = generator.diagonal().cwiseProduct(pv);
  return flux.norm() / outflow.norm();
}

Eigen::SparseMatrix<double> RateMatrix::sparse() const { return generator.sparseView(); }

RateMatrix build_rate_matrix(const MolecularConstants& c, double T) {
  if (!(T >= 0) || !std::isfinite(T)) throw std::domain_error("temperature must be >= 0");
  const EinsteinCoefficients e = build_einstein_coefficients(c);
  RateMatrix m;
  m.levels = e.levels;
  m.temperature = T;
  const auto n = static_cast<Eigen::Index>(m.levels.size());
  m.generator = Eigen::MatrixXd::Zero(n, n);
  for (const auto& line : e.lines) {
    const auto u = static_cast<Eigen::Index>(line.upper);
    const auto l = static_cast<Eigen::Index>(line.lower);
    const double rhoB = T > 0 ? planck_energy_density(line.frequency, T) * line.B : 0.0;
    const double down = line.A + rhoB;
    const double g_ratio = static_cast<double>(m.levels[line.upper].two_J + 1) /
                           static_cast<double>(m.levels[line.lower].two_J + 1);
    const double up = rhoB * g_ratio;
    m.generator(l, u) += down;
    m.generator(u, u) -= down;
    m.generator(u, l) += up;
    m.generator(l, l) -= up;
  }
  return m;
}

StateDistribution stationary_distribution(const RateMatrix& m, const MolecularConstants& c) {
  return spectroscopy::boltzmann_distribution(m.levels, c, m.temperature);
}

std::vector<double> PopulationTrajectory::series(const RoVibState& s) const {
  std::vector<double> out;
  out.reserve(distributions.size());
  for (const auto& d : distributions) out.push_back(d.probability_of(s));
  return out;
}

PopulationTrajectory evolve_populations(const RateMatrix& m, const StateDistribution& init,
                                        double duration, const EvolveOptions& options) {
  if (!(duration >= 0)) throw std::invalid_argument("duration must be non-negative");
  if (init.levels != m.levels) {
    throw std::invalid_argument("initial distribution is not over the rate matrix levels");
  }
  if (std::abs(init.total() - 1.0) > options.tol) {
    throw std::invalid_argument("initial distribution must sum to one");
  }
  std::vector<double> times = options.output_times.empty()
                                  ? linear_grid(duration, options.snapshots)
                                  : options.output_times;
  return run(m.levels, m.sparse(), m.temperature, to_vector(init), times, options.tol, true);
}

StateDistribution point_distribution(const RateMatrix& m, const RoVibState& s, double T) {
  StateDistribution d;
  d.levels = m.levels;
  d.populations.assign(m.levels.size(), 0.0);
  d.populations[m.index_of(s)] = 1.0;
  d.temperature = T;
  return d;
}

double ground_state_residence_lifetime(const MolecularConstants& c, double T) {
  if (!(T > 0)) throw std::domain_error("temperature must be positive");
  RateMatrix m = build_rate_matrix(c, T);
  const auto g = static_cast<Eigen::Index>(m.index_of(spectroscopy::kGroundRotational));
  // Switch off returns into the ground level so that its population is the
  // probability of not yet having left.
  for (Eigen::Index j = 0; j < m.generator.cols(); ++j) {
    if (j != g) m.generator(g, j) = 0.0;
  }
  const Eigen::SparseMatrix<double> sparse = m.sparse();
  const double floor = 1e-2;  // two decades

  double horizon = 1.0;
  PopulationTrajectory traj;
  for (;;) {
    std::vector<double> y(m.levels.size(), 0.0);
    y[static_cast<std::size_t>(g)] = 1.0;
    const auto times = linear_grid(horizon, 201);
    // Total probability is not conserved once inflow is removed.
    traj = run(m.levels, sparse, T, std::move(y), times, 1e-10, false);
    if (traj.distributions.back().populations[static_cast<std::size_t>(g)] < floor) break;
    horizon *= 2.0;
    if (horizon > 1e7) throw std::runtime_error("ground level does not decay");
  }

  // Least-squares fit of log N(t) = a - t / tau over the first two decades.
  double st = 0, sy = 0, stt = 0, sty = 0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < traj.times.size(); ++i) {
    const double p = traj.distributions[i].populations[static_cast<std::size_t>(g)];
    if (p < floor) break;
    const double t = traj.times[i];
    const double ly = std::log(p);
    st += t;
    sy += ly;
    stt += t * t;
    sty += t * ly;
    ++count;
  }
  const double nf = static_cast<double>(count);
  const double slope = (nf * sty - st * sy) / (nf * stt - st * st);
  return -1.0 / slope;
}

double ground_state_relaxation_time(const MolecularConstants& c, double T) {
  const RateMatrix m = build_rate_matrix(c, T);
  const auto g = m.index_of(spectroscopy::kGroundRotational);
  const double eq = stationary_distribution(m, c).populations[g];
  const double target = std::exp(-1.0);
  const double horizon = 2000.0;
  const auto times = linear_grid(horizon, 20001);
  const auto traj = evolve_populations(m, point_distribution(m, spectroscopy::kGroundRotational, T),
                                       horizon, {.tol = 1e-8, .snapshots = 0, .output_times = times});
  double prev_t = 0, prev_x = 1.0;
  for (std::size_t i = 0; i < traj.times.size(); ++i) {
    const double x = (traj.distributions[i].populations[g] - eq) / (1.0 - eq);
    if (x <= target) {
      return prev_t + (prev_x - target) / (prev_x - x) * (traj.times[i] - prev_t);
    }
    prev_t = traj.times[i];
    prev_x = x;
  }
  throw std::runtime_error("ground level excess did not relax within the horizon");
}

std::optional<double> ground_state_refill_time(const MolecularConstants& c, double T,
                                               const RoVibState& initial, double fraction,
                                               double horizon) {
  if (!(fraction > 0) || !(horizon > 0)) {
    throw std::invalid_argument("fraction and horizon must be positive");
  }
  const RateMatrix m = build_rate_matrix(c, T);
  const auto g = m.index_of(spectroscopy::kGroundRotational);
  const double target = fraction * stationary_distribution(m, c).populations[g];
  const auto points = static_cast<std::size_t>(std::ceil(horizon / 0.25)) + 1;
  const auto times = linear_grid(horizon, points);
  const auto traj = evolve_populations(m, point_distribution(m, initial, T), horizon,
                                       {.tol = 1e-8, .snapshots = 0, .output_times = times});
  double prev_t = 0, prev_x = traj.distributions.front().populations[g];
  if (prev_x >= target) return 0.0;
  for (std::size_t i = 1; i < traj.times.size(); ++i) {
    const double x = traj.distributions[i].populations[g];
    if (x >= target) {
      return prev_t + (target - prev_x) / (x - prev_x) * (traj.times[i] - prev_t);
    }
    prev_t = traj.times[i];
    prev_x = x;
  }
  return std::nullopt;
}

double leave_probability_per_cycle(const MolecularConstants& c, double T, double cycle,
                                   std::optional<double> override_value) {
  if (override_value) {
    if (!(*override_value >= 0 && *override_value <= 1)) {
      throw ConfigError("p_s override must lie in [0, 1]");
    }
    return *override_value;
  }
  if (!(cycle > 0)) throw std::domain_error("cycle must be positive");
  return -std::expm1(-cycle / ground_state_residence_lifetime(c, T));
}

std::vector<LifetimeRow> lifetime_sweep(const MolecularConstants& c,
                                        std::span<const double> temperatures) {
  std::vector<std::future<LifetimeRow>> jobs;
  jobs.reserve(temperatures.size());
  for (double T : temperatures) {
    jobs.push_back(std::async(std::launch::async, [c, T] {
      return LifetimeRow{T, ground_state_residence_lifetime(c, T),
                         spectroscopy::thermal_population(spectroscopy::kGroundRotational, c, T)};
    }));
  }
  std::vector<LifetimeRow> rows;
  rows.reserve(jobs.size());
  for (auto& j : jobs) rows.push_back(j.get());
  return rows;
}

void write_trajectory(std::ostream& out, const PopulationTrajectory& trajectory,
                      std::span<const RoVibState> tracked) {
  out << "time_s";
  for (const auto& s : tracked) {
    out << ",pop_v" << s.v << "_Omega" << s.two_omega << "/2_J" << s.two_J << "/2";
  }
  out << '\n';
  for (std::size_t i = 0; i < trajectory.times.size(); ++i) {
    out << format_double(trajectory.times[i]);
    for (const auto& s : tracked) {
      out << ',' << format_double(trajectory.distributions[i].probability_of(s));
    }
    out << '\n';
  }
}

void write_lifetime_sweep(std::ostream& out, std::span<const LifetimeRow> rows) {
  out << "T_K,lifetime_s,thermal_population\n";
  for (const auto& r : rows) {
    out << format_double(r.temperature) << ',' << format_double(r.lifetime) << ','
        << format_double(r.thermal_population) << '\n';
  }
}

}  // namespace dpql::bbr
