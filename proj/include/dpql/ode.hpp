#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dpql::ode {

/// dy/dt = f(t, y), written into `dydt`.
using Rhs = std::function<void(double t, std::span<const double> y, std::span<double> dydt)>;

/// Called after every accepted step. Returning false aborts the integration
/// with an IntegrationError at the current time.
using StepObserver = std::function<bool(double t, std::span<const double> y)>;

struct Options {
  double abs_tol = 1e-8;
  double rel_tol = 1e-8;
  double initial_step = 0.0;  // 0 selects a step automatically
  double max_step = std::numeric_limits<double>::infinity();
  std::size_t max_steps = 50'000'000;
};

struct Stats {
  std::size_t accepted = 0;
  std::size_t rejected = 0;
};

/// The integrator could not continue; `last_valid_time()` is the end of the
/// last accepted step.
class IntegrationError : public std::runtime_error {
 public:
  IntegrationError(const std::string& what, double last_valid_time)
      : std::runtime_error(what), last_valid_time_(last_valid_time) {}
  double last_valid_time() const { return last_valid_time_; }

 private:
  double last_valid_time_;
};

/// Adaptive Dormand-Prince 5(4) integration of `y` from t0 to t1 (t1 > t0).
/// `y` holds the solution at t1 on return.
Stats integrate(const Rhs& rhs, std::vector<double>& y, double t0, double t1,
                const Options& options = {}, const StepObserver& observer = {});

/// Integrates through each of the ascending `output_times` (all >= t0) and
/// hands the state at each one to `sink`. Steps are clipped so every output
/// time is hit exactly rather than interpolated.
Stats integrate_to_outputs(const Rhs& rhs, std::vector<double>& y, double t0,
                           std::span<const double> output_times,
                           const std::function<void(double, std::span<const double>)>& sink,
                           const Options& options = {}, const StepObserver& observer = {});

}  // namespace dpql::ode
