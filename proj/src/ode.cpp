#include "dpql/ode.hpp"

#include <algorithm>
#include <cmath>

namespace dpql::ode {
namespace {

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                 a64 = 49.0 / 176, a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                 b6 = 11.0 / 84;
// b - b*, the embedded fourth-order error weights.
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                 e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

class Stepper {
 public:
  Stepper(const Rhs& rhs, std::size_t n, const Options& opt)
      : rhs_(rhs), opt_(opt), k1_(n), k2_(n), k3_(n), k4_(n), k5_(n), k6_(n), k7_(n),
        tmp_(n), ynew_(n) {}

  double initial_step(double t, const std::vector<double>& y, double span) {
    if (opt_.initial_step > 0) return std::min(opt_.initial_step, span);
    rhs_(t, y, k1_);
    have_k1_ = true;
    double d0 = 0, d1 = 0;
    for (std::size_t i = 0; i < y.size(); ++i) {
      const double sc = opt_.abs_tol + opt_.rel_tol * std::abs(y[i]);
      d0 += (y[i] / sc) * (y[i] / sc);
      d1 += (k1_[i] / sc) * (k1_[i] / sc);
    }
    d0 = std::sqrt(d0 / y.size());
    d1 = std::sqrt(d1 / y.size());
    double h = (d0 < 1e-5 || d1 < 1e-5) ? 1e-6 : 0.01 * d0 / d1;
    h = std::min({h, span, opt_.max_step});
    return std::max(h, 1e-12 * std::max(1.0, std::abs(t)));
  }

  /// Attempts one step of size h; on success y and t advance.
  bool try_step(double& t, std::vector<double>& y, double h, double& h_next) {
    const std::size_t n = y.size();
    if (!have_k1_) {
      rhs_(t, y, k1_);
      have_k1_ = true;
    }
    for (std::size_t i = 0; i < n; ++i) tmp_[i] = y[i] + h * a21 * k1_[i];
    rhs_(t + c2 * h, tmp_, k2_);
    for (std::size_t i = 0; i < n; ++i) tmp_[i] = y[i] + h * (a31 * k1_[i] + a32 * k2_[i]);
    rhs_(t + c3 * h, tmp_, k3_);
    for (std::size_t i = 0; i < n; ++i)
      tmp_[i] = y[i] + h * (a41 * k1_[i] + a42 * k2_[i] + a43 * k3_[i]);
    rhs_(t + c4 * h, tmp_, k4_);
    for (std::size_t i = 0; i < n; ++i)
      tmp_[i] = y[i] + h * (a51 * k1_[i] + a52 * k2_[i] + a53 * k3_[i] + a54 * k4_[i]);
    rhs_(t + c5 * h, tmp_, k5_);
    for (std::size_t i = 0; i < n; ++i)
      tmp_[i] = y[i] + h * (a61 * k1_[i] + a62 * k2_[i] + a63 * k3_[i] + a64 * k4_[i] +
                            a65 * k5_[i]);
    rhs_(t + h, tmp_, k6_);
    for (std::size_t i = 0; i < n; ++i)
      ynew_[i] = y[i] + h * (b1 * k1_[i] + b3 * k3_[i] + b4 * k4_[i] + b5 * k5_[i] +
                             b6 * k6_[i]);
    rhs_(t + h, ynew_, k7_);

    double err = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double ei = h * (e1 * k1_[i] + e3 * k3_[i] + e4 * k4_[i] + e5 * k5_[i] +
                             e6 * k6_[i] + e7 * k7_[i]);
      const double sc =
          opt_.abs_tol + opt_.rel_tol * std::max(std::abs(y[i]), std::abs(ynew_[i]));
      err += (ei / sc) * (ei / sc);
    }
    err = std::sqrt(err / n);

    if (!std::isfinite(err)) {
      h_next = 0.2 * h;
      return false;
    }
    const double factor =
        err == 0 ? 5.0 : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
    if (err <= 1.0) {
      t += h;
      y.swap(ynew_);
      k1_.swap(k7_);  // first-same-as-last
      h_next = std::min(h * factor, opt_.max_step);
      return true;
    }
    h_next = h * std::min(1.0, factor);
    return false;
  }

 private:
  const Rhs& rhs_;
  const Options& opt_;
  std::vector<double> k1_, k2_, k3_, k4_, k5_, k6_, k7_, tmp_, ynew_;
  bool have_k1_ = false;
};

Stats advance(Stepper& stepper, std::vector<double>& y, double& t, double t_end, double& h,
              const Options& opt, const StepObserver& observer, Stats stats) {
  while (t < t_end) {
    const double remaining = t_end - t;
    const bool last = h >= remaining;
    const double step = last ? remaining : h;
    if (step < 1e-13 * std::max(1.0, std::abs(t))) {
      throw IntegrationError("step size underflow", t);
    }
    if (stats.accepted + stats.rejected >= opt.max_steps) {
      throw IntegrationError("step budget exhausted", t);
    }
    double h_next = h;
    if (stepper.try_step(t, y, step, h_next)) {
      ++stats.accepted;
      if (last) t = t_end;
      if (observer && !observer(t, y)) throw IntegrationError("observer rejected step", t);
      // Keep the controller's proposal rather than the clipped final step.
      h = last ? std::max(h, h_next) : h_next;
    } else {
      ++stats.rejected;
      h = h_next;
    }
  }
  return stats;
}

}  // namespace

Stats integrate(const Rhs& rhs, std::vector<double>& y, double t0, double t1,
                const Options& options, const StepObserver& observer) {
  if (!(t1 > t0)) return {};
  Stepper stepper(rhs, y.size(), options);
  double t = t0;
  double h = stepper.initial_step(t, y, t1 - t0);
  return advance(stepper, y, t, t1, h, options, observer, {});
}

Stats integrate_to_outputs(const Rhs& rhs, std::vector<double>& y, double t0,
                           std::span<const double> output_times,
                           const std::function<void(double, std::span<const double>)>& sink,
                           const Options& options, const StepObserver& observer) {
  Stepper stepper(rhs, y.size(), options);
  double t = t0;
  Stats stats;
  double h = 0;
  for (const double target : output_times) {
    if (target < t) throw std::invalid_argument("output times must be ascending and >= t0");
    if (target > t) {
      if (h == 0) h = stepper.initial_step(t, y, target - t);
      stats = advance(stepper, y, t, target, h, options, observer, stats);
    }
    sink(t, y);
  }
  return stats;
}

}  // namespace dpql::ode
