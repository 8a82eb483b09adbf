#include "dpql/run_statistics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <ostream>
#include <stdexcept>

#include <json.hpp>

#include "dpql/config.hpp"

namespace dpql::stats {
namespace {

void require_probability(double p, const char* name) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw std::domain_error(std::string(name) + " must lie in [0, 1]");
  }
}

void require_run_arguments(std::size_t n, std::size_t x, double p_dark) {
  require_probability(p_dark, "p_dark");
  if (x > n) throw std::domain_error("run length x exceeds the number of trials n");
}

double log_binomial(std::size_t n, std::size_t k) {
  return std::lgamma(static_cast<double>(n) + 1.0) - std::lgamma(static_cast<double>(k) + 1.0) -
         std::lgamma(static_cast<double>(n - k) + 1.0);
}

// Inverse of the lower-tail normal CDF (Acklam's rational approximation,
// relative error ~1e-9), refined below with one Halley step.
double inverse_normal_lower(double p) {
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;
  double x = 0.0;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  if (0.5 * x * x < 700.0) {
    const double e = 0.5 * std::erfc(-x / std::numbers::sqrt2) - p;
    const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
    x -= u / (1.0 + 0.5 * x * u);
  }
  return x;
}

double exact_p_value(std::size_t n, std::size_t x, double p_dark, bool use_recursion) {
  if (use_recursion) return 1.0 - longest_run_cdf_recursive(n, x, p_dark);
  return longest_run_tail(n, x, p_dark);
}

double z_or_infinite(double p) {
  if (p <= 0.0) return std::numeric_limits<double>::infinity();
  if (p >= 1.0) return -std::numeric_limits<double>::infinity();
  return z_from_p(p);
}

}  // namespace

void NoiseSignalModel::validate() const {
  require_probability(p_b, "p_b");
  require_probability(p_d, "p_d");
  require_probability(p_s, "p_s");
  require_probability(p_g, "p_g");
  if (!(p_d > p_b)) throw std::domain_error("p_d must exceed p_b");
  if (bin == 0) throw std::domain_error("bin must be >= 1");
}

double binomial_pmf(std::size_t n, std::size_t k, double q) {
  if (k > n) return 0.0;
  if (q <= 0.0) return k == 0 ? 1.0 : 0.0;
  if (q >= 1.0) return k == n ? 1.0 : 0.0;
  return std::exp(log_binomial(n, k) + static_cast<double>(k) * std::log(q) +
                  static_cast<double>(n - k) * std::log1p(-q));
}

double binom_noise_pmf(std::size_t k, const NoiseSignalModel& model) {
  model.validate();
  if (k > model.bin) throw std::domain_error("k exceeds the bin size");
  return binomial_pmf(model.bin, k, model.p_b);
}

double signal_bin_pmf(std::size_t k, const NoiseSignalModel& model) {
  model.validate();
  const std::size_t n = model.bin;
  if (k > n) throw std::domain_error("k exceeds the bin size");
  double total = 0.0;
  for (std::size_t i = 1; i <= n; ++i) {
    // Stay of exactly i cycles; the last cycle of the bin absorbs the remaining mass.
    const double stay = i < n ? std::pow(1.0 - model.p_s, static_cast<double>(i - 1)) * model.p_s
                              : std::pow(1.0 - model.p_s, static_cast<double>(n - 1));
    if (stay == 0.0) continue;
    double inner = 0.0;
    for (std::size_t j = 0; j <= std::min(i, k); ++j) {
      inner += binomial_pmf(i, j, model.p_d) * binomial_pmf(n - i, k - j, model.p_b);
    }
    total += stay * inner;
  }
  return total;
}

std::vector<double> noise_pmf(const NoiseSignalModel& model) {
  std::vector<double> out(model.bin + 1);
  for (std::size_t k = 0; k <= model.bin; ++k) out[k] = binom_noise_pmf(k, model);
  return out;
}

std::vector<double> signal_pmf(const NoiseSignalModel& model) {
  std::vector<double> out(model.bin + 1);
  for (std::size_t k = 0; k <= model.bin; ++k) out[k] = signal_bin_pmf(k, model);
  return out;
}

std::vector<BinPrediction> bin_value_distribution(double bins, const NoiseSignalModel& model,
                                                  double p_g_sigma) {
  if (!(bins >= 1)) throw std::domain_error("bin count must be >= 1");
  if (!(p_g_sigma >= 0)) throw std::domain_error("p_g sigma must be non-negative");
  const auto pn = noise_pmf(model);
  const auto pe = signal_pmf(model);
  const double lo_g = std::clamp(model.p_g - p_g_sigma, 0.0, 1.0);
  const double hi_g = std::clamp(model.p_g + p_g_sigma, 0.0, 1.0);
  std::vector<BinPrediction> rows(model.bin + 1);
  for (std::size_t k = 0; k <= model.bin; ++k) {
    const auto mix = [&](double g) { return bins * ((1.0 - g) * pn[k] + g * pe[k]); };
    const double a = mix(lo_g);
    const double b = mix(hi_g);
    rows[k] = {k, mix(model.p_g), std::min(a, b), std::max(a, b)};
  }
  return rows;
}

std::optional<GroundOccupancy> reference_ground_occupancy(double T) {
  if (std::abs(T - 300.0) < 1e-9) return GroundOccupancy{0.0042, 0.0030};
  if (std::abs(T - 450.0) < 1e-9) return GroundOccupancy{0.0020, 0.0014};
  return std::nullopt;
}

void write_bin_prediction(std::ostream& out, const std::vector<BinPrediction>& rows) {
  out << "k,predicted_count,sigma_band_low,sigma_band_high\n";
  for (const auto& r : rows) {
    out << r.k << ',' << format_double(r.predicted) << ',' << format_double(r.band_low) << ','
        << format_double(r.band_high) << '\n';
  }
}

namespace {

// Runs the run-length automaton; returns {P(longest <= x), P(longest > x)}.
std::pair<double, double> run_automaton(std::size_t n, std::size_t x, double p) {
  std::vector<double> mass(x + 1, 0.0);
  std::vector<double> next(x + 1, 0.0);
  mass[0] = 1.0;
  const double q = 1.0 - p;
  double killed = 0.0;
  for (std::size_t t = 0; t < n; ++t) {
    double alive = 0.0;
    for (double m : mass) alive += m;
    killed += p * mass[x];
    next[0] = q * alive;
    for (std::size_t r = 0; r < x; ++r) next[r + 1] = p * mass[r];
    mass.swap(next);
  }
  double alive = 0.0;
  for (double m : mass) alive += m;
  return {alive, killed};
}

}  // namespace

double longest_run_cdf(std::size_t n, std::size_t x, double p_dark) {
  require_run_arguments(n, x, p_dark);
  if (x == n) return 1.0;
  return run_automaton(n, x, p_dark).first;
}

double longest_run_tail(std::size_t n, std::size_t x, double p_dark) {
  require_run_arguments(n, x, p_dark);
  if (x == n) return 0.0;
  return run_automaton(n, x, p_dark).second;
}

double longest_run_cdf_recursive(std::size_t n, std::size_t x, double p_dark) {
  require_run_arguments(n, x, p_dark);
  if (n > kRecursionCap) throw std::domain_error("n exceeds the recursion cap");
  if (x == n) return 1.0;
  if (p_dark == 0.0) return 1.0;
  if (p_dark == 1.0) return 0.0;  // x < n here

  // counts[m][k]: strings of length m with k darks and no dark run longer than x.
  std::vector<std::vector<double>> counts(n + 1);
  for (std::size_t m = 0; m <= n; ++m) {
    counts[m].assign(m + 1, 0.0);
    if (m <= x) {
      counts[m][0] = 1.0;
      for (std::size_t k = 1; k <= m; ++k) {
        counts[m][k] = counts[m][k - 1] * static_cast<double>(m - k + 1) / static_cast<double>(k);
      }
      continue;
    }
    // Split on the leading block of j darks closed by the first bright.
    for (std::size_t k = 0; k <= m; ++k) {
      double c = 0.0;
      for (std::size_t j = 0; j <= std::min(x, k); ++j) {
        const std::size_t rest = m - 1 - j;
        if (k - j <= rest) c += counts[rest][k - j];
      }
      counts[m][k] = c;
    }
  }
  const double lp = std::log(p_dark);
  const double lq = std::log1p(-p_dark);
  double F = 0.0;
  for (std::size_t k = 0; k <= n; ++k) {
    const double c = counts[n][k];
    if (c == 0.0) continue;
    F += std::exp(std::log(c) + static_cast<double>(k) * lp + static_cast<double>(n - k) * lq);
  }
  return F;
}

std::string to_string(Method m) { return m == Method::exact ? "exact" : "extrapolated"; }

SignificanceResult significance(std::size_t n, std::size_t x, double p_dark,
                                const SignificanceOptions& options) {
  require_run_arguments(n, x, p_dark);
  SignificanceResult r;
  r.n = n;
  r.x = x;
  r.p_dark = p_dark;
  const std::size_t cap =
      options.use_recursion ? std::min(options.exact_cap, kRecursionCap) : options.exact_cap;
  if (n <= cap) {
    r.method = Method::exact;
    r.p_value = exact_p_value(n, x, p_dark, options.use_recursion);
  } else {
    // Least-squares line through exact p values over the upper half of the exact range.
    r.method = Method::extrapolated;
    const std::size_t points = std::max<std::size_t>(options.fit_points, 2);
    double sn = 0, sp = 0, snn = 0, snp = 0;
    for (std::size_t i = 0; i < points; ++i) {
      const std::size_t ni = cap / 2 + (cap - cap / 2) * i / (points - 1);
      const double pi = ni < x ? 0.0 : exact_p_value(ni, x, p_dark, options.use_recursion);
      const double nd = static_cast<double>(ni);
      sn += nd;
      sp += pi;
      snn += nd * nd;
      snp += nd * pi;
    }
    const double m = static_cast<double>(points);
    const double slope = (m * snp - sn * sp) / (m * snn - sn * sn);
    const double intercept = (sp - slope * sn) / m;
    r.p_value = intercept + slope * static_cast<double>(n);
    if (r.p_value >= 1.0) {
      r.p_value = 1.0;
      r.saturated = true;
    }
    r.p_value = std::max(r.p_value, std::numeric_limits<double>::min());
  }
  r.z = z_or_infinite(r.p_value);
  return r;
}

double p_value(std::size_t n, std::size_t x, double p_dark, const SignificanceOptions& options) {
  return significance(n, x, p_dark, options).p_value;
}

double z_from_p(double p) {
  if (!(p > 0.0 && p < 1.0)) throw std::domain_error("p must lie in (0, 1)");
  return -inverse_normal_lower(p);
}

double p_from_z(double z) { return 0.5 * std::erfc(z / std::numbers::sqrt2); }

SignificanceResult required_run_length(std::size_t n, double p_dark, double z_target,
                                       const SignificanceOptions& options) {
  for (std::size_t x = 0; x <= n; ++x) {
    SignificanceResult r = significance(n, x, p_dark, options);
    if (r.z >= z_target) return r;
  }
  throw std::domain_error("no run length reaches the target significance");
}

std::string to_json(const SignificanceResult& r) {
  nlohmann::json j;
  j["n"] = r.n;
  j["x"] = r.x;
  j["p_dark"] = r.p_dark;
  j["p_value"] = r.p_value;
  j["z"] = std::isfinite(r.z) ? nlohmann::json(r.z) : nlohmann::json(nullptr);
  j["method"] = to_string(r.method);
  if (r.saturated) j["saturated"] = true;
  return j.dump(2);
}

}  // namespace dpql::stats
