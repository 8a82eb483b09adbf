#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace dpql::stats {

/// Dark-count model for one bin of consecutive measurements.
struct NoiseSignalModel {
  double p_b = 0.03;    // dark probability when J != 3/2
  double p_d = 0.72;    // dark probability when J = 3/2
  double p_s = 0.015;   // per-cycle probability of leaving J = 3/2
  double p_g = 0.0047;  // thermal probability of J = 3/2
  std::size_t bin = 20;

  void validate() const;
};

/// Binomial probability C(n, k) q^k (1 - q)^(n - k); zero outside 0 <= k <= n.
double binomial_pmf(std::size_t n, std::size_t k, double q);

/// Dark-count pmf of a bin recorded entirely away from J = 3/2.
double binom_noise_pmf(std::size_t k, const NoiseSignalModel& model);

/// Dark-count pmf of a bin that opens in J = 3/2. The molecule stays for i
/// cycles (geometric in p_s, truncated at the bin length), producing darks at
/// p_d while it stays and at p_b for the rest of the bin.
double signal_bin_pmf(std::size_t k, const NoiseSignalModel& model);

std::vector<double> noise_pmf(const NoiseSignalModel& model);
std::vector<double> signal_pmf(const NoiseSignalModel& model);

struct BinPrediction {
  std::size_t k = 0;
  double predicted = 0.0;
  double band_low = 0.0;
  double band_high = 0.0;
};

/// Expected number of bins with k darks among `bins` bins:
/// bins * ((1 - p_g) p_n(k) + p_g p_e(k)). The band evaluates the same
/// expression at p_g -+ p_g_sigma (clipped to [0, 1]) and reports the lower
/// and upper of the two.
std::vector<BinPrediction> bin_value_distribution(double bins, const NoiseSignalModel& model,
                                                  double p_g_sigma = 0.0);

/// Ground-level occupancy with its trial-to-trial spread.
struct GroundOccupancy {
  double mean = 0.0;
  double sigma = 0.0;
};

/// Monte Carlo occupancies quoted for the two operating temperatures
/// (300 K and 450 K); empty for any other temperature.
std::optional<GroundOccupancy> reference_ground_occupancy(double T);

/// CSV with header `k,predicted_count,sigma_band_low,sigma_band_high`.
void write_bin_prediction(std::ostream& out, const std::vector<BinPrediction>& rows);

/// P(longest dark run in n Bernoulli(p_dark) trials <= x), via a run-length
/// automaton in O(n x).
double longest_run_cdf(std::size_t n, std::size_t x, double p_dark);

/// P(longest dark run > x) accumulated directly, so it keeps full relative
/// precision when it is far below machine epsilon relative to one.
double longest_run_tail(std::size_t n, std::size_t x, double p_dark);

/// Largest n accepted by longest_run_cdf_recursive.
inline constexpr std::size_t kRecursionCap = 1000;

/// Same distribution through the combinatorial recursion over the number of
/// strings of length m with k darks and no run longer than x:
/// C(m, k) = sum_{j=0..x} C(m - 1 - j, k - j), with C(m, k) = binom(m, k) for m <= x.
double longest_run_cdf_recursive(std::size_t n, std::size_t x, double p_dark);

enum class Method { exact, extrapolated };
std::string to_string(Method m);

struct SignificanceResult {
  std::size_t n = 0;
  std::size_t x = 0;
  double p_dark = 0.0;
  double p_value = 1.0;
  double z = 0.0;
  Method method = Method::exact;
  /// Extrapolated p reached one and was clipped.
  bool saturated = false;
};

struct SignificanceOptions {
  /// Largest n evaluated exactly; beyond it p is extrapolated linearly in n.
  std::size_t exact_cap = 10'000'000;
  /// Use the combinatorial recursion (capped at kRecursionCap) instead of the automaton.
  bool use_recursion = false;
  /// Number of exact points in the linear fit.
  std::size_t fit_points = 20;
};

/// p = 1 - F(n, x, p_dark) and the matching one-sided significance.
SignificanceResult significance(std::size_t n, std::size_t x, double p_dark,
                                const SignificanceOptions& options = {});

double p_value(std::size_t n, std::size_t x, double p_dark,
               const SignificanceOptions& options = {});

/// One-sided Gaussian significance Z with p = P(N(0,1) > Z); p in (0, 1).
double z_from_p(double p);

/// Upper-tail probability of the standard normal at z.
double p_from_z(double z);

/// Smallest longest-run length whose significance reaches `z_target`.
SignificanceResult required_run_length(std::size_t n, double p_dark, double z_target,
                                       const SignificanceOptions& options = {});

/// JSON object {n, x, p_dark, p_value, z, method}.
std::string to_json(const SignificanceResult& r);

}  // namespace dpql::stats
