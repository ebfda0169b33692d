#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "sfperc/percolation.hpp"
#include "sfperc/report.hpp"

namespace sfperc {

// Constants of the supercritical limit law at (beta, c).
struct LimitLaw {
  double beta = 0.0;
  double c = 0.0;
  double alpha = 0.5;            // (1 + beta) / (2 + beta)
  double giant_fraction = 1.0;   // exp(-alpha c)
  double intensity_const = 0.0;  // c exp(-alpha c)
  double m1 = 2.0;               // 2 + beta
};

LimitLaw limit_constants(double beta, double c);

inline constexpr double kDefaultLevel = 0.01;

// ---------------------------------------------------------------------------
// Kolmogorov-Smirnov

struct ExponentialRef {
  double rate;
};
struct GammaRef {
  double shape;
  double scale;
};
struct EmpiricalRef {
  std::vector<double> samples;
};
using KsReference = std::variant<ExponentialRef, GammaRef, EmpiricalRef>;

// P(D_n < d) for the one-sample statistic, exact (Marsaglia, Tsang & Wang).
double kolmogorov_exact_cdf(int n, double d);
// P(K > lambda) for the limiting Kolmogorov distribution.
double kolmogorov_survival(double lambda);
// One-sample p-value: exact below 35 samples, asymptotic otherwise.
double ks_p_value(std::size_t n, double d);

// sup |F_n - F| of the sample against a continuous CDF.
double ks_statistic(std::span<const double> samples, const std::function<double(double)>& cdf);

StatReport ks_test(std::span<const double> samples, const KsReference& reference, double level = kDefaultLevel);
StatReport ks_test_cdf(std::span<const double> samples, const std::function<double(double)>& cdf,
                       std::string reference_name, double level = kDefaultLevel);

// Pearson goodness of fit of observed counts to cell probabilities.
StatReport chi_square_test(std::span<const std::uint64_t> observed, std::span<const double> probs,
                           double level = kDefaultLevel);

// ---------------------------------------------------------------------------
// Limit-law checks

// scaled_sizes holds, per trial, the largest non-root cluster sizes times
// (ln n) / n in decreasing order. Tests each of the first k spacings of the
// inverses against Exp(intensity_const) with a Bonferroni-corrected level.
StatReport poisson_spacing_check(std::span<const std::vector<double>> scaled_sizes, const LimitLaw& law,
                                 std::size_t k, double level = kDefaultLevel);

// Fraction of trials whose k largest non-root clusters all have birth rank <= l.
double age_vs_size_ordering(std::span<const ClusterDecomposition> decomps, std::size_t k, std::uint32_t l);
// Same, from per-trial non-root clusters already sorted largest first.
double age_vs_size_ordering(std::span<const std::vector<RankedSize>> largest_first, std::size_t k,
                            std::uint32_t l);

// P(G / S_i <= x) with G ~ Gamma(shape, 1) independent of S_i ~ Gamma(i, 1),
// by adaptive Gauss-Kronrod quadrature over S_i.
double gamma_ratio_cdf(double shape, int i, double x);

// Law of c exp(-alpha c) W' / ((2 + beta) S_i) with W' ~ Gamma(alpha, scale 2 + beta).
double cluster_age_law_cdf(const LimitLaw& law, int i, double x);

// Size of the i-th oldest cluster of generation one, if there are i of them.
std::optional<std::uint32_t> generation1_cluster_size(const ClusterDecomposition& decomp, int i);

// KS test of (ln n / n) times the i-th generation-one cluster size against
// cluster_age_law_cdf. Fewer than 500 samples is inconclusive.
StatReport cluster_age_check(std::span<const double> rescaled_sizes, const LimitLaw& law, int i,
                              double level = kDefaultLevel);
StatReport cluster_age_check(std::span<const ClusterDecomposition> decomps, const LimitLaw& law, int i,
                              double level = kDefaultLevel);

// Sample mean and standard error; the error is NaN with fewer than two values.
struct MeanEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t count = 0;
};
MeanEstimate mean_estimate(std::span<const double> values);

}  // namespace sfperc
