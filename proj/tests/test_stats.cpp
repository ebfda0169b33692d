#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/distributions/gamma.hpp>
#include <boost/math/special_functions/beta.hpp>
#include <gtest/gtest.h>

#include "sfperc/percolation.hpp"
#include "sfperc/stats.hpp"

using namespace sfperc;

namespace {

std::vector<double> exponential_sample(double rate, std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> out(n);
  for (auto& x : out) x = -std::log(rng.uniform()) / rate;
  return out;
}

// Atoms of a Poisson measure with intensity rate x^-2 dx, largest first:
// the inverses are partial sums of Exp(rate) variables.
std::vector<std::vector<double>> poisson_atoms(double rate, std::size_t trials, std::size_t k, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::vector<double>> out(trials);
  for (auto& row : out) {
    double s = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      s += rng.exponential(rate);
      row.push_back(1.0 / s);
    }
  }
  return out;
}

}  // namespace

TEST(LimitConstants, Examples) {
  const LimitLaw a = limit_constants(0.0, std::log(2.0));
  EXPECT_DOUBLE_EQ(a.alpha, 0.5);
  EXPECT_NEAR(a.giant_fraction, 0.70710678118654752, 1e-15);
  EXPECT_NEAR(a.intensity_const, 0.49012907173427356, 1e-15);
  EXPECT_DOUBLE_EQ(a.m1, 2.0);

  const LimitLaw b = limit_constants(1e6, 1.0);
  EXPECT_NEAR(b.alpha, 1.0, 1e-6);
  EXPECT_NEAR(b.giant_fraction, std::exp(-1.0), 1e-6);

  const LimitLaw c = limit_constants(-0.5, 3.0);
  EXPECT_NEAR(c.alpha, 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(c.giant_fraction, 0.36787944117144233, 1e-15);
  EXPECT_LT(c.alpha, a.alpha);
  EXPECT_DOUBLE_EQ(c.intensity_const, 3.0 * c.giant_fraction);
}

TEST(Kolmogorov, ExactSmallCases) {
  // n = 1: D = max(U, 1 - U), so P(D < d) = 2d - 1 on [1/2, 1].
  EXPECT_NEAR(kolmogorov_exact_cdf(1, 0.75), 0.5, 1e-12);
  EXPECT_NEAR(kolmogorov_exact_cdf(1, 0.5), 0.0, 1e-12);
  EXPECT_NEAR(kolmogorov_exact_cdf(10, 1.0), 1.0, 1e-12);
}

TEST(Kolmogorov, ExactAgreesWithAsymptotic) {
  const int n = 2000;
  for (double lambda : {0.6, 1.0, 1.36, 1.8}) {
    const double d = lambda / std::sqrt(n);
    EXPECT_NEAR(1.0 - kolmogorov_exact_cdf(n, d), kolmogorov_survival(lambda), 0.01) << lambda;
  }
  EXPECT_NEAR(kolmogorov_survival(1.3580986), 0.05, 1e-6);
}

TEST(Kolmogorov, ExactAgreesWithSimulation) {
  // Monte Carlo of D_5 under the null.
  const int n = 5;
  Rng rng(1);
  int below = 0;
  const int reps = 200'000;
  for (int r = 0; r < reps; ++r) {
    std::vector<double> u(n);
    for (auto& x : u) x = rng.uniform();
    std::sort(u.begin(), u.end());
    double d = 0.0;
    for (int i = 0; i < n; ++i) d = std::max({d, (i + 1.0) / n - u[i], u[i] - static_cast<double>(i) / n});
    below += d < 0.4;
  }
  EXPECT_NEAR(static_cast<double>(below) / reps, kolmogorov_exact_cdf(n, 0.4), 0.004);
}

TEST(KsTest, ExponentialSelfConsistency) {
  int passes = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto x = exponential_sample(2.0, 10'000, seed);
    passes += ks_test(x, ExponentialRef{2.0}).p_value >= 0.01;
  }
  EXPECT_GE(passes, 194);  // nominal 198; slack for binomial noise
}

TEST(KsTest, ConstantSampleFails) {
  const std::vector<double> x(100, 1.0);
  const auto r = ks_test(x, ExponentialRef{1.0});
  EXPECT_GE(r.statistic, 0.5);
  EXPECT_EQ(r.verdict, Verdict::kFail);
}

TEST(KsTest, GammaSelfConsistency) {
  Rng rng(3);
  std::gamma_distribution<double> g(0.5, 2.0);
  std::vector<double> x(5000);
  for (auto& v : x) v = g(rng.engine());
  EXPECT_TRUE(ks_test(x, GammaRef{0.5, 2.0}).passed());
  EXPECT_FALSE(ks_test(x, GammaRef{0.5, 3.0}).passed());
}

TEST(KsTest, TooFewSamples) {
  const auto x = exponential_sample(1.0, 19, 4);
  EXPECT_EQ(ks_test(x, ExponentialRef{1.0}).verdict, Verdict::kInconclusive);
}

TEST(KsTest, TwoSample) {
  const auto a = exponential_sample(1.0, 3000, 5);
  const auto b = exponential_sample(1.0, 3000, 6);
  const auto c = exponential_sample(1.5, 3000, 7);
  EXPECT_TRUE(ks_test(a, EmpiricalRef{b}).passed());
  EXPECT_FALSE(ks_test(a, EmpiricalRef{c}).passed());
}

TEST(ChiSquare, FairDie) {
  Rng rng(8);
  std::vector<std::uint64_t> counts(6, 0);
  for (int i = 0; i < 60'000; ++i) ++counts[rng.below(6)];
  const std::vector<double> probs(6, 1.0 / 6.0);
  EXPECT_TRUE(chi_square_test(counts, probs).passed());
  const std::vector<double> loaded{0.2, 0.16, 0.16, 0.16, 0.16, 0.16};
  EXPECT_FALSE(chi_square_test(counts, loaded).passed());
}

TEST(PoissonSpacing, PassesOnItsOwnNull) {
  const LimitLaw law = limit_constants(0.0, std::log(2.0));
  int passes = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto atoms = poisson_atoms(law.intensity_const, 500, 3, seed);
    passes += poisson_spacing_check(atoms, law, 3).passed();
  }
  EXPECT_GE(passes, 96);
}

TEST(PoissonSpacing, DetectsDoubledIntensity) {
  const LimitLaw law = limit_constants(0.0, std::log(2.0));
  const auto atoms = poisson_atoms(2.0 * law.intensity_const, 1000, 1, 9);
  EXPECT_EQ(poisson_spacing_check(atoms, law, 1).verdict, Verdict::kFail);
}

TEST(PoissonSpacing, InputValidation) {
  const LimitLaw law = limit_constants(0.0, 1.0);
  std::vector<std::vector<double>> bad(200, {1.0, 2.0});
  EXPECT_THROW(poisson_spacing_check(bad, law, 2), std::domain_error);
  std::vector<std::vector<double>> negative(200, {1.0, -1.0});
  EXPECT_THROW(poisson_spacing_check(negative, law, 2), std::domain_error);
  const auto few = poisson_atoms(1.0, 50, 2, 1);
  EXPECT_EQ(poisson_spacing_check(few, law, 2).verdict, Verdict::kInconclusive);
}

TEST(GammaRatio, MatchesIncompleteBeta) {
  // G / (G + S) is Beta(shape, i), so P(G / S <= x) = I_{x / (1 + x)}(shape, i).
  for (double shape : {0.5, 1.0 / 3.0, 0.75}) {
    for (int i : {1, 2, 3, 5}) {
      for (double x : {0.01, 0.1, 0.5, 1.0, 3.0, 20.0}) {
        EXPECT_NEAR(gamma_ratio_cdf(shape, i, x), boost::math::ibeta(shape, i, x / (1.0 + x)), 1e-8)
            << shape << " " << i << " " << x;
      }
    }
  }
  EXPECT_EQ(gamma_ratio_cdf(0.5, 1, 0.0), 0.0);
}

TEST(ClusterAgeLaw, CompositionSamplesPass) {
  const LimitLaw law = limit_constants(0.0, std::log(2.0));
  Rng rng(10);
  std::gamma_distribution<double> w(law.alpha, 2.0 + law.beta);
  for (int i : {1, 2}) {
    std::gamma_distribution<double> s(i, 1.0);
    std::vector<double> x(2000);
    for (auto& v : x) v = law.intensity_const * w(rng.engine()) / ((2.0 + law.beta) * s(rng.engine()));
    const auto r = cluster_age_check(x, law, i);
    EXPECT_TRUE(r.passed()) << i << " " << r.statistic;
  }
  const std::vector<double> few(100, 1.0);
  EXPECT_EQ(cluster_age_check(few, law, 1).verdict, Verdict::kInconclusive);
}

TEST(Ordering, EveryTrialHasExactlyK) {
  const Tree t({0, 0, 1});
  std::vector<ClusterDecomposition> ds;
  ds.push_back(decompose(t, EdgeMarks({0, 1, 0}), 0.0));
  ds.push_back(decompose(t, EdgeMarks({1, 0, 0}), 0.0));
  EXPECT_DOUBLE_EQ(age_vs_size_ordering(ds, 2, 2), 1.0);
  EXPECT_LE(age_vs_size_ordering(ds, 1, 1), 1.0);
}

TEST(Ordering, RankedOverloadAgrees) {
  std::vector<ClusterDecomposition> ds;
  std::vector<std::vector<RankedSize>> tops;
  for (std::uint64_t s = 0; s < 40; ++s) {
    Rng rng(s);
    const Tree t = grow_tree({0.0, 3000}, rng);
    ds.push_back(decompose(t, percolate(t, 0.85, rng), 0.0));
    tops.push_back(top_nonroot_clusters(ds.back(), 10));
  }
  for (std::uint32_t l : {2u, 3u, 10u}) {
    const double a = age_vs_size_ordering(ds, 2, l);
    EXPECT_DOUBLE_EQ(a, age_vs_size_ordering(std::span<const std::vector<RankedSize>>(tops), 2, l));
  }
  EXPECT_LE(age_vs_size_ordering(ds, 2, 3), age_vs_size_ordering(ds, 2, 10));
}

TEST(MeanEstimate, Basics) {
  const std::vector<double> one{3.5};
  const auto e1 = mean_estimate(one);
  EXPECT_EQ(e1.mean, 3.5);
  EXPECT_TRUE(std::isnan(e1.std_error));
  const std::vector<double> v{1, 2, 3, 4};
  EXPECT_NEAR(mean_estimate(v).std_error, std::sqrt(5.0 / 3.0 / 4.0), 1e-15);
}
