#include <gtest/gtest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "ehlab/limiting_dist.hpp"
#include "oracles.hpp"

using namespace ehlab;
using ehlab::testing::bisect;
using ehlab::testing::simpson;

namespace {

// Nonzero root of lambda e^{sM} = lambda + s found by bracketing on the side
// selected by delta.
double root_oracle(double rate, double m) {
  auto f = [=](double s) { return rate * std::exp(s * m) - rate - s; };
  if (rate * m > 1) return bisect(f, -rate * (1 - 1e-15), -1e-14);
  return bisect(f, 1e-14, 50.0 / m);
}

std::vector<double> grid_on(double lo, double hi, int n) {
  std::vector<double> g;
  for (int i = 0; i < n; ++i) g.push_back(lo + (hi - lo) * (i + 0.5) / n);
  return g;
}

}  // namespace

TEST(InfiniteExact, ExponentMatchesRootFinder) {
  const double p = infinite_exponent(1.0, 2.0);
  EXPECT_NEAR(p, root_oracle(1.0, 2.0), 1e-12);
  EXPECT_NEAR(p, -0.7968, 5e-5);
  EXPECT_LT(std::abs(std::exp(2.0 * p) - (1.0 + p)), 1e-12);
}

TEST(InfiniteExact, RegimeError) {
  EXPECT_THROW(infinite_exact(1.0, 0.8), RegimeError);
  EXPECT_THROW(infinite_exact(1.0, 1.0), RegimeError);
}

TEST(InfiniteExact, ExponentVanishesTowardsUnitDelta) {
  EXPECT_GT(infinite_exponent(1.0, 1.0 + 1e-6), -1e-5);
  EXPECT_LT(infinite_exponent(1.0, 1.0 + 1e-6), 0.0);
}

TEST(InfiniteExact, UnitMassAndResidual) {
  for (double m : {1.2, 2.0, 3.0}) {
    const auto dist = infinite_exact(1.0, m);
    EXPECT_NEAR(dist.mass(), 1.0, 1e-10);
    const double r = integral_residual(dist, HarvestModel::exponential(1.0), m, grid_on(0.0, 6 * m, 40));
    EXPECT_LT(r, 1e-10) << "M=" << m;
  }
}

TEST(Exponent, FixedPointIdentityAndSign) {
  for (double delta : {0.2, 0.5, 0.8, 1.0, 1.2, 2.0, 3.0}) {
    const double rate = 0.7, m = delta / rate;
    const double d = normalized_exponent(delta) / m;
    EXPECT_LT(std::abs(rate * std::exp(d * m) - (rate + d)), 1e-10) << delta;
    if (delta != 1.0) {
      EXPECT_NEAR(d, root_oracle(rate, m), 1e-9 * std::max(1.0, std::abs(d)));
    }
    EXPECT_EQ(d > 0, delta < 1.0);
    EXPECT_EQ(d < 0, delta > 1.0);
  }
  EXPECT_EQ(normalized_exponent(1.0), 0.0);
}

TEST(Exponent, QuadratureIdentity) {
  for (double delta : {0.3, 0.5, 0.9, 1.0, 1.5, 2.5}) {
    const double rate = 1.0, m = delta / rate, d = normalized_exponent(delta) / m;
    const double v = simpson([&](double x) { return std::exp(d / rate * x); }, 0.0, delta, 2000);
    EXPECT_NEAR(v, 1.0, 1e-10) << delta;
  }
}

TEST(FiniteExact, AtomMatchesHighPrecisionReference) {
  // 40-digit evaluation of the closed form for lambda = M = 1, K = 4
  EXPECT_NEAR(exact_atom(1.0, 1.0, 4.0), 0.115385443186, 1e-11);
}

TEST(FiniteExact, TopSectionIsPureExponential) {
  const double rate = 1.3, m = 1.0, k = 3.5;
  const auto dist = finite_exact(rate, m, k);
  for (double x : {2.6, 3.0, 3.49})
    EXPECT_NEAR(dist.density(x), dist.atom() * rate * std::exp(-rate * (x - k)), 1e-12);
}

TEST(FiniteExact, SegmentsFollowSections) {
  const auto dist = finite_exact(1.0, 1.0, 3.4);
  ASSERT_EQ(dist.segments().size(), 4u);
  const std::vector<double> lo{0.0, 0.4, 1.4, 2.4};
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(dist.segments()[i].lo, lo[i], 1e-12);
  EXPECT_EQ(dist.support(), LimitingDistribution::Support::interval);
}

TEST(FiniteExact, MassAndResidualAcrossRegimes) {
  const auto harvest = HarvestModel::exponential(1.0);
  for (double delta : {0.5, 1.0, 2.0})
    for (double l : {3.0, 4.0, 7.0, 5.5}) {
      const double m = delta, k = l * m;
      const auto dist = finite_exact(1.0, m, k);
      EXPECT_NEAR(dist.mass(), 1.0, 1e-9);
      double by_simpson = dist.atom();
      for (const auto& seg : dist.segments()) by_simpson += simpson(seg.density, seg.lo, seg.hi, 2000);
      EXPECT_NEAR(by_simpson, 1.0, 1e-10);
      EXPECT_LT(integral_residual(dist, harvest, m, grid_on(0.0, k, 60)), 1e-8) << delta << " " << l;
      for (double x : grid_on(0.0, k, 200)) EXPECT_GE(dist.density(x), 0.0);
    }
}

TEST(FiniteExact, LargeCapacityStaysAccurate) {
  const auto dist = finite_exact(1.0, 0.7, 0.7 * 60);
  EXPECT_NEAR(dist.mass(), 1.0, 1e-9);
}

TEST(FiniteExact, AtomDecreasesInCapacity) {
  for (double delta : {0.5, 1.0, 2.0}) {
    double prev = 1.0;
    for (double l = 1.0; l <= 12.0; l += 0.25) {
      const double a = exact_atom(1.0, delta, l * delta);
      EXPECT_LT(a, prev) << delta << " " << l;
      prev = a;
    }
  }
}

TEST(IntegralResidual, DetectsWrongDensity) {
  const double m = 2.0, k = 8.0, atom = 0.2;
  LimitingDistribution wrong(Capacity::finite(k), {{0.0, k, [&](double) { return (1 - atom) / k; }}}, atom);
  EXPECT_GT(integral_residual(wrong, HarvestModel::exponential(1.0), m, grid_on(0.0, k, 40)), 1e-2);
}

TEST(FiniteApprox, ExponentBranches) {
  EXPECT_EQ(finite_approx(1.0, 1.0, 4.0).params.d, 0.0);
  const auto a2 = finite_approx(1.0, 2.0, 8.0);
  EXPECT_NEAR(a2.params.d, -0.7968, 5e-5);
  EXPECT_EQ(a2.params.branch, WBranch::principal);
  const auto a05 = finite_approx(1.0, 0.5, 2.0);
  EXPECT_NEAR(a05.params.d, 2.512, 1e-3);
  EXPECT_NEAR(std::exp(a05.params.d * 0.5), 1 + a05.params.d, 1e-10);
  EXPECT_EQ(a05.params.branch, WBranch::minus_one);
}

TEST(FiniteApprox, UnitMassAndAtomRange) {
  for (double delta : {0.5, 0.9, 1.0, 1.1, 2.0})
    for (double l : {2.0, 3.0, 4.5, 10.0}) {
      const auto r = finite_approx(1.0, delta, l * delta);
      EXPECT_NEAR(r.dist.mass(), 1.0, 1e-9) << delta << " " << l;
      EXPECT_GT(r.params.atom, 0.0);
      EXPECT_LT(r.params.atom, 1.0);
      EXPECT_EQ(r.tight, l >= 3.0);
      EXPECT_NEAR(r.params.c, r.params.atom * r.params.sigma1, 1e-12 * r.params.c);
    }
}

TEST(FiniteApprox, RejectsShortBuffer) { EXPECT_THROW(finite_approx(1.0, 1.0, 1.5, 2), PreconditionError); }

TEST(FiniteApprox, TopSectionsAreRescaledExact) {
  const auto exact = finite_exact(1.0, 1.0, 5.0);
  const auto approx = finite_approx(1.0, 1.0, 5.0);
  const double s = approx.params.atom / exact.atom();
  for (double x : {3.2, 3.9, 4.5}) EXPECT_NEAR(approx.dist.density(x), s * exact.density(x), 1e-12);
}

TEST(ApproxError, MatchesDirectSubtraction) {
  for (double delta : {0.5, 1.0, 1.7})
    for (double l : {3.0, 4.0, 6.0}) {
      const double m = delta, k = l * delta;
      const auto exact = finite_exact(1.0, m, k);
      const auto approx = finite_approx(1.0, m, k);
      for (const auto& e : approx_error_profile(1.0, m, k, 2, grid_on(0.0, m, 25))) {
        const double direct = exact.density(e.x) - approx.dist.density(e.x);
        EXPECT_NEAR(e.error, direct, 1e-9) << delta << " " << l << " " << e.x;
        EXPECT_NEAR(e.relative, direct / exact.density(e.x), 1e-9);
      }
    }
}

TEST(ApproxError, BoundsForThreeAndFourSections) {
  double worst3 = 0, worst4 = 0;
  for (int i = 5; i <= 20; ++i) {
    const double m = i / 10.0;
    for (const auto& e : approx_error_profile(1.0, m, 3 * m, 2, grid_on(0.0, m, 50)))
      worst3 = std::max(worst3, std::abs(e.relative));
    for (const auto& e : approx_error_profile(1.0, m, 4 * m, 2, grid_on(0.0, m, 50)))
      worst4 = std::max(worst4, std::abs(e.relative));
  }
  EXPECT_LT(worst3, 0.083);
  EXPECT_LT(worst4, 0.014);
  EXPECT_GT(worst3, worst4);
}

TEST(ApproxError, RequiresIntegerRatio) {
  EXPECT_THROW(approx_error_profile(1.0, 1.0, 3.5, 2, {0.5}), PreconditionError);
}

TEST(IntegralEquation, AgreesWithExactLaw) {
  const auto harvest = HarvestModel::exponential(1.0);
  for (auto [delta, l] : {std::pair{1.0, 4.0}, {0.7, 7.0}, {2.0, 3.0}}) {
    const double m = delta, k = l * m;
    const auto exact = finite_exact(1.0, m, k);
    const auto num = solve_integral_equation(harvest, m, k, 2000);
    EXPECT_NEAR(num.mass(), 1.0, 1e-8);
    double peak = 0, diff = 0;
    for (const auto& s : num.segments()) {
      const double x = 0.5 * (s.lo + s.hi);
      peak = std::max(peak, exact.density(x));
      diff = std::max(diff, std::abs(exact.density(x) - s.density(x)));
    }
    EXPECT_LT(diff, 5e-3 * peak) << delta;
    EXPECT_NEAR(num.atom(), exact.atom(), 1e-5) << delta;
  }
}

TEST(IntegralEquation, GeneralHarvestLaw) {
  // Gamma(2) harvest with unit mean
  auto pdf = [](double x) { return 4 * x * std::exp(-2 * x); };
  auto ccdf = [](double x) { return (1 + 2 * x) * std::exp(-2 * x); };
  const auto harvest = HarvestModel::custom(pdf, ccdf, 1.0);
  const auto num = solve_integral_equation(harvest, 0.8, 3.2, 800);
  EXPECT_NEAR(num.mass(), 1.0, 1e-8);
  EXPECT_GT(num.atom(), 0.0);
  EXPECT_LT(integral_residual(num, harvest, 0.8, grid_on(0.0, 3.2, 50)), 10.0 / 800);
}

TEST(IntegralEquation, RejectsBoundedHarvest) {
  auto pdf = [](double x) { return x < 1 ? 1.0 : 0.0; };
  auto ccdf = [](double x) { return x < 1 ? 1 - x : 0.0; };
  EXPECT_THROW(solve_integral_equation(HarvestModel::custom(pdf, ccdf, 0.5), 0.3, 2.0, 100), PreconditionError);
}

TEST(Csv, ExportEndsWithAtom) {
  std::ostringstream os;
  write_distribution_csv(os, finite_exact(1.0, 1.0, 3.0), 30);
  const std::string s = os.str();
  EXPECT_EQ(s.rfind("x,density\n", 0), 0u);
  EXPECT_NE(s.find("atom_at_K,0.1"), std::string::npos);
  std::ostringstream inf;
  write_distribution_csv(inf, infinite_exact(1.0, 2.0), 30);
  EXPECT_NE(inf.str().find("atom_at_K,0\n"), std::string::npos);
}
