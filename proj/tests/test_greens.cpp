#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "membrane/greens.hpp"

using namespace membrane;
using namespace membrane::greens;

namespace {

// (2π)^-4 ∫ (Π cos(x_i ξ_i) − 1) / μ(ξ)² over [−π, π]^4 by the midpoint rule
// on [0, π]^4. The error expands in even powers of 1/M; two Richardson
// steps over M, 2M, 4M remove the M^-2 and M^-4 terms.
double fourier_difference(const Site& x, int M) {
  auto midpoint = [&](int m) {
    std::vector<double> s(static_cast<std::size_t>(m)), xi(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) {
      xi[std::size_t(i)] = (i + 0.5) * M_PI / m;
      s[std::size_t(i)] = 4.0 * std::pow(std::sin(0.5 * xi[std::size_t(i)]), 2);
    }
    auto c = [&](int axis, int i) { return std::cos(x[std::size_t(axis)] * xi[std::size_t(i)]); };
    double total = 0.0;
    for (int a = 0; a < m; ++a)
      for (int b = 0; b < m; ++b)
        for (int d = 0; d < m; ++d) {
          const double partial = s[std::size_t(a)] + s[std::size_t(b)] + s[std::size_t(d)];
          const double cab = c(0, a) * c(1, b) * c(2, d);
          for (int e = 0; e < m; ++e) {
            const double mu = partial + s[std::size_t(e)];
            total += (cab * c(3, e) - 1.0) / (mu * mu);
          }
        }
    return total * std::pow(M_PI / m, 4) * 16.0 / std::pow(2.0 * M_PI, 4);
  };
  const double a = midpoint(M), b = midpoint(2 * M), c = midpoint(4 * M);
  const double ab = b + (b - a) / 3.0, bc = c + (c - b) / 3.0;
  return bc + (bc - ab) / 15.0;
}

// e^{-z} I_0(z): periodic trapezoid of (1/π)∫_0^π e^{z(cos θ − 1)} dθ for
// moderate z, the classical large-argument series beyond.
double scaled_i0(double z) {
  if (z < 100.0) {
    const int m = 400;
    double s = 0.0;
    for (int k = 0; k < m; ++k) s += std::exp(z * (std::cos(M_PI * (k + 0.5) / m) - 1.0));
    return s / m;
  }
  double term = 1.0, sum = 1.0;
  for (int k = 1; k < 20; ++k) {
    term *= std::pow(2.0 * k - 1.0, 2) / (8.0 * k * z);
    sum += term;
  }
  return sum / std::sqrt(2.0 * M_PI * z);
}

// F(0) = ∫_0^∞ t [(e^{-2t} I_0(2t))^4 − (4πt)^{-2} e^{-1/(4t)}] dt, in s = log t.
double analytic_c0() {
  const double ds = 0.01, s_lo = -25.0, s_hi = 14.0;
  double total = 0.0;
  for (double s = s_lo; s <= s_hi; s += ds) {
    const double t = std::exp(s);
    const double g = scaled_i0(2.0 * t);
    const double heat = std::exp(-0.25 / t) / std::pow(4.0 * M_PI * t, 2);
    total += t * t * (std::pow(g, 4) - heat) * ds;
  }
  // Leading tail beyond T: t·(4πt)^{-2}/(2t) integrates to 1/(32π² T).
  return total + 1.0 / (32.0 * M_PI * M_PI * std::exp(s_hi));
}

std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("membrane_test_" + name + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(p);
  return p;
}

}  // namespace

TEST(Expansion, ClosedForm) {
  const double expect = -std::log(5.0) / (8 * M_PI * M_PI) + (81.0 + 256.0) / (24 * M_PI * M_PI * 15625.0);
  EXPECT_NEAR(fullspace_expansion({3, 4, 0, 0}), expect, 1e-15);
  EXPECT_NEAR(fullspace_expansion({0, -4, 3, 0}), expect, 1e-15);
  EXPECT_THROW(fullspace_expansion({0, 0, 0, 0}), PreconditionError);
}

TEST(Difference, AgainstFourierQuadrature) {
  EXPECT_EQ(fullspace_difference({0, 0, 0, 0}).value, 0.0);
  for (const Site x : {Site{1, 0, 0, 0}, Site{1, 1, 0, 0}, Site{1, 1, 1, 1}}) {
    const double oracle = fourier_difference(x, 16);
    const DifferenceValue d = fullspace_difference(x);
    EXPECT_NEAR(d.value, oracle, 5e-11) << x[0] << x[1] << x[2] << x[3];
    EXPECT_LT(d.error_estimate, 1e-11);
  }
}

TEST(Difference, HypercubicSymmetry) {
  const double a = fullspace_difference({2, -1, 0, 3}).value;
  EXPECT_NEAR(fullspace_difference({0, 3, 1, -2}).value, a, 1e-13);
  EXPECT_NEAR(fullspace_difference({-3, 0, 2, 1}).value, a, 1e-13);
}

TEST(Difference, NegativeAndIncreasingInMagnitude) {
  // F has its maximum at the origin.
  double prev = 0.0;
  for (int k = 1; k <= 6; ++k) {
    const double v = fullspace_difference({k, 0, 0, 0}).value;
    EXPECT_LT(v, prev);
    prev = v;
  }
}

TEST(Normalization, MatchesAnalyticC0) {
  const double oracle = analytic_c0();
  const FullSpaceGreen& F = default_fullspace();
  EXPECT_NEAR(F.c0(), oracle, 1e-9);
  EXPECT_LT(F.normalization().fit_rms, 1e-8);
  EXPECT_NEAR(F({0, 0, 0, 0}) - F({1, 0, 0, 0}), 0.0193666737788825, 1e-10);
}

TEST(Normalization, OrbitSizes) {
  EXPECT_EQ(greens::detail::orbit_size({0, 0, 0, 4}), 8u);
  EXPECT_EQ(greens::detail::orbit_size({1, 2, 3, 4}), 384u);
  EXPECT_EQ(greens::detail::orbit_size({0, 0, 4, 4}), 24u);
  EXPECT_EQ(greens::detail::orbit_size({4, 4, 4, 4}), 16u);
}

TEST(FullSpace, AxisResidualDecay) {
  const FullSpaceGreen& F = default_fullspace();
  auto residual = [&](int r) {
    const Site x{r, 0, 0, 0};
    return std::abs(F.evaluate(x, FullSpaceMethod::fourier_quadrature).value - fullspace_expansion(x));
  };
  EXPECT_GE(residual(8) / residual(16), 6.0);
  EXPECT_GE(residual(16) / residual(32), 6.0);
}

TEST(FullSpace, MethodSwitchAndCacheFile) {
  const auto dir = scratch_dir("fullspace");
  const FullSpaceGreen& F0 = default_fullspace();
  {
    std::filesystem::create_directories(dir);
    std::ofstream os(dir / "fullspace.json");
    os << to_json(F0.normalization()).dump(2);
  }
  const FullSpaceGreen F = FullSpaceGreen::calibrated(dir);
  EXPECT_EQ(F.c0(), F0.c0());
  EXPECT_EQ(F.evaluate({30, 0, 0, 0}).method, FullSpaceMethod::asymptotic);
  EXPECT_EQ(F.evaluate({3, 0, 0, 0}).method, FullSpaceMethod::fourier_quadrature);
  // At the crossover the two routes differ by the O(|x|^-4) remainder only.
  const Site x{24, 0, 0, 0};
  EXPECT_NEAR(F.evaluate(x, FullSpaceMethod::asymptotic).value,
              F.evaluate(x, FullSpaceMethod::fourier_quadrature).value, 1e-7);
  std::filesystem::remove_all(dir);
}

TEST(Shifted, LogShiftInR) {
  const Point x{0.5, 0.5, 0.5, 0.5}, y{0.25, 0.5, 0.5, 0.5};
  const double h = 1.0 / 16;
  const double a = shifted_fullspace(x, y, h, 0.2), b = shifted_fullspace(x, y, h, 0.4);
  EXPECT_NEAR(b - a, std::log(2.0) / kLambdaSquared, 1e-14);
  EXPECT_THROW(shifted_fullspace({0.51, 0.5, 0.5, 0.5}, y, h, 0.2), PreconditionError);
  EXPECT_NEAR(continuous_fullspace(x, y, 0.25), 0.0, 1e-15);
  EXPECT_THROW(continuous_fullspace(x, x, 0.25), PreconditionError);
}

TEST(Shifted, DiscreteApproachesContinuousFarOut) {
  // Far out F is the expansion, so the two differ by its anisotropic term.
  const double h = 1.0 / 64, r = 0.5;
  const Point x{0.75, 0.5, 0.5, 0.5}, y{0.25, 0.5, 0.5, 0.5};
  const double d = shifted_fullspace(x, y, h, r) - continuous_fullspace(x, y, r);
  EXPECT_NEAR(d, 1.0 / (24 * M_PI * M_PI * 32.0 * 32.0), 1e-7);
}

TEST(Column, MatchesDenseFactorization) {
  for (int n : {4, 6}) {
    const GridSpec g(n);
    for (const Site s : {g.center(), Site{1, 2, n / 2, 1}}) {
      const GreenColumn col = solve_green_column(g, s, 1e-12);
      ASSERT_TRUE(col.converged);
      const Field dense = dense_green_column(g, s);
      double scale = 0.0, worst = 0.0;
      for (std::size_t k = 0; k < g.site_count(); ++k) {
        scale = std::max(scale, std::abs(dense.values()[k]));
        worst = std::max(worst, std::abs(dense.values()[k] - col.values.values()[k]));
      }
      EXPECT_LE(worst / scale, 1e-8) << "n=" << n;
    }
  }
}

TEST(Column, SymmetricAndPositiveOnDiagonal) {
  const GridSpec g(8);
  const Site a{4, 4, 4, 4}, b{2, 5, 3, 6};
  const GreenColumn ca = solve_green_column(g, a, 1e-12), cb = solve_green_column(g, b, 1e-12);
  EXPECT_NEAR(ca(b), cb(a), 1e-10 * ca(a));
  EXPECT_GT(ca(a), 0.0);
  EXPECT_GT(ca(a), ca(b));
}

TEST(Column, RejectsBadSource) {
  EXPECT_THROW(solve_green_column(GridSpec(4), {5, 0, 0, 0}, 1e-8), PreconditionError);
  EXPECT_THROW(solve_green_column(GridSpec(4), {2, 2, 2, 2}, 0.0), PreconditionError);
  EXPECT_THROW(dense_green_column(GridSpec(8), {4, 4, 4, 4}), PreconditionError);
}

TEST(Cache, RoundTripAndTolerancePolicy) {
  const auto dir = scratch_dir("cache");
  const GreenCache cache(dir);
  const GridSpec g(4);
  const Site s{2, 2, 1, 2};
  EXPECT_FALSE(cache.load(g, s, 1e-8));
  const GreenColumn loose = green_column(g, s, 1e-6, &cache);
  ASSERT_TRUE(cache.load(g, s, 1e-6));
  EXPECT_FALSE(cache.load(g, s, 1e-10));  // not tight enough
  const GreenColumn tight = green_column(g, s, 1e-11, &cache);
  const auto hit = cache.load(g, s, 1e-6);
  ASSERT_TRUE(hit);
  EXPECT_EQ(hit->tolerance, 1e-11);
  for (std::size_t k = 0; k < g.site_count(); ++k) EXPECT_EQ(hit->values.values()[k], tight.values.values()[k]);
  // A looser store never replaces a tighter entry.
  cache.store(loose);
  EXPECT_EQ(cache.load(g, s, 1e-6)->tolerance, 1e-11);
  EXPECT_EQ(cache.hashes(g).size(), 1u);
  EXPECT_TRUE(cache.hashes(GridSpec(6)).empty());
  std::filesystem::remove_all(dir);
}

TEST(Cache, CorruptFileIsIgnored) {
  const auto dir = scratch_dir("corrupt");
  const GreenCache cache(dir);
  const GridSpec g(4);
  const Site s{2, 2, 2, 2};
  green_column(g, s, 1e-8, &cache);
  {
    std::fstream f(cache.grid_dir(g) / ("col_" + GreenCache::key(s) + ".mbf"),
                   std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(40);
    f.put('\x7f');
  }
  EXPECT_FALSE(cache.load(g, s, 1e-8));
  EXPECT_TRUE(green_column(g, s, 1e-8, &cache).converged);
  std::filesystem::remove_all(dir);
}

TEST(Cache, ParallelColumnsAgreeWithSerial) {
  const GridSpec g(6);
  const std::vector<Site> sources{{3, 3, 3, 3}, {1, 3, 3, 3}, {2, 2, 4, 1}};
  const auto cols = green_columns(g, sources, 1e-10);
  for (std::size_t i = 0; i < sources.size(); ++i) {
    const auto one = solve_green_column(g, sources[i], 1e-10);
    EXPECT_EQ(cols[i].values.values()[0], one.values.values()[0]);
    EXPECT_EQ(cols[i](sources[i]), one(sources[i]));
  }
}
