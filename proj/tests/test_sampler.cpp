#include <gtest/gtest.h>

#include <cmath>

#include "membrane/greens.hpp"
#include "membrane/sampler.hpp"

using namespace membrane;
using namespace membrane::sampler;
using lattice::Field;
using lattice::GridSpec;
using lattice::Site;

TEST(Normal, MomentsAndDeterminism) {
  double s = 0, ss = 0, s4 = 0;
  const int m = 200000;
  for (int k = 0; k < m; ++k) {
    const double z = normal(11, 0, std::uint64_t(k));
    s += z;
    ss += z * z;
    s4 += z * z * z * z;
  }
  EXPECT_NEAR(s / m, 0.0, 4.0 / std::sqrt(double(m)));
  EXPECT_NEAR(ss / m, 1.0, 4.0 * std::sqrt(2.0 / m));
  EXPECT_NEAR(s4 / m, 3.0, 0.1);
  EXPECT_EQ(normal(5, 2, 7), normal(5, 2, 7));
  EXPECT_NE(normal(5, 2, 7), normal(5, 3, 7));
  EXPECT_NE(normal(5, 2, 7), normal(6, 2, 7));
}

TEST(Transpose, MatchesDilatedLaplacian) {
  // <A^T ξ, u> = <ξ, Δ1 u> with Δ1 u living on [-1, n+1]^4.
  const GridSpec g(4);
  const std::size_t side = std::size_t(g.n()) + 3;
  std::vector<double> xi(side * side * side * side);
  for (std::size_t k = 0; k < xi.size(); ++k) xi[k] = normal(1, 0, k);
  const Field u = Field::from_function(g, [&](const Site& v) { return normal(2, 0, g.index(v)); });
  std::vector<double> at(g.site_count());
  solver::BoxBilaplacian op(g);
  op.apply_transpose_dilated(xi, at);
  double lhs = 0.0;
  for (std::size_t k = 0; k < at.size(); ++k) lhs += at[k] * u.values()[k];
  const Field lu = lattice::apply_stencil(u, lattice::laplacian_stencil());
  double rhs = 0.0;
  for (std::size_t k = 0; k < xi.size(); ++k) {
    Site v{};
    std::size_t r = k;
    for (int a = 3; a >= 0; --a) {
      v[std::size_t(a)] = int(r % side) - 1;
      r /= side;
    }
    rhs += xi[k] * lu(v);
  }
  EXPECT_NEAR(lhs, rhs, 1e-10 * std::abs(rhs));
}

TEST(Sample, ReproducibleAndSeedSensitive) {
  const GridSpec g(6);
  const auto a = sample_field(g, 42, 1e-8, 3), b = sample_field(g, 42, 1e-8, 3), c = sample_field(g, 43, 1e-8, 3);
  for (std::size_t k = 0; k < g.site_count(); ++k) EXPECT_EQ(a.field.values()[k], b.field.values()[k]);
  bool differs = false;
  for (std::size_t k = 0; k < g.site_count(); ++k) differs |= a.field.values()[k] != c.field.values()[k];
  EXPECT_TRUE(differs);
  EXPECT_THROW(sample_field(g, 1, 0.0), PreconditionError);
}

TEST(Sample, BatchMatchesSingleDraws) {
  const GridSpec g(4);
  const auto batch = sample_batch(g, 9, 5, 1e-8, true);
  ASSERT_EQ(batch.count(), 5u);
  ASSERT_EQ(batch.fields.size(), 5u);
  const auto third = sample_field(g, 9, 1e-8, 2);
  EXPECT_EQ(batch.fields[2].values()[17], third.field.values()[17]);
  EXPECT_EQ(batch.samples[2].index, 2u);
  EXPECT_EQ(batch.samples[2].max, extremes::field_max(third.field).value);
  EXPECT_THROW(sample_batch(g, 9, 0), PreconditionError);
  EXPECT_LE(batch.worst_residual, 1e-8);
}

TEST(Sample, CovarianceMatchesGreenFunction) {
  const GridSpec g(8);
  const Site c = g.center(), y{3, 4, 5, 4};
  const int draws = 2000;
  const auto batch = sample_batch(g, 2024, draws, 1e-8, true);
  double mc = 0, my = 0, vc = 0, cov = 0;
  for (const auto& f : batch.fields) {
    mc += f(c);
    my += f(y);
  }
  mc /= draws;
  my /= draws;
  for (const auto& f : batch.fields) {
    vc += (f(c) - mc) * (f(c) - mc);
    cov += (f(c) - mc) * (f(y) - my);
  }
  vc /= draws - 1;
  cov /= draws - 1;
  const auto col = greens::solve_green_column(g, c, 1e-12);
  const double gcc = col(c), gcy = col(y);
  // Centred field: mean within three standard errors.
  EXPECT_LT(std::abs(mc), 3.0 * std::sqrt(gcc / draws));
  // Variance estimator has relative s.e. √(2/draws) ≈ 3%.
  EXPECT_NEAR(vc / gcc, 1.0, 0.10);
  EXPECT_NEAR(cov / gcy, 1.0, 0.15);
}
