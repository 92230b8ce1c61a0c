#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "membrane/extremes.hpp"
#include "membrane/sampler.hpp"

using namespace membrane;
using namespace membrane::extremes;
using lattice::Field;
using lattice::GridSpec;

namespace {

std::vector<double> gumbel(std::size_t count, double scale, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> out(count);
  for (auto& v : out) v = -scale * std::log(-std::log(u(rng)));
  return out;
}

SampleBatch synthetic_batch(int n, const std::vector<double>& maxima) {
  SampleBatch b;
  b.grid = GridSpec(n);
  for (std::size_t i = 0; i < maxima.size(); ++i) b.samples.push_back({i, maxima[i], {}, 1.0});
  return b;
}

}  // namespace

TEST(Centering, HighPrecisionValues) {
  // Reference digits from a 30-digit mpmath evaluation.
  EXPECT_NEAR(centering(3), 0.344086086321465, 1e-14);
  EXPECT_NEAR(centering(4), 0.421776653908288, 1e-14);
  EXPECT_NEAR(centering(16), 0.821678679184969, 1e-14);
  EXPECT_NEAR(centering(100), 1.374724377845146, 1e-14);
  EXPECT_THROW(centering(2), PreconditionError);
}

TEST(Centering, SquaringIdentity) {
  for (int n : {3, 5, 17, 40}) {
    const double l = std::log(double(n));
    const double defect = centering(n * n) - 2.0 * centering(n) -
                          3.0 / (16.0 * M_PI) * (2.0 * std::log(l) - std::log(2.0 * l));
    EXPECT_NEAR(defect, 0.0, 1e-14) << n;
  }
}

TEST(ZStatistic, ClosedForms) {
  const GridSpec g(8);
  const double l = std::log(8.0);
  EXPECT_NEAR(z_statistic(Field(g)), std::sqrt(8.0) * std::pow(9.0, 4) * l * std::pow(8.0, -8), 1e-15);
  const Field level = Field::from_function(g, [&](const lattice::Site&) { return l / M_PI; });
  EXPECT_NEAR(z_statistic(level), 0.0, 1e-12);
}

// At these sizes Z_N is not yet positive in 99% of draws (about 86% at n=8,
// 94% at n=16). What must hold exactly: a negative Z_N needs some site with
// πψ > log n. And positivity should improve with n.
TEST(ZStatistic, SignOnSampledFields) {
  double fraction[2];
  int k = 0;
  for (int n : {8, 16}) {
    const auto batch = sampler::sample_batch(GridSpec(n), 5, 400);
    int positive = 0;
    for (const auto& s : batch.samples) {
      positive += s.z > 0.0;
      if (s.z < 0.0) {
        EXPECT_GT(M_PI * s.max, std::log(double(n)));
      }
    }
    fraction[k++] = positive / 400.0;
  }
  EXPECT_GT(fraction[1], fraction[0]);
  EXPECT_GT(fraction[1], 0.9);
}

TEST(Maximum, TiesAndRecentring) {
  const GridSpec g(4);
  Field f(g);
  f.at({1, 2, 3, 0}) = 2.0;
  f.at({0, 3, 0, 0}) = 2.0;
  const FieldMax m = field_max(f);
  EXPECT_EQ(m.value, 2.0);
  EXPECT_EQ(m.site, (lattice::Site{0, 3, 0, 0}));
  const auto zero = synthetic_batch(4, {0.0});
  EXPECT_DOUBLE_EQ(recentred_max(zero)[0], -centering(4));
  EXPECT_THROW(recentred_max(synthetic_batch(4, {})), PreconditionError);
}

TEST(TailSlope, GumbelSynthetic) {
  EXPECT_NEAR(tail_slope(gumbel(4000, 1.0, 1)), -1.0, 0.3);
  const double s = tail_slope(gumbel(4000, 1.0 / (8.0 * M_PI), 2));
  EXPECT_NEAR(s / (-8.0 * M_PI), 1.0, 0.3);
  EXPECT_THROW(tail_slope(std::vector<double>(200, 1.5)), PreconditionError);
  EXPECT_THROW(tail_slope(gumbel(99, 1.0, 3)), PreconditionError);
}

TEST(Ks, KnownValues) {
  EXPECT_EQ(ks_distance({1, 2, 3}, {1, 2, 3}), 0.0);
  EXPECT_EQ(ks_distance({1, 2, 3}, {4, 5}), 1.0);
  EXPECT_NEAR(ks_distance({1, 2, 3, 4}, {2.5, 3.5}), 0.5, 1e-15);
  // Same law: distance shrinks like n^-1/2.
  EXPECT_LT(ks_distance(gumbel(2000, 1.0, 4), gumbel(2000, 1.0, 5)), 0.06);
  EXPECT_THROW(ks_distance({}, {1.0}), PreconditionError);
}

TEST(Quantile, Interpolation) {
  const std::vector<double> v{0, 1, 2, 3, 4};
  EXPECT_DOUBLE_EQ(quantile(v, 0.5), 2.0);
  EXPECT_DOUBLE_EQ(quantile(v, 0.3), 1.2);
  EXPECT_DOUBLE_EQ(quantile(v, 1.0), 4.0);
}

TEST(Report, ConsecutiveLevels) {
  const auto a = synthetic_batch(16, gumbel(300, 0.05, 6));
  const auto b = synthetic_batch(32, gumbel(300, 0.05, 7));
  const auto r = extremes_report({a, b});
  ASSERT_EQ(r.levels.size(), 2u);
  ASSERT_EQ(r.ks_consecutive.size(), 1u);
  EXPECT_NEAR(r.mean_difference_consecutive[0], r.levels[1].mean - r.levels[0].mean, 1e-15);
  EXPECT_TRUE(r.levels[0].tail_slope.has_value());
  EXPECT_EQ(r.levels[0].fraction_z_positive, 1.0);
  std::size_t total = 0;
  for (auto c : r.histograms[1].counts) total += c;
  EXPECT_EQ(total, 300u);
  EXPECT_EQ(r.histograms[0].edges, r.histograms[1].edges);
  const auto j = to_json(r);
  EXPECT_EQ(j["levels"][1]["n"], 32);
  EXPECT_TRUE(j["levels"][0]["quantiles"].contains("q0.5"));
  EXPECT_EQ(histogram_csv(r.histograms[0]).substr(0, 18), "bin_lo,bin_hi,coun");
}

TEST(Report, SmallBatchHasNoSlope) {
  const auto r = extremes_report({synthetic_batch(8, {0.1, 0.2, 0.3})});
  EXPECT_FALSE(r.levels[0].tail_slope);
  EXPECT_TRUE(to_json(r)["levels"][0]["tail_slope"].is_null());
  EXPECT_EQ(summary_csv(synthetic_batch(8, {0.5})).substr(0, 8), "index,M,");
}
