#include <gtest/gtest.h>

#include <cmath>

#include "membrane/splines.hpp"

using namespace membrane;
using namespace membrane::splines;
using lattice::Point;

namespace {

// Composite Simpson on [a, b]; independent of the Gauss machinery under test.
// The default mesh puts nodes on the half-integer knots of θ3 over [-1.5, 1.5].
template <typename F>
double simpson(F&& f, double a, double b, int panels = 3000) {
  const double w = (b - a) / panels;
  double s = f(a) + f(b);
  for (int i = 1; i < panels; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + i * w);
  return s * w / 3.0;
}

FunctionHandle poly(std::function<double(const Point&)> f) { return FunctionHandle::everywhere(std::move(f)); }

}  // namespace

TEST(Spline, Values) {
  EXPECT_DOUBLE_EQ(eval_spline(3, 0.0), 0.75);
  EXPECT_DOUBLE_EQ(eval_spline(3, 0.5), 0.5);
  EXPECT_DOUBLE_EQ(eval_spline(3, -0.5), 0.5);
  EXPECT_DOUBLE_EQ(eval_spline(3, 1.5), 0.0);
  EXPECT_DOUBLE_EQ(eval_spline(1, 0.4), 1.0);
  EXPECT_DOUBLE_EQ(eval_spline(1, 0.6), 0.0);
  EXPECT_THROW(eval_spline(2, 0.0), PreconditionError);
}

TEST(Spline, MassAndSecondMoment) {
  // θ3 is the density of a sum of three centred uniforms: mass 1, variance 1/4.
  auto t3 = [](double z) { return eval_spline(3, z); };
  EXPECT_NEAR(simpson(t3, -1.5, 1.5), 1.0, 1e-10);
  EXPECT_NEAR(simpson([&](double z) { return z * z * t3(z); }, -1.5, 1.5), 0.25, 1e-10);
  // Continuity at both knots.
  for (double k : {0.5, 1.5}) EXPECT_NEAR(eval_spline(3, k - 1e-12), eval_spline(3, k + 1e-12), 1e-11);
}

TEST(Smooth, ConstantsAndLinear) {
  const double h = 0.1;
  const Point x{0.3, 0.4, 0.5, 0.6};
  EXPECT_NEAR(smooth(poly([](const Point&) { return 2.5; }), SmoothingPlan::full(h), x), 2.5, 1e-14);
  EXPECT_NEAR(smooth(poly([](const Point&) { return 2.5; }), SmoothingPlan::commuted(2, h), x), 2.5, 1e-14);
  EXPECT_NEAR(smooth(poly([](const Point& y) { return y[0]; }), SmoothingPlan::full(h), x), 0.3, 1e-14);
}

TEST(Smooth, SecondMoment) {
  const double h = 0.1;
  const Point x{0.3, 0.4, 0.5, 0.6};
  const double expect = 0.09 + h * h * 0.25;
  EXPECT_NEAR(smooth(poly([](const Point& y) { return y[0] * y[0]; }), SmoothingPlan::full(h), x), expect, 1e-14);
  // θ1 has second moment 1/12.
  EXPECT_NEAR(smooth(poly([](const Point& y) { return y[0] * y[0]; }), SmoothingPlan::commuted(0, h), x),
              0.09 + h * h / 12.0, 1e-14);
}

TEST(Smooth, RespectsDomain) {
  const auto f = FunctionHandle::on_box([](const Point&) { return 1.0; }, 0.0, 1.0);
  EXPECT_THROW(smooth(f, SmoothingPlan::full(0.1), {0.05, 0.5, 0.5, 0.5}), PreconditionError);
  EXPECT_NO_THROW(smooth(f, SmoothingPlan::full(0.1), {0.5, 0.5, 0.5, 0.5}));
}

TEST(Smooth, ZeroExtensionAgainstSimpson) {
  // Kink at 0: T f(x) for f = 1 on [0,1], x near the boundary, axis by axis.
  const auto f = FunctionHandle::zero_extended_unit_box([](const Point&) { return 1.0; });
  const double h = 0.125, x0 = 0.0625;
  // Other axes sit deep inside, so only axis 0 sees the cut.
  const double expect = simpson([&](double y) { return eval_spline(3, (x0 - y) / h) / h; }, 0.0, x0 + 1.5 * h);
  EXPECT_NEAR(smooth(f, SmoothingPlan::full(h), {x0, 0.5, 0.5, 0.5}), expect, 1e-9);
}

TEST(Commutation, PolynomialCorpus) {
  const double h = 1.0 / 16;
  const Point x{0.4, 0.45, 0.5, 0.55};
  EXPECT_LE(check_commutation(poly([](const Point& y) { return y[0] * y[0]; }), poly([](const Point&) { return 2.0; }),
                              0, x, h),
            1e-11);
  EXPECT_LE(check_commutation(poly([](const Point& y) { return y[0] * y[1] * y[1]; }),
                              poly([](const Point& y) { return 2.0 * y[0]; }), 1, x, h),
            1e-11);
  EXPECT_LE(check_commutation(poly([](const Point& y) { return std::pow(y[1], 4); }),
                              poly([](const Point& y) { return 12.0 * y[1] * y[1]; }), 1, x, h),
            1e-11);
}

TEST(Commutation, Sine) {
  const double h = 1.0 / 16;
  EXPECT_LE(check_commutation(poly([](const Point& y) { return std::sin(y[0]); }),
                              poly([](const Point& y) { return -std::sin(y[0]); }), 0, {0.3, 0.2, 0.1, 0.7}, h),
            1e-10);
}

TEST(Commutation, WrongDerivativeIsDetected) {
  const double h = 1.0 / 16;
  EXPECT_GT(check_commutation(poly([](const Point& y) { return y[0] * y[0]; }), poly([](const Point&) { return 1.0; }),
                              0, {0.5, 0.5, 0.5, 0.5}, h),
            0.5);
}

TEST(SmoothOnLattice, MatchesPointwise) {
  const lattice::GridSpec g(4);
  const auto f = FunctionHandle::zero_extended_unit_box([](const Point& y) {
    double p = 1.0;
    for (double c : y) p *= std::sin(M_PI * c);
    return p * (1.0 + y[0]);
  });
  const std::vector<SmoothingPlan> plans{SmoothingPlan::full(g.h()), SmoothingPlan::commuted(1, g.h())};
  const auto fields = smooth_on_lattice(f, g, plans);
  ASSERT_EQ(fields.size(), 2u);
  EXPECT_EQ(fields[0].halo(), 1);
  for (const lattice::Site v : {lattice::Site{2, 2, 2, 2}, lattice::Site{0, 1, 3, 4}, lattice::Site{-1, 2, 5, 1}}) {
    const Point p{v[0] * g.h(), v[1] * g.h(), v[2] * g.h(), v[3] * g.h()};
    for (std::size_t i = 0; i < plans.size(); ++i) EXPECT_NEAR(fields[i](v), smooth(f, plans[i], p), 1e-13);
  }
}
