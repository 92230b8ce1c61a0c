#pragma once

// Centred B-splines θ1, θ3 and the tensor smoothing operators built from
// them. Every integral is evaluated with composite Gauss-Legendre rules whose
// panels are aligned with the spline knots and with the declared breakpoints
// of the integrand, so piecewise polynomials are integrated exactly.

#include <gsl/gsl_integration.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "membrane/error.hpp"
#include "membrane/lattice.hpp"
#include "membrane/parallel.hpp"

namespace membrane::splines {

using lattice::kDim;
using lattice::Point;

/// θ1 (box) and θ3 (quadratic), the centred B-splines of degree 0 and 2.
inline double eval_spline(int j, double z) {
  const double a = std::abs(z);
  switch (j) {
    case 1:
      return a <= 0.5 ? 1.0 : 0.0;
    case 3:
      if (a <= 0.5) return 0.75 - z * z;
      if (a <= 1.5) return 0.5 * (a - 1.5) * (a - 1.5);
      return 0.0;
    default:
      throw PreconditionError("eval_spline: only j = 1 and j = 3 are supported");
  }
}

/// Half-width of supp θ_j.
inline double spline_half_support(int j) {
  if (j == 1) return 0.5;
  if (j == 3) return 1.5;
  throw PreconditionError("spline_half_support: only j = 1 and j = 3 are supported");
}

struct SplineKernel {
  int j = 3;
  double operator()(double z) const { return eval_spline(j, z); }
  double half_support() const { return spline_half_support(j); }
};

/// Function on R^4 with the box on which it may be evaluated, the box
/// outside which it is known to vanish, and per-axis breakpoints where it
/// may fail to be smooth.
struct FunctionHandle {
  std::function<double(const Point&)> eval;
  Point domain_lo{};
  Point domain_hi{};
  Point support_lo{};
  Point support_hi{};
  std::array<std::vector<double>, kDim> breakpoints{};

  double operator()(const Point& x) const { return eval(x); }

  /// Handle valid on [lo, hi]^4 only.
  static FunctionHandle on_box(std::function<double(const Point&)> f, double lo, double hi) {
    FunctionHandle out;
    out.eval = std::move(f);
    out.domain_lo.fill(lo);
    out.domain_hi.fill(hi);
    out.support_lo.fill(lo);
    out.support_hi.fill(hi);
    return out;
  }

  static FunctionHandle everywhere(std::function<double(const Point&)> f) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    return on_box(std::move(f), -inf, inf);
  }

  /// f on [0,1]^4 extended by zero: valid everywhere, breaks at 0 and 1.
  static FunctionHandle zero_extended_unit_box(std::function<double(const Point&)> f) {
    FunctionHandle out = everywhere({});
    out.support_lo.fill(0.0);
    out.support_hi.fill(1.0);
    for (auto& b : out.breakpoints) b = {0.0, 1.0};
    out.eval = [g = std::move(f)](const Point& x) {
      for (double c : x)
        if (c < 0.0 || c > 1.0) return 0.0;
      return g(x);
    };
    return out;
  }

  bool valid_on(int axis, double a, double b) const {
    return a >= domain_lo[axis] && b <= domain_hi[axis];
  }
};

/// Per-axis kernel choice for T^{h,j1,j2,j3,j4}.
struct SmoothingPlan {
  std::array<int, kDim> kernel{3, 3, 3, 3};
  double h = 1.0;

  static SmoothingPlan full(double h) { return {{3, 3, 3, 3}, h}; }

  /// T^{h,3,3,3,3-2e_i}: θ1 on `axis`, θ3 elsewhere.
  static SmoothingPlan commuted(int axis, double h) {
    SmoothingPlan p = full(h);
    p.kernel.at(std::size_t(axis)) = 1;
    return p;
  }
};

namespace detail {

inline constexpr int kGaussPoints = 5;  // exact to degree 9 on every panel

struct GaussRule {
  std::array<double, kGaussPoints> x{};
  std::array<double, kGaussPoints> w{};
};

/// Gauss-Legendre nodes and weights on [-1, 1].
inline const GaussRule& gauss_rule() {
  static const GaussRule rule = [] {
    GaussRule r;
    gsl_integration_glfixed_table* t = gsl_integration_glfixed_table_alloc(kGaussPoints);
    for (int i = 0; i < kGaussPoints; ++i)
      gsl_integration_glfixed_point(-1.0, 1.0, std::size_t(i), &r.x[i], &r.w[i], t);
    gsl_integration_glfixed_table_free(t);
    return r;
  }();
  return rule;
}

/// Panel boundaries covering [a, b]: the given knots plus breakpoints.
inline std::vector<double> panels(double a, double b, std::vector<double> knots,
                                  const std::vector<double>& breakpoints) {
  for (double p : breakpoints)
    if (p > a && p < b) knots.push_back(p);
  knots.push_back(a);
  knots.push_back(b);
  std::sort(knots.begin(), knots.end());
  knots.erase(std::unique(knots.begin(), knots.end(),
                          [](double x, double y) { return std::abs(x - y) <= 1e-15 * (1 + std::abs(x)); }),
              knots.end());
  return knots;
}

struct AxisRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// Quadrature for (1/h) ∫ g(y) θ_j((x - y)/h) dy restricted to the support
/// of g.
inline AxisRule axis_rule(double x, int j, double h, const std::vector<double>& breakpoints,
                          double support_lo, double support_hi) {
  const double s = spline_half_support(j);
  std::vector<double> knots;
  for (double z = -s; z <= s + 1e-12; z += 1.0) knots.push_back(x + z * h);
  const auto edges = panels(x - s * h, x + s * h, knots, breakpoints);
  const auto& g = gauss_rule();
  AxisRule rule;
  for (std::size_t p = 0; p + 1 < edges.size(); ++p) {
    const double a = std::max(edges[p], support_lo);
    const double b = std::min(edges[p + 1], support_hi);
    if (!(b > a)) continue;
    const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    for (int q = 0; q < kGaussPoints; ++q) {
      const double y = mid + half * g.x[q];
      rule.nodes.push_back(y);
      rule.weights.push_back(half * g.w[q] * eval_spline(j, (x - y) / h) / h);
    }
  }
  return rule;
}

}  // namespace detail

/// T^{h,plan} f (x) by tensor-product quadrature.
inline double smooth(const FunctionHandle& f, const SmoothingPlan& plan, const Point& x) {
  std::array<detail::AxisRule, kDim> rules;
  for (int a = 0; a < kDim; ++a) {
    const double s = spline_half_support(plan.kernel[a]) * plan.h;
    if (!f.valid_on(a, x[a] - s, x[a] + s))
      throw PreconditionError("smooth: smoothing neighbourhood leaves the function's domain");
    rules[a] = detail::axis_rule(x[a], plan.kernel[a], plan.h, f.breakpoints[a], f.support_lo[a],
                                 f.support_hi[a]);
  }
  double total = 0.0;
  Point y{};
  for (std::size_t i0 = 0; i0 < rules[0].nodes.size(); ++i0) {
    y[0] = rules[0].nodes[i0];
    for (std::size_t i1 = 0; i1 < rules[1].nodes.size(); ++i1) {
      y[1] = rules[1].nodes[i1];
      const double w01 = rules[0].weights[i0] * rules[1].weights[i1];
      for (std::size_t i2 = 0; i2 < rules[2].nodes.size(); ++i2) {
        y[2] = rules[2].nodes[i2];
        const double w012 = w01 * rules[2].weights[i2];
        double inner = 0.0;
        for (std::size_t i3 = 0; i3 < rules[3].nodes.size(); ++i3) {
          y[3] = rules[3].nodes[i3];
          inner += rules[3].weights[i3] * f(y);
        }
        total += w012 * inner;
      }
    }
  }
  return total;
}

/// |T^{h,3,3,3,3} ∂_i² f (x) - D^h_i D^h_{-i} T^{h,3,3,3,3-2e_i} f (x)|.
/// `second_derivative` must be ∂_i² f in closed form.
inline double check_commutation(const FunctionHandle& f, const FunctionHandle& second_derivative,
                                int axis, const Point& x, double h) {
  if (axis < 0 || axis >= kDim) throw PreconditionError("check_commutation: axis out of range");
  const double lhs = smooth(second_derivative, SmoothingPlan::full(h), x);
  const auto plan = SmoothingPlan::commuted(axis, h);
  Point xp = x, xm = x;
  xp[axis] += h;
  xm[axis] -= h;
  const double rhs = (smooth(f, plan, xp) - 2.0 * smooth(f, plan, x) + smooth(f, plan, xm)) / (h * h);
  return std::abs(lhs - rhs);
}

/// T^{h,plan} f evaluated at every lattice site of [-1, n+1]^4 for several
/// plans at once. The integrand is sampled once on a shared tensor grid of
/// knot-aligned Gauss nodes and contracted axis by axis, so the cost is one
/// function evaluation per node instead of one per (site, node) pair.
/// Returned fields have halo 1.
inline std::vector<lattice::Field> smooth_on_lattice(const FunctionHandle& f,
                                                     const lattice::GridSpec& grid,
                                                     const std::vector<SmoothingPlan>& plans) {
  const int n = grid.n();
  const double h = grid.h();
  const int site_lo = -1, site_hi = n + 1;
  const int sites = site_hi - site_lo + 1;

  struct SparseRow {
    int first = 0;  // index of first node
    std::vector<double> w;
  };
  // Shared per-axis node set: Gauss nodes on every half-lattice panel that
  // meets the support of f, split at breakpoints.
  std::array<std::vector<double>, kDim> nodes;
  std::array<std::vector<double>, kDim> node_weight;
  const auto& gauss = detail::gauss_rule();
  for (int a = 0; a < kDim; ++a) {
    const double s_lo = (site_lo - 1.5) * h, s_hi = (site_hi + 1.5) * h;
    const double lo = std::max(f.support_lo[a], s_lo);
    const double hi = std::min(f.support_hi[a], s_hi);
    if (hi > lo && !f.valid_on(a, lo, hi))
      throw PreconditionError("smooth_on_lattice: lattice neighbourhood leaves the function's domain");
    std::vector<double> knots;
    for (int k = site_lo - 2; k <= site_hi + 1; ++k) knots.push_back((k + 0.5) * h);
    const auto edges = detail::panels(s_lo, s_hi, knots, f.breakpoints[a]);
    for (std::size_t p = 0; p + 1 < edges.size(); ++p) {
      const double a0 = std::max(edges[p], lo), b0 = std::min(edges[p + 1], hi);
      if (!(b0 > a0)) continue;
      const double mid = 0.5 * (a0 + b0), half = 0.5 * (b0 - a0);
      for (int q = 0; q < detail::kGaussPoints; ++q) {
        nodes[a].push_back(mid + half * gauss.x[q]);
        node_weight[a].push_back(half * gauss.w[q]);
      }
    }
  }

  // rows[kernel index][axis][site] -> weights over a contiguous node range.
  auto build_rows = [&](int j, int a) {
    std::vector<SparseRow> rows(static_cast<std::size_t>(sites));
    const double s = spline_half_support(j);
    for (int k = 0; k < sites; ++k) {
      const double x = (site_lo + k) * h;
      auto& row = rows[std::size_t(k)];
      int first = -1;
      for (std::size_t q = 0; q < nodes[a].size(); ++q) {
        const double z = (x - nodes[a][q]) / h;
        if (std::abs(z) > s) continue;
        if (first < 0) first = int(q);
        row.w.resize(q - std::size_t(first) + 1, 0.0);
        row.w[q - std::size_t(first)] = node_weight[a][q] * eval_spline(j, z) / h;
      }
      row.first = std::max(first, 0);
    }
    return rows;
  };
  std::array<std::array<std::vector<SparseRow>, kDim>, 2> rows;  // [j==3][axis]
  for (int a = 0; a < kDim; ++a) {
    rows[0][a] = build_rows(1, a);
    rows[1][a] = build_rows(3, a);
  }

  const std::size_t q1 = nodes[1].size(), q2 = nodes[2].size(), q3 = nodes[3].size();
  const std::size_t K = std::size_t(sites);
  std::vector<lattice::Field> out;
  for (std::size_t p = 0; p < plans.size(); ++p) out.emplace_back(grid, 1);

  std::vector<double> slab(q1 * q2 * q3);
  std::vector<double> t3(q1 * q2 * K), t2(q1 * K * K), t1(K * K * K);
  for (std::size_t i0 = 0; i0 < nodes[0].size(); ++i0) {
    // Sample the slab at fixed first coordinate.
    parallel_for(q1, [&](std::size_t i1) {
      Point y{nodes[0][i0], nodes[1][i1], 0.0, 0.0};
      for (std::size_t i2 = 0; i2 < q2; ++i2) {
        y[2] = nodes[2][i2];
        double* row = &slab[(i1 * q2 + i2) * q3];
        for (std::size_t i3 = 0; i3 < q3; ++i3) {
          y[3] = nodes[3][i3];
          row[i3] = f(y);
        }
      }
    });
    for (std::size_t p = 0; p < plans.size(); ++p) {
      const auto& r0 = rows[plans[p].kernel[0] == 3][0];
      const auto& r1 = rows[plans[p].kernel[1] == 3][1];
      const auto& r2 = rows[plans[p].kernel[2] == 3][2];
      const auto& r3 = rows[plans[p].kernel[3] == 3][3];
      // Skip slabs outside every first-axis row.
      bool used = false;
      for (std::size_t k0 = 0; k0 < K && !used; ++k0)
        used = i0 >= std::size_t(r0[k0].first) && i0 < r0[k0].first + r0[k0].w.size() &&
               r0[k0].w[i0 - r0[k0].first] != 0.0;
      if (!used) continue;
      // axis 3
      for (std::size_t a = 0; a < q1 * q2; ++a) {
        const double* src = &slab[a * q3];
        double* dst = &t3[a * K];
        for (std::size_t k = 0; k < K; ++k) {
          const auto& row = r3[k];
          double acc = 0.0;
          for (std::size_t m = 0; m < row.w.size(); ++m) acc += row.w[m] * src[row.first + m];
          dst[k] = acc;
        }
      }
      // axis 2
      for (std::size_t i1 = 0; i1 < q1; ++i1)
        for (std::size_t k2 = 0; k2 < K; ++k2) {
          const auto& row = r2[k2];
          double* dst = &t2[(i1 * K + k2) * K];
          std::fill(dst, dst + K, 0.0);
          for (std::size_t m = 0; m < row.w.size(); ++m) {
            const double w = row.w[m];
            const double* src = &t3[(i1 * q2 + row.first + m) * K];
            for (std::size_t k3 = 0; k3 < K; ++k3) dst[k3] += w * src[k3];
          }
        }
      // axis 1
      for (std::size_t k1 = 0; k1 < K; ++k1) {
        const auto& row = r1[k1];
        double* dst = &t1[k1 * K * K];
        std::fill(dst, dst + K * K, 0.0);
        for (std::size_t m = 0; m < row.w.size(); ++m) {
          const double w = row.w[m];
          const double* src = &t2[(row.first + m) * K * K];
          for (std::size_t k = 0; k < K * K; ++k) dst[k] += w * src[k];
        }
      }
      // axis 0: scatter into output
      auto values = out[p].values();
      for (std::size_t k0 = 0; k0 < K; ++k0) {
        const auto& row = r0[k0];
        if (i0 < std::size_t(row.first) || i0 >= row.first + row.w.size()) continue;
        const double w = row.w[i0 - row.first];
        if (w == 0.0) continue;
        double* dst = &values[k0 * K * K * K];
        for (std::size_t k = 0; k < K * K * K; ++k) dst[k] += w * t1[k];
      }
    }
  }
  return out;
}

}  // namespace membrane::splines
