#pragma once

// Mollified finite-difference scheme Δ_h² u_h = T^{h,3,3,3,3} Δ²ũ on the box
// and convergence-rate measurement against manufactured solutions.
//
// Δ²ũ is a distribution when ũ is only a zero extension, so the right-hand
// side is assembled from the commuted form
//   T^{h,3,3,3,3} ∂_i² g = D_i D_{-i} T^{h,3,3,3,3-2e_i} g,   g = Δũ,
// summed over i. Only Δu is ever evaluated, in closed form, extended by 0.

#include <array>
#include <cmath>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "membrane/error.hpp"
#include "membrane/lattice.hpp"
#include "membrane/solver.hpp"
#include "membrane/splines.hpp"

namespace membrane::scheme {

using lattice::Field;
using lattice::GridSpec;
using lattice::Point;
using lattice::Site;

using Function = std::function<double(const Point&)>;
using Gradient = std::function<Point(const Point&)>;

/// u on [0,1]^4 with u = ∂_ν u = 0 on the boundary, its Laplacian and
/// gradient in closed form, and the largest s with ũ ∈ W^{s,2}.
struct ManufacturedSolution {
  std::string id;
  Function u;
  Function laplacian;
  Gradient gradient;
  double s_max = 0.0;
  bool identically_zero = false;
  std::array<std::vector<double>, 4> breakpoints{};  // interior non-smooth points of Δu, per axis

  /// Max of |u| and |∇u| over a deterministic boundary sample.
  double boundary_defect(int per_axis = 9) const {
    double worst = 0.0;
    for (int axis = 0; axis < 4; ++axis)
      for (double face : {0.0, 1.0})
        for (int a = 0; a < per_axis; ++a)
          for (int b = 0; b < per_axis; ++b)
            for (int c = 0; c < per_axis; ++c) {
              const double t[3] = {(a + 0.5) / per_axis, (b + 0.37) / per_axis, (c + 0.71) / per_axis};
              Point x{};
              for (int k = 0, m = 0; k < 4; ++k) x[std::size_t(k)] = k == axis ? face : t[m++];
              worst = std::max(worst, std::abs(u(x)));
              for (double g : gradient(x)) worst = std::max(worst, std::abs(g));
            }
    return worst;
  }

  void validate() const {
    if (!u || !laplacian || !gradient) throw PreconditionError("manufactured solution '" + id + "' is incomplete");
    const double d = boundary_defect();
    if (!(d <= 1e-12))
      throw PreconditionError("manufactured solution '" + id + "' is not clamped on the boundary (defect " +
                              std::to_string(d) + ")");
  }
};

inline ManufacturedSolution zero_solution() {
  return {"zero",
          [](const Point&) { return 0.0; },
          [](const Point&) { return 0.0; },
          [](const Point&) { return Point{}; },
          std::numeric_limits<double>::infinity(),
          true};
}

/// Π sin²(πx_i). The second derivative jumps across the boundary, so the
/// zero extension lies in W^{s,2} exactly for s < 5/2.
inline ManufacturedSolution sin2_solution() {
  ManufacturedSolution s;
  s.id = "sin2";
  s.s_max = 2.5;
  s.u = [](const Point& x) {
    double p = 1.0;
    for (double c : x) {
      const double v = std::sin(M_PI * c);
      p *= v * v;
    }
    return p;
  };
  s.laplacian = [](const Point& x) {
    std::array<double, 4> f{}, d2{};
    for (int a = 0; a < 4; ++a) {
      const double v = std::sin(M_PI * x[std::size_t(a)]);
      f[std::size_t(a)] = v * v;
      d2[std::size_t(a)] = 2.0 * M_PI * M_PI * std::cos(2.0 * M_PI * x[std::size_t(a)]);
    }
    double sum = 0.0;
    for (int i = 0; i < 4; ++i) {
      double term = d2[std::size_t(i)];
      for (int j = 0; j < 4; ++j)
        if (j != i) term *= f[std::size_t(j)];
      sum += term;
    }
    return sum;
  };
  s.gradient = [](const Point& x) {
    Point g{};
    for (int i = 0; i < 4; ++i) {
      double term = M_PI * std::sin(2.0 * M_PI * x[std::size_t(i)]);
      for (int j = 0; j < 4; ++j)
        if (j != i) {
          const double v = std::sin(M_PI * x[std::size_t(j)]);
          term *= v * v;
        }
      g[std::size_t(i)] = term;
    }
    return g;
  };
  return s;
}

/// Π sin⁴(πx_i) · |x − c|^β with 0 < β < 1/2. The envelope vanishes to third
/// order at the boundary; the interior point singularity puts ũ in W^{s,2}
/// exactly for s < 2 + β (in four dimensions). The default c is the box
/// center, a lattice site at every even n, so the singularity sits at the
/// same relative position on every mesh.
inline ManufacturedSolution singular_bump_solution(double beta = 0.25, Point center = {0.5, 0.5, 0.5, 0.5}) {
  if (!(beta > 0.0 && beta < 0.5)) throw PreconditionError("singular_bump_solution: need 0 < beta < 1/2");
  for (double c : center)
    if (!(c > 0.0 && c < 1.0)) throw PreconditionError("singular_bump_solution: center must be interior");
  struct Envelope {
    double value;
    Point grad;
    double lap;
  };
  auto envelope = [](const Point& x) {
    std::array<double, 4> f{}, d1{}, d2{};
    for (int a = 0; a < 4; ++a) {
      const double s = std::sin(M_PI * x[std::size_t(a)]), c = std::cos(M_PI * x[std::size_t(a)]);
      const double s2 = s * s;
      f[std::size_t(a)] = s2 * s2;
      d1[std::size_t(a)] = 4.0 * M_PI * s2 * s * c;
      d2[std::size_t(a)] = 4.0 * M_PI * M_PI * s2 * (3.0 * c * c - s2);
    }
    Envelope e{1.0, {}, 0.0};
    for (int a = 0; a < 4; ++a) e.value *= f[std::size_t(a)];
    for (int i = 0; i < 4; ++i) {
      double g = d1[std::size_t(i)], l = d2[std::size_t(i)];
      for (int j = 0; j < 4; ++j)
        if (j != i) {
          g *= f[std::size_t(j)];
          l *= f[std::size_t(j)];
        }
      e.grad[std::size_t(i)] = g;
      e.lap += l;
    }
    return e;
  };
  ManufacturedSolution s;
  std::ostringstream id;
  id << "bump_beta" << beta;
  s.id = id.str();
  s.s_max = 2.0 + beta;
  for (int a = 0; a < 4; ++a) s.breakpoints[std::size_t(a)] = {center[std::size_t(a)]};
  s.u = [=](const Point& x) {
    double r2 = 0.0;
    for (int a = 0; a < 4; ++a) r2 += (x[std::size_t(a)] - center[std::size_t(a)]) * (x[std::size_t(a)] - center[std::size_t(a)]);
    return envelope(x).value * std::pow(r2, 0.5 * beta);
  };
  // Δ(S r^β) = r^β ΔS + 2β r^{β-2} (x-c)·∇S + β(β+2) r^{β-2} S.
  s.laplacian = [=](const Point& x) {
    Point d{};
    double r2 = 0.0;
    for (int a = 0; a < 4; ++a) {
      d[std::size_t(a)] = x[std::size_t(a)] - center[std::size_t(a)];
      r2 += d[std::size_t(a)] * d[std::size_t(a)];
    }
    if (r2 == 0.0) return 0.0;  // measure zero; c is a panel breakpoint, never a node
    const Envelope e = envelope(x);
    const double rb = std::pow(r2, 0.5 * beta), rb2 = rb / r2;
    double dot = 0.0;
    for (int a = 0; a < 4; ++a) dot += d[std::size_t(a)] * e.grad[std::size_t(a)];
    return rb * e.lap + 2.0 * beta * rb2 * dot + beta * (beta + 2.0) * rb2 * e.value;
  };
  s.gradient = [=](const Point& x) {
    Point d{};
    double r2 = 0.0;
    for (int a = 0; a < 4; ++a) {
      d[std::size_t(a)] = x[std::size_t(a)] - center[std::size_t(a)];
      r2 += d[std::size_t(a)] * d[std::size_t(a)];
    }
    const Envelope e = envelope(x);
    const double rb = std::pow(r2, 0.5 * beta);
    Point g{};
    for (int a = 0; a < 4; ++a)
      g[std::size_t(a)] = rb * e.grad[std::size_t(a)] + (r2 > 0.0 ? e.value * beta * rb / r2 * d[std::size_t(a)] : 0.0);
    return g;
  };
  return s;
}

/// α·sol, for linearity checks.
inline ManufacturedSolution scaled(const ManufacturedSolution& sol, double alpha) {
  ManufacturedSolution s = sol;
  std::ostringstream id;
  id << sol.id << "_x" << alpha;
  s.id = id.str();
  s.u = [f = sol.u, alpha](const Point& x) { return alpha * f(x); };
  s.laplacian = [f = sol.laplacian, alpha](const Point& x) { return alpha * f(x); };
  s.gradient = [f = sol.gradient, alpha](const Point& x) {
    Point g = f(x);
    for (double& v : g) v *= alpha;
    return g;
  };
  s.identically_zero = sol.identically_zero || alpha == 0.0;
  return s;
}

inline ManufacturedSolution solution_by_id(const std::string& id) {
  if (id == "zero") return zero_solution();
  if (id == "sin2") return sin2_solution();
  if (id == "bump") return singular_bump_solution();
  throw PreconditionError("unknown manufactured solution '" + id + "' (expected zero, sin2 or bump)");
}

/// Σ_i D_i D_{-i} T^{h,3,3,3,3-2e_i}(Δũ) on the box sites.
inline Field assemble_rhs(const GridSpec& grid, const ManufacturedSolution& sol) {
  Field rhs(grid);
  if (sol.identically_zero) return rhs;
  const double h = grid.h();
  auto g = splines::FunctionHandle::zero_extended_unit_box(sol.laplacian);
  for (int a = 0; a < 4; ++a)
    for (double b : sol.breakpoints[std::size_t(a)]) g.breakpoints[std::size_t(a)].push_back(b);
  std::vector<splines::SmoothingPlan> plans;
  for (int i = 0; i < 4; ++i) plans.push_back(splines::SmoothingPlan::commuted(i, h));
  const auto smoothed = splines::smooth_on_lattice(g, grid, plans);
  auto values = rhs.values();
  for (std::size_t k = 0; k < values.size(); ++k) {
    const Site x = grid.site(k);
    double sum = 0.0;
    for (int i = 0; i < 4; ++i) {
      const auto& gi = smoothed[std::size_t(i)];
      const Site e = lattice::unit(i);
      sum += gi(lattice::operator+(x, e)) - 2.0 * gi(x) + gi(lattice::operator-(x, e));
    }
    values[k] = sum / (h * h);
  }
  return rhs;
}

struct SchemeSolution {
  Field u;
  solver::CgResult solve;
};

inline SchemeSolution solve_scheme(const GridSpec& grid, const ManufacturedSolution& sol, double tol = 1e-10) {
  sol.validate();
  if (!(tol > 0.0)) throw PreconditionError("solve_scheme: tol must be positive");
  const Field rhs = assemble_rhs(grid, sol);
  // Δ_h² = h⁻⁴ Δ1², so the lattice-unit system has right-hand side h⁴·rhs.
  const double h4 = std::pow(grid.h(), 4);
  std::vector<double> b(rhs.values().begin(), rhs.values().end());
  for (double& v : b) v *= h4;
  SchemeSolution out{Field(grid), {}};
  out.solve = solver::conjugate_gradient(grid, b, out.u.values(), {tol, 2000});
  if (!out.solve.converged) throw SolverError("solve_scheme: CG did not converge", out.solve.relative_residual);
  return out;
}

struct SchemeLevel {
  int n = 0;
  double h = 0.0;
  double w22_error = 0.0;
  double linf_error = 0.0;
  int iterations = 0;
  double residual = 0.0;
};

struct SchemeReport {
  std::string solution;
  double s_max = 0.0;
  double tolerance = 0.0;
  std::vector<SchemeLevel> levels;
  std::optional<double> rate;  // undefined when some error vanishes

  double expected_rate() const { return s_max - 2.0; }
};

/// Least-squares slope of log(error) against log(h).
inline std::optional<double> fit_rate(const std::vector<SchemeLevel>& levels) {
  if (levels.size() < 2) return std::nullopt;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& l : levels) {
    if (!(l.w22_error > 0.0)) return std::nullopt;
    const double x = std::log(l.h), y = std::log(l.w22_error);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double m = double(levels.size());
  return (m * sxy - sx * sy) / (m * sxx - sx * sx);
}

/// ‖u_h − ũ‖ over all of (hZ)^4, ũ sampled at the lattice sites.
inline SchemeLevel scheme_error(const GridSpec& grid, const ManufacturedSolution& sol, const SchemeSolution& s) {
  Field e = s.u;
  auto values = e.values();
  for (std::size_t k = 0; k < values.size(); ++k) values[k] -= sol.u(grid.position(grid.site(k)));
  const auto nm = lattice::norms(e);
  return {grid.n(), grid.h(), nm.w22h, nm.linfh, s.solve.iterations, s.solve.relative_residual};
}

inline SchemeReport measure_rate(const ManufacturedSolution& sol, const std::vector<int>& meshes, double tol = 1e-10) {
  if (meshes.size() < 3) throw PreconditionError("measure_rate: need at least three meshes");
  sol.validate();
  SchemeReport report{sol.id, sol.s_max, tol, {}, std::nullopt};
  for (int n : meshes) {
    const GridSpec grid(n);
    report.levels.push_back(scheme_error(grid, sol, solve_scheme(grid, sol, tol)));
  }
  report.rate = fit_rate(report.levels);
  return report;
}

inline nlohmann::json to_json(const SchemeReport& r) {
  nlohmann::json levels = nlohmann::json::array();
  for (const auto& l : r.levels)
    levels.push_back({{"n", l.n},
                      {"h", l.h},
                      {"w22_error", l.w22_error},
                      {"linf_error", l.linf_error},
                      {"iterations", l.iterations},
                      {"residual", l.residual}});
  nlohmann::json j = {{"solution", r.solution},
                      {"tolerance", r.tolerance},
                      {"levels", levels},
                      {"rate", r.rate ? nlohmann::json(*r.rate) : nlohmann::json(nullptr)}};
  if (std::isfinite(r.s_max)) {
    j["s_max"] = r.s_max;
    j["expected_rate"] = r.expected_rate();
  } else {
    j["s_max"] = nullptr;
    j["expected_rate"] = nullptr;
  }
  return j;
}

inline std::string to_csv(const SchemeReport& r) {
  std::ostringstream os;
  os.precision(17);
  os << "n,h,w22_error,linf_error\n";
  for (const auto& l : r.levels) os << l.n << ',' << l.h << ',' << l.w22_error << ',' << l.linf_error << '\n';
  return os.str();
}

}  // namespace membrane::scheme
