#pragma once

// Conjugate gradients for the clamped Bilaplacian on the box, preconditioned
// by the squared Dirichlet Laplacian, which the four-dimensional discrete
// sine transform diagonalizes exactly.
//
// All vectors here are flat arrays over the box sites in lexicographic order
// (the storage order of a halo-free lattice::Field).

#include <fftw3.h>

#include <cmath>
#include <cstddef>
#include <memory>
#include <mutex>
#include <span>
#include <vector>

#include "membrane/error.hpp"
#include "membrane/lattice.hpp"

namespace membrane::solver {

/// u ↦ Δ1 Δ1 ũ restricted to the box, ũ the zero extension of u. This is
/// the precision operator Q = Δ1ᵀΔ1 of the membrane model in lattice units.
class BoxBilaplacian {
 public:
  explicit BoxBilaplacian(const lattice::GridSpec& grid)
      : n_(grid.n()), side_(n_ + 5), inner_(grid.side()) {
    stride_[3] = 1;
    for (int a = 2; a >= 0; --a) stride_[a] = stride_[a + 1] * side_;
    const std::size_t total = std::size_t(side_) * side_ * side_ * side_;
    padded_.assign(total, 0.0);
    lap_.assign(total, 0.0);
  }

  std::size_t size() const { return inner_ * inner_ * inner_ * inner_; }

  void apply(std::span<const double> u, std::span<double> out) {
    scatter(u, padded_);
    laplacian(padded_, lap_, -1, n_ + 1);
    laplacian_gather(lap_, out);
  }

  /// Δ1 of the zero extension of `xi`, where `xi` lives on [-1, n+1]^4, read
  /// back on the box. This is Aᵀξ for A = Δ1 : box → dilated box.
  void apply_transpose_dilated(std::span<const double> xi, std::span<double> out) {
    // lap_ is fully rewritten on [-1, n+1]^4 by apply(); its outer ring stays 0.
    const int m = n_ + 3;
    std::size_t k = 0;
    for (int a = -1; a <= n_ + 1; ++a)
      for (int b = -1; b <= n_ + 1; ++b)
        for (int c = -1; c <= n_ + 1; ++c) {
          double* row = &lap_[offset(a, b, c, -1)];
          for (int d = 0; d < m; ++d) row[d] = xi[k++];
        }
    laplacian_gather(lap_, out);
  }

 private:
  std::ptrdiff_t offset(int a, int b, int c, int d) const {
    return (a + 2) * stride_[0] + (b + 2) * stride_[1] + (c + 2) * stride_[2] + (d + 2);
  }

  void scatter(std::span<const double> u, std::vector<double>& dst) const {
    std::size_t k = 0;
    for (int a = 0; a <= n_; ++a)
      for (int b = 0; b <= n_; ++b)
        for (int c = 0; c <= n_; ++c) {
          double* row = &dst[offset(a, b, c, 0)];
          for (int d = 0; d <= n_; ++d) row[d] = u[k++];
        }
  }

  void laplacian(const std::vector<double>& src, std::vector<double>& dst, int from, int to) const {
    const std::ptrdiff_t s0 = stride_[0], s1 = stride_[1], s2 = stride_[2];
    for (int a = from; a <= to; ++a)
      for (int b = from; b <= to; ++b)
        for (int c = from; c <= to; ++c) {
          const std::ptrdiff_t base = offset(a, b, c, from);
          const double* u = &src[base];
          double* w = &dst[base];
          const int len = to - from + 1;
          for (int d = 0; d < len; ++d) {
            w[d] = u[d + s0] + u[d - s0] + u[d + s1] + u[d - s1] + u[d + s2] + u[d - s2] + u[d + 1] +
                   u[d - 1] - 8.0 * u[d];
          }
        }
  }

  void laplacian_gather(const std::vector<double>& src, std::span<double> out) const {
    const std::ptrdiff_t s0 = stride_[0], s1 = stride_[1], s2 = stride_[2];
    std::size_t k = 0;
    for (int a = 0; a <= n_; ++a)
      for (int b = 0; b <= n_; ++b)
        for (int c = 0; c <= n_; ++c) {
          const double* u = &src[offset(a, b, c, 0)];
          for (int d = 0; d <= n_; ++d) {
            out[k++] = u[d + s0] + u[d - s0] + u[d + s1] + u[d - s1] + u[d + s2] + u[d - s2] +
                       u[d + 1] + u[d - 1] - 8.0 * u[d];
          }
        }
  }

  int n_;
  int side_;
  std::size_t inner_;
  std::array<std::ptrdiff_t, 4> stride_{};
  std::vector<double> padded_;
  std::vector<double> lap_;
};

namespace detail {

inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

struct FftwFree {
  void operator()(double* p) const { fftw_free(p); }
};

struct PlanDestroy {
  void operator()(fftw_plan_s* p) const {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(p);
  }
};

}  // namespace detail

/// Exact inverse of L_D², L_D the Dirichlet Laplacian on the box (zero on
/// the first exterior layer). Equivalently the Bilaplacian with u = 0 and
/// Δu = 0 on that layer.
class SquaredDirichletPreconditioner {
 public:
  explicit SquaredDirichletPreconditioner(const lattice::GridSpec& grid) : m_(int(grid.side())) {
    const std::size_t total = std::size_t(m_) * m_ * m_ * m_;
    buffer_.reset(static_cast<double*>(fftw_malloc(sizeof(double) * total)));
    {
      std::lock_guard lock(detail::fftw_planner_mutex());
      const int dims[4] = {m_, m_, m_, m_};
      const fftw_r2r_kind kinds[4] = {FFTW_RODFT00, FFTW_RODFT00, FFTW_RODFT00, FFTW_RODFT00};
      plan_.reset(fftw_plan_r2r(4, dims, buffer_.get(), buffer_.get(), kinds, FFTW_ESTIMATE));
    }
    if (!plan_) throw std::runtime_error("FFTW planning failed");
    // RODFT00 applied twice scales by 2(m+1) per axis.
    const double norm = std::pow(2.0 * (m_ + 1), 4);
    std::vector<double> axis(static_cast<std::size_t>(m_));
    for (int k = 0; k < m_; ++k) axis[std::size_t(k)] = 2.0 - 2.0 * std::cos(M_PI * (k + 1) / (m_ + 1));
    inverse_eigen_.resize(total);
    std::size_t k = 0;
    for (int a = 0; a < m_; ++a)
      for (int b = 0; b < m_; ++b)
        for (int c = 0; c < m_; ++c)
          for (int d = 0; d < m_; ++d) {
            const double mu = axis[a] + axis[b] + axis[c] + axis[d];
            inverse_eigen_[k++] = 1.0 / (mu * mu * norm);
          }
  }

  void apply(std::span<const double> r, std::span<double> z) {
    double* buf = buffer_.get();
    std::copy(r.begin(), r.end(), buf);
    fftw_execute_r2r(plan_.get(), buf, buf);
    for (std::size_t k = 0; k < inverse_eigen_.size(); ++k) buf[k] *= inverse_eigen_[k];
    fftw_execute_r2r(plan_.get(), buf, buf);
    std::copy(buf, buf + inverse_eigen_.size(), z.begin());
  }

 private:
  int m_;
  std::unique_ptr<double, detail::FftwFree> buffer_;
  std::unique_ptr<fftw_plan_s, detail::PlanDestroy> plan_;
  std::vector<double> inverse_eigen_;
};

struct CgOptions {
  double tolerance = 1e-8;
  int max_iterations = 2000;
};

struct CgResult {
  int iterations = 0;
  double relative_residual = 0.0;  // recomputed from b - Ax at exit
  bool converged = false;
};

namespace detail {

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

}  // namespace detail

/// Preconditioned CG for Q x = b on the box. `x` holds the initial guess and
/// receives the best iterate. Never throws on stagnation; callers inspect
/// `converged`.
inline CgResult conjugate_gradient(const lattice::GridSpec& grid, std::span<const double> b,
                                   std::span<double> x, const CgOptions& opts = {}) {
  if (!(opts.tolerance > 0.0)) throw PreconditionError("conjugate_gradient: tolerance must be positive");
  BoxBilaplacian op(grid);
  SquaredDirichletPreconditioner precond(grid);
  const std::size_t size = op.size();
  std::vector<double> r(size), z(size), p(size), q(size);

  const double b_norm = std::sqrt(detail::dot(b, b));
  CgResult result;
  if (b_norm == 0.0) {
    std::fill(x.begin(), x.end(), 0.0);
    result.converged = true;
    return result;
  }

  auto true_residual = [&] {
    op.apply(x, q);
    for (std::size_t k = 0; k < size; ++k) r[k] = b[k] - q[k];
    return std::sqrt(detail::dot(r, r)) / b_norm;
  };

  // Restarts guard against drift between recurrence and true residual.
  constexpr int kRestarts = 3;
  double rel = true_residual();
  for (int restart = 0; restart <= kRestarts && rel > opts.tolerance; ++restart) {
    precond.apply(r, z);
    p = z;
    double rz = detail::dot(r, z);
    while (result.iterations < opts.max_iterations) {
      op.apply(p, q);
      const double alpha = rz / detail::dot(p, q);
      for (std::size_t k = 0; k < size; ++k) {
        x[k] += alpha * p[k];
        r[k] -= alpha * q[k];
      }
      ++result.iterations;
      if (std::sqrt(detail::dot(r, r)) / b_norm <= opts.tolerance) break;
      precond.apply(r, z);
      const double rz_next = detail::dot(r, z);
      const double beta = rz_next / rz;
      rz = rz_next;
      for (std::size_t k = 0; k < size; ++k) p[k] = z[k] + beta * p[k];
    }
    rel = true_residual();
    if (result.iterations >= opts.max_iterations) break;
  }
  result.relative_residual = rel;
  result.converged = rel <= opts.tolerance;
  return result;
}

}  // namespace membrane::solver
