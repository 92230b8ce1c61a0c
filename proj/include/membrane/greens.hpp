#pragma once

// Green's functions of the discrete Bilaplacian: the full-space function F on
// Z^4, its shifted variants, and columns of the box Green's function G_h.
//
// F(x) - F(0) is evaluated through the Bessel form of the Fourier integral,
//   (2pi)^-4 ∫ (cos x·ξ - 1) / μ(ξ)^2 dξ
//     = ∫_0^∞ t [ Π_i e^{-2t} I_{x_i}(2t) - (e^{-2t} I_0(2t))^4 ] dt,
// which follows from 1/μ^2 = ∫ t e^{-tμ} dt and the generating function of
// I_k. The remaining one-dimensional integral is smooth on geometric panels;
// beyond a cutoff T the large-argument series of e^{-z}I_k(z) integrates in
// closed form.

#include <fcntl.h>
#include <gsl/gsl_integration.h>
#include <gsl/gsl_sf_bessel.h>
#include <sys/file.h>
#include <unistd.h>

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "membrane/error.hpp"
#include "membrane/lattice.hpp"
#include "membrane/parallel.hpp"
#include "membrane/solver.hpp"

namespace membrane::greens {

using lattice::Field;
using lattice::GridSpec;
using lattice::Point;
using lattice::Site;
using lattice::operator+;
using lattice::operator-;

inline constexpr double kLambda = 8.885765876316732;          // √8·π
inline constexpr double kLambdaSquared = 78.95683520871486;   // 8π²

/// −(8π²)⁻¹ log|x| + (24π²)⁻¹ Σ x_i⁴ / |x|⁶.
inline double fullspace_expansion(const Site& x) {
  double r2 = 0.0, q = 0.0;
  for (int v : x) {
    const double d = v;
    r2 += d * d;
    q += d * d * d * d;
  }
  if (r2 == 0.0) throw PreconditionError("fullspace_expansion: undefined at the origin");
  return -std::log(r2) / (2.0 * kLambdaSquared) + q / (r2 * r2 * r2) / (3.0 * kLambdaSquared);
}

namespace detail {

// e^{-z} I_k(z) for k = 0..kmax. GSL's array routine aborts on underflow for
// small z, so below z = 1 the power series is summed directly.
inline void scaled_bessel_i(int kmax, double z, std::vector<double>& out) {
  out.assign(std::size_t(kmax) + 1, 0.0);
  if (z >= 1.0) {
    gsl_sf_bessel_In_scaled_array(0, kmax, z, out.data());
    return;
  }
  const double half = 0.5 * z, q = half * half;
  for (int k = 0; k <= kmax; ++k) {
    double term = std::exp(k * std::log(half) - std::lgamma(k + 1.0) - z);
    double sum = 0.0;
    for (int m = 0; term > 1e-18 * sum || m == 0; ++m) {
      sum += term;
      term *= q / ((m + 1.0) * (m + 1.0 + k));
    }
    out[std::size_t(k)] = sum;
  }
}

// Coefficients c_m with e^{-z}I_k(z) ~ (2πz)^{-1/2} Σ c_m z^{-m}.
inline std::vector<double> bessel_series(int k, int terms) {
  std::vector<double> c(std::size_t(terms) + 1);
  double a = 1.0;
  c[0] = 1.0;
  for (int m = 1; m <= terms; ++m) {
    a *= (4.0 * k * k - (2.0 * m - 1) * (2.0 * m - 1)) / (8.0 * m);
    c[std::size_t(m)] = (m % 2 ? -a : a);
  }
  return c;
}

inline std::vector<double> truncated_product(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> c(a.size(), 0.0);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; i + j < a.size(); ++j) c[i + j] += a[i] * b[j];
  return c;
}

// ∫_T^∞ of the integrand using the large-argument series (z = 2t).
inline double bessel_tail(const std::array<int, 4>& k, double T) {
  constexpr int kTerms = 10;
  std::vector<double> px{1.0}, p0{1.0};
  px.resize(kTerms + 1, 0.0);
  p0.resize(kTerms + 1, 0.0);
  const auto s0 = bessel_series(0, kTerms);
  for (int a = 0; a < 4; ++a) {
    px = truncated_product(px, bessel_series(k[std::size_t(a)], kTerms));
    p0 = truncated_product(p0, s0);
  }
  double sum = 0.0;
  for (int m = 1; m <= kTerms; ++m)
    sum += (px[std::size_t(m)] - p0[std::size_t(m)]) / (m * std::pow(2.0 * T, m));
  return sum / (2.0 * kLambdaSquared);
}

inline const gsl_integration_glfixed_table* glfixed(int points) {
  static std::mutex m;
  static std::map<int, gsl_integration_glfixed_table*> tables;
  std::lock_guard lock(m);
  auto& t = tables[points];
  if (!t) t = gsl_integration_glfixed_table_alloc(std::size_t(points));
  return t;
}

}  // namespace detail

struct DifferenceValue {
  double value = 0.0;           // F(x) - F(0)
  double error_estimate = 0.0;  // |coarse - fine| summed over panels
};

/// F(x) − F(0) by quadrature. Throws QuadratureError if the two Gauss orders
/// disagree by more than `tolerance`.
inline DifferenceValue fullspace_difference(const Site& x, double tolerance = 1e-11) {
  std::array<int, 4> k{};
  int kmax = 0;
  for (int a = 0; a < 4; ++a) {
    k[std::size_t(a)] = std::abs(x[std::size_t(a)]);
    kmax = std::max(kmax, k[std::size_t(a)]);
  }
  if (kmax == 0) return {};
  const double T_min = 50.0 * (1.0 + double(kmax) * kmax);
  const auto* coarse = detail::glfixed(20);
  const auto* fine = detail::glfixed(30);
  std::vector<double> bessel;
  auto integrand = [&](double t) {
    detail::scaled_bessel_i(kmax, 2.0 * t, bessel);
    const double b0 = bessel[0];
    double prod = 1.0;
    for (int a = 0; a < 4; ++a) prod *= bessel[std::size_t(k[std::size_t(a)])];
    return t * (prod - b0 * b0 * b0 * b0);
  };
  auto panel = [&](const gsl_integration_glfixed_table* table, double a, double b) {
    double s = 0.0;
    for (std::size_t i = 0; i < table->n; ++i) {
      double xi = 0.0, wi = 0.0;
      gsl_integration_glfixed_point(a, b, i, &xi, &wi, table);
      s += wi * integrand(xi);
    }
    return s;
  };
  DifferenceValue out;
  double a = 0.0, b = 0.5;
  while (true) {
    const double qc = panel(coarse, a, b), qf = panel(fine, a, b);
    out.value += qf;
    out.error_estimate += std::abs(qf - qc);
    if (b >= T_min) break;
    a = b;
    b *= 2.0;
  }
  const double tail = detail::bessel_tail(k, b);
  out.value += tail;
  // The first omitted series term bounds the truncation error.
  out.error_estimate += std::abs(tail) * std::pow(double(kmax) * kmax / b, 10);
  if (!(out.error_estimate <= tolerance))
    throw QuadratureError("fullspace_difference: Gauss orders disagree", out.error_estimate);
  return out;
}

/// Least-squares value of F(0) matching the asymptotic expansion on a shell.
struct Normalization {
  double c0 = 0.0;
  double fit_rms = 0.0;       // weighted RMS of (c0 + F(x) - F(0) - expansion)
  double fit_max = 0.0;
  double shell_inner = 24.0;
  double shell_outer = 48.0;
  int stride = 4;             // shell points are taken from (stride·Z)^4
  std::size_t classes = 0;    // symmetry classes evaluated
  std::size_t points = 0;     // lattice points represented
};

namespace detail {

inline std::size_t orbit_size(const std::array<int, 4>& sorted_abs) {
  // Permutations of the multiset times sign choices of nonzero entries.
  std::size_t perms = 24;
  for (int i = 0; i < 4;) {
    int j = i;
    while (j < 4 && sorted_abs[std::size_t(j)] == sorted_abs[std::size_t(i)]) ++j;
    for (int f = 2; f <= j - i; ++f) perms /= std::size_t(f);
    i = j;
  }
  std::size_t signs = 1;
  for (int v : sorted_abs)
    if (v != 0) signs *= 2;
  return perms * signs;
}

}  // namespace detail

/// Fits c0 over the lattice points of (stride·Z)^4 with inner ≤ |x| ≤ outer,
/// one quadrature per hypercubic symmetry class weighted by its orbit size.
inline Normalization fit_normalization(double inner = 24.0, double outer = 48.0, int stride = 4) {
  if (!(inner > 0.0 && outer > inner && stride > 0))
    throw PreconditionError("fit_normalization: need 0 < inner < outer and stride > 0");
  struct Sample {
    double offset;
    double weight;
  };
  std::vector<std::array<int, 4>> reps;
  const int m = int(outer / stride);
  for (int a = 0; a <= m; ++a)
    for (int b = 0; b <= a; ++b)
      for (int c = 0; c <= b; ++c)
        for (int d = 0; d <= c; ++d) {
          const double r = stride * std::sqrt(double(a * a + b * b + c * c + d * d));
          if (r >= inner && r <= outer) reps.push_back({a * stride, b * stride, c * stride, d * stride});
        }
  std::vector<Sample> samples(reps.size());
  parallel_for(reps.size(), [&](std::size_t i) {
    const auto& x = reps[i];
    std::array<int, 4> asc = x;
    std::sort(asc.begin(), asc.end());
    samples[i] = {fullspace_expansion(x) - fullspace_difference(x).value, double(detail::orbit_size(asc))};
  });
  Normalization out;
  out.shell_inner = inner;
  out.shell_outer = outer;
  out.stride = stride;
  out.classes = samples.size();
  double sw = 0.0, swx = 0.0;
  for (const auto& s : samples) {
    sw += s.weight;
    swx += s.weight * s.offset;
  }
  out.c0 = swx / sw;
  double ss = 0.0;
  for (const auto& s : samples) {
    const double e = s.offset - out.c0;
    ss += s.weight * e * e;
    out.fit_max = std::max(out.fit_max, std::abs(e));
  }
  out.fit_rms = std::sqrt(ss / sw);
  out.points = std::size_t(sw);
  return out;
}

inline nlohmann::json to_json(const Normalization& n) {
  return {{"c0", n.c0},         {"fit_rms", n.fit_rms},         {"fit_max", n.fit_max},
          {"shell_inner", n.shell_inner}, {"shell_outer", n.shell_outer}, {"stride", n.stride},
          {"classes", n.classes}, {"points", n.points}};
}

inline Normalization normalization_from_json(const nlohmann::json& j) {
  Normalization n;
  n.c0 = j.at("c0").get<double>();
  n.fit_rms = j.at("fit_rms").get<double>();
  n.fit_max = j.at("fit_max").get<double>();
  n.shell_inner = j.at("shell_inner").get<double>();
  n.shell_outer = j.at("shell_outer").get<double>();
  n.stride = j.at("stride").get<int>();
  n.classes = j.at("classes").get<std::size_t>();
  n.points = j.at("points").get<std::size_t>();
  return n;
}

enum class FullSpaceMethod { fourier_quadrature, asymptotic };

inline const char* to_string(FullSpaceMethod m) {
  return m == FullSpaceMethod::asymptotic ? "asymptotic" : "fourier_quadrature";
}

struct FullSpaceValue {
  double value = 0.0;
  FullSpaceMethod method = FullSpaceMethod::fourier_quadrature;
  double error_estimate = 0.0;
};

/// F on Z^4, normalized so that F(x) matches the expansion at infinity.
/// Quadrature values are memoized per symmetry class.
class FullSpaceGreen {
 public:
  static constexpr double kDefaultCrossover = 24.0;

  explicit FullSpaceGreen(Normalization norm, double crossover = kDefaultCrossover)
      : norm_(norm), crossover_(crossover) {}

  /// Loads c0 from `<cache_dir>/fullspace.json` or fits and stores it.
  static FullSpaceGreen calibrated(const std::optional<std::filesystem::path>& cache_dir = std::nullopt) {
    if (cache_dir) {
      const auto file = *cache_dir / "fullspace.json";
      if (std::filesystem::exists(file)) {
        std::ifstream is(file);
        return FullSpaceGreen(normalization_from_json(nlohmann::json::parse(is)));
      }
      const Normalization n = fit_normalization();
      std::filesystem::create_directories(*cache_dir);
      const auto tmp = file.string() + ".tmp" + std::to_string(::getpid());
      {
        std::ofstream os(tmp);
        os << to_json(n).dump(2) << '\n';
      }
      std::filesystem::rename(tmp, file);
      return FullSpaceGreen(n);
    }
    return FullSpaceGreen(fit_normalization());
  }

  const Normalization& normalization() const { return norm_; }
  double c0() const { return norm_.c0; }
  double crossover_radius() const { return crossover_; }

  FullSpaceValue evaluate(const Site& x, std::optional<FullSpaceMethod> force = std::nullopt) const {
    const FullSpaceMethod method =
        force.value_or(lattice::euclidean_norm(x) >= crossover_ ? FullSpaceMethod::asymptotic
                                                                 : FullSpaceMethod::fourier_quadrature);
    if (method == FullSpaceMethod::asymptotic) return {fullspace_expansion(x), method, 0.0};
    const DifferenceValue d = difference(x);
    return {norm_.c0 + d.value, method, d.error_estimate};
  }

  double operator()(const Site& x) const { return evaluate(x).value; }

 private:
  DifferenceValue difference(const Site& x) const {
    std::array<int, 4> key{};
    for (int a = 0; a < 4; ++a) key[std::size_t(a)] = std::abs(x[std::size_t(a)]);
    std::sort(key.begin(), key.end());
    {
      std::lock_guard lock(*mutex_);
      auto it = memo_->find(key);
      if (it != memo_->end()) return it->second;
    }
    const DifferenceValue d = fullspace_difference(key);
    std::lock_guard lock(*mutex_);
    memo_->emplace(key, d);
    return d;
  }

  Normalization norm_;
  double crossover_;
  std::shared_ptr<std::mutex> mutex_ = std::make_shared<std::mutex>();
  std::shared_ptr<std::map<std::array<int, 4>, DifferenceValue>> memo_ =
      std::make_shared<std::map<std::array<int, 4>, DifferenceValue>>();
};

/// Process-wide instance, calibrated on first use (CACHE_DIR honoured).
inline const FullSpaceGreen& default_fullspace() {
  static const FullSpaceGreen instance = [] {
    if (const char* dir = std::getenv("CACHE_DIR"); dir && *dir)
      return FullSpaceGreen::calibrated(std::filesystem::path(dir));
    return FullSpaceGreen::calibrated();
  }();
  return instance;
}

inline double fullspace_F(const Site& x) { return default_fullspace()(x); }

/// F((x−y)/h) − λ⁻² log h + λ⁻² log r; x, y must differ by a lattice vector.
inline double shifted_fullspace(const FullSpaceGreen& F, const Point& x, const Point& y, double h, double r) {
  if (!(h > 0.0 && r > 0.0)) throw PreconditionError("shifted_fullspace: h and r must be positive");
  Site d{};
  for (int a = 0; a < 4; ++a) {
    const double q = (x[std::size_t(a)] - y[std::size_t(a)]) / h;
    const double rq = std::round(q);
    if (std::abs(q - rq) > 1e-9) throw PreconditionError("shifted_fullspace: x - y is not in (hZ)^4");
    d[std::size_t(a)] = int(rq);
  }
  return F(d) + (std::log(r) - std::log(h)) / kLambdaSquared;
}

inline double shifted_fullspace(const Point& x, const Point& y, double h, double r) {
  return shifted_fullspace(default_fullspace(), x, y, h, r);
}

/// −λ⁻² log|x−y| + λ⁻² log r.
inline double continuous_fullspace(const Point& x, const Point& y, double r) {
  Point d{};
  for (int a = 0; a < 4; ++a) d[std::size_t(a)] = x[std::size_t(a)] - y[std::size_t(a)];
  const double dist = lattice::euclidean_norm(d);
  if (dist == 0.0) throw PreconditionError("continuous_fullspace: x = y");
  if (!(r > 0.0)) throw PreconditionError("continuous_fullspace: r must be positive");
  return (std::log(r) - std::log(dist)) / kLambdaSquared;
}

// ---------------------------------------------------------------------------
// Box Green's function.

struct GreenColumn {
  GridSpec grid{1};
  Site source{};
  Field values{GridSpec(1)};
  int iterations = 0;
  double residual = 0.0;
  double tolerance = 0.0;
  bool converged = false;

  double operator()(const Site& x) const { return values(x); }
};

inline void check_source(const GridSpec& grid, const Site& source) {
  if (!grid.contains(source)) throw PreconditionError("green column: source lies outside the box");
}

/// Solves Δ1² G = e_y on the box (equivalently Δ_h² G_h = δ_{h,y}).
inline GreenColumn solve_green_column(const GridSpec& grid, const Site& source, double tol = 1e-8) {
  check_source(grid, source);
  if (!(tol > 0.0)) throw PreconditionError("solve_green_column: tol must be positive");
  GreenColumn col{grid, source, Field(grid), 0, 0.0, tol, false};
  std::vector<double> rhs(grid.site_count(), 0.0);
  rhs[grid.index(source)] = 1.0;
  const auto res = solver::conjugate_gradient(grid, rhs, col.values.values(), {tol, 2000});
  col.iterations = res.iterations;
  col.residual = res.relative_residual;
  col.converged = res.converged;
  return col;
}

/// Dense Cholesky oracle, only for tiny grids.
inline Field dense_green_column(const GridSpec& grid, const Site& source) {
  check_source(grid, source);
  const std::size_t size = grid.site_count();
  if (size > 4096) throw PreconditionError("dense_green_column: grid too large for a dense solve");
  const auto stencil = lattice::bilaplacian_stencil();
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(Eigen::Index(size), Eigen::Index(size));
  for (std::size_t i = 0; i < size; ++i) {
    const Site x = grid.site(i);
    for (const auto& e : stencil.entries) {
      const Site y = x + e.offset;
      if (grid.contains(y)) A(Eigen::Index(i), Eigen::Index(grid.index(y))) = e.coefficient;
    }
  }
  Eigen::VectorXd b = Eigen::VectorXd::Zero(Eigen::Index(size));
  b(Eigen::Index(grid.index(source))) = 1.0;
  Eigen::LLT<Eigen::MatrixXd> llt(A);
  if (llt.info() != Eigen::Success) throw SolverError("dense_green_column: factorization failed", 0.0);
  const Eigen::VectorXd x = llt.solve(b);
  Field out(grid);
  for (std::size_t i = 0; i < size; ++i) out.values()[i] = x(Eigen::Index(i));
  return out;
}

// ---------------------------------------------------------------------------
// Column cache: <dir>/n<N>/col_a_b_c_d.mbf plus index.json, guarded by flock.

inline std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << v;
  return os.str();
}

class GreenCache {
 public:
  explicit GreenCache(std::filesystem::path root) : root_(std::move(root)) {}

  const std::filesystem::path& root() const { return root_; }

  std::filesystem::path grid_dir(const GridSpec& grid) const { return root_ / ("n" + std::to_string(grid.n())); }

  static std::string key(const Site& s) {
    return std::to_string(s[0]) + "_" + std::to_string(s[1]) + "_" + std::to_string(s[2]) + "_" +
           std::to_string(s[3]);
  }

  /// Returns a cached column whose tolerance is at least as tight as `tol`.
  std::optional<GreenColumn> load(const GridSpec& grid, const Site& source, double tol) const {
    const auto dir = grid_dir(grid);
    if (!std::filesystem::exists(dir / "index.json")) return std::nullopt;
    Lock lock(dir, LOCK_SH);
    const nlohmann::json index = read_index(dir);
    const auto it = index.find(key(source));
    if (it == index.end()) return std::nullopt;
    const auto& meta = *it;
    if (meta.at("tolerance").get<double>() > tol) return std::nullopt;
    std::ifstream is(dir / meta.at("file").get<std::string>(), std::ios::binary);
    if (!is) return std::nullopt;
    const std::string bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    if (hex64(fnv1a(bytes)) != meta.at("hash").get<std::string>()) return std::nullopt;
    std::istringstream ss(bytes);
    GreenColumn col;
    col.grid = grid;
    col.source = source;
    col.values = lattice::read_field(ss);
    if (!(col.values.grid() == grid)) return std::nullopt;
    col.iterations = meta.at("iterations").get<int>();
    col.residual = meta.at("residual").get<double>();
    col.tolerance = meta.at("tolerance").get<double>();
    col.converged = true;
    return col;
  }

  /// Stores a converged column; keeps an existing entry if it is tighter.
  void store(const GreenColumn& col) const {
    if (!col.converged) return;
    const auto dir = grid_dir(col.grid);
    std::filesystem::create_directories(dir);
    Lock lock(dir, LOCK_EX);
    nlohmann::json index = read_index(dir);
    const std::string k = key(col.source);
    if (index.contains(k) && index[k].at("tolerance").get<double>() <= col.tolerance) return;
    std::ostringstream os(std::ios::binary);
    lattice::write_field(os, col.values);
    const std::string bytes = os.str();
    const std::string file = "col_" + k + ".mbf";
    write_atomic(dir / file, bytes);
    index[k] = {{"file", file},
                {"source", col.source},
                {"tolerance", col.tolerance},
                {"iterations", col.iterations},
                {"residual", col.residual},
                {"hash", hex64(fnv1a(bytes))}};
    write_atomic(dir / "index.json", index.dump(2) + "\n");
  }

  /// Content hashes of every cached column for one grid (provenance).
  nlohmann::json hashes(const GridSpec& grid) const {
    const auto dir = grid_dir(grid);
    nlohmann::json out = nlohmann::json::object();
    if (!std::filesystem::exists(dir / "index.json")) return out;
    Lock lock(dir, LOCK_SH);
    const nlohmann::json index = read_index(dir);
    for (const auto& [k, meta] : index.items()) out[k] = meta.at("hash");
    return out;
  }

 private:
  struct Lock {
    Lock(const std::filesystem::path& dir, int mode) {
      std::filesystem::create_directories(dir);
      fd = ::open((dir / ".lock").c_str(), O_RDWR | O_CREAT, 0644);
      if (fd >= 0) ::flock(fd, mode);
    }
    ~Lock() {
      if (fd >= 0) {
        ::flock(fd, LOCK_UN);
        ::close(fd);
      }
    }
    Lock(const Lock&) = delete;
    Lock& operator=(const Lock&) = delete;
    int fd = -1;
  };

  static nlohmann::json read_index(const std::filesystem::path& dir) {
    std::ifstream is(dir / "index.json");
    if (!is) return nlohmann::json::object();
    return nlohmann::json::parse(is);
  }

  static void write_atomic(const std::filesystem::path& target, const std::string& bytes) {
    const auto tmp = target.string() + ".tmp" + std::to_string(::getpid());
    {
      std::ofstream os(tmp, std::ios::binary);
      os.write(bytes.data(), std::streamsize(bytes.size()));
      if (!os) throw std::runtime_error("cache write failed: " + tmp);
    }
    std::filesystem::rename(tmp, target);
  }

  std::filesystem::path root_;
};

/// Cached solve. A non-converged solve is returned but never stored.
inline GreenColumn green_column(const GridSpec& grid, const Site& source, double tol,
                                const GreenCache* cache = nullptr) {
  if (cache)
    if (auto hit = cache->load(grid, source, tol)) return *hit;
  GreenColumn col = solve_green_column(grid, source, tol);
  if (cache) cache->store(col);
  return col;
}

/// Several columns, solved in parallel. Throws SolverError if any fails.
inline std::vector<GreenColumn> green_columns(const GridSpec& grid, const std::vector<Site>& sources, double tol,
                                              const GreenCache* cache = nullptr) {
  std::vector<GreenColumn> out(sources.size());
  parallel_for(sources.size(), [&](std::size_t i) { out[i] = green_column(grid, sources[i], tol, cache); });
  for (const auto& c : out)
    if (!c.converged) throw SolverError("green column did not converge", c.residual);
  return out;
}

}  // namespace membrane::greens
