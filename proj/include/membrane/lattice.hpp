#pragma once

// Four-dimensional box lattices, fields with implicit zero extension, and the
// discrete difference operators and norms used throughout the library.
//
// Coordinates are kept in lattice units (integers 0..n per axis). The mesh
// width h = 1/n enters only through operator scalings and norm weights.

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "membrane/error.hpp"

namespace membrane::lattice {

inline constexpr int kDim = 4;

using Site = std::array<int, kDim>;
using Point = std::array<double, kDim>;

inline Site operator+(Site a, const Site& b) {
  for (int i = 0; i < kDim; ++i) a[i] += b[i];
  return a;
}

inline Site operator-(Site a, const Site& b) {
  for (int i = 0; i < kDim; ++i) a[i] -= b[i];
  return a;
}

inline Site unit(int axis, int step = 1) {
  Site e{0, 0, 0, 0};
  e[axis] = step;
  return e;
}

inline double euclidean_norm(const Point& p) {
  double s = 0.0;
  for (double c : p) s += c * c;
  return std::sqrt(s);
}

inline double euclidean_norm(const Site& s) {
  return euclidean_norm(Point{double(s[0]), double(s[1]), double(s[2]), double(s[3])});
}

/// The box [0,n]^4 of the integer lattice, equivalently V_h with h = 1/n.
class GridSpec {
 public:
  explicit GridSpec(int n) : n_(n) {
    if (n < 1) throw PreconditionError("GridSpec: n must be positive");
  }

  int n() const { return n_; }
  /// Mesh width as the exact rational 1/n.
  int h_denominator() const { return n_; }
  double h() const { return 1.0 / n_; }
  std::size_t side() const { return std::size_t(n_) + 1; }
  std::size_t site_count() const {
    const std::size_t s = side();
    return s * s * s * s;
  }

  bool contains(const Site& v) const {
    for (int c : v)
      if (c < 0 || c > n_) return false;
    return true;
  }

  /// Lexicographic linearization, first coordinate slowest.
  std::size_t index(const Site& v) const {
    const std::size_t s = side();
    return ((std::size_t(v[0]) * s + std::size_t(v[1])) * s + std::size_t(v[2])) * s +
           std::size_t(v[3]);
  }

  Site site(std::size_t idx) const {
    const std::size_t s = side();
    Site v{};
    for (int i = kDim - 1; i >= 0; --i) {
      v[i] = int(idx % s);
      idx /= s;
    }
    return v;
  }

  /// d_N(v): lattice distance to the box boundary, 0 exactly on the boundary.
  int boundary_distance(const Site& v) const {
    int d = n_;
    for (int c : v) d = std::min({d, c, n_ - c});
    return d;
  }

  /// d(x) = h * d_N(v).
  double mesh_boundary_distance(const Site& v) const { return h() * boundary_distance(v); }

  Point position(const Site& v) const {
    return {v[0] * h(), v[1] * h(), v[2] * h(), v[3] * h()};
  }

  Site center() const {
    if (n_ % 2 != 0) throw PreconditionError("GridSpec::center: n must be even");
    return {n_ / 2, n_ / 2, n_ / 2, n_ / 2};
  }

  /// Lattice site at a continuous point, failing if the point is off-grid.
  Site site_at(const Point& x) const {
    Site v{};
    for (int i = 0; i < kDim; ++i) {
      const double scaled = x[i] * n_;
      const double rounded = std::round(scaled);
      if (std::abs(scaled - rounded) > 1e-9)
        throw PreconditionError("point is not on the lattice of mesh 1/" + std::to_string(n_));
      v[i] = int(rounded);
    }
    return v;
  }

  friend bool operator==(const GridSpec&, const GridSpec&) = default;

 private:
  int n_;
};

/// Real-valued function on the lattice, identically zero outside the stored
/// region [-halo, n+halo]^4. Box fields have halo 0; operators that reach
/// beyond the box return fields with a wider halo.
class Field {
 public:
  explicit Field(GridSpec grid, int halo = 0)
      : grid_(grid), halo_(halo), side_(grid.side() + 2 * std::size_t(halo)) {
    if (halo < 0) throw PreconditionError("Field: negative halo");
    values_.assign(side_ * side_ * side_ * side_, 0.0);
  }

  template <typename F>
  static Field from_function(GridSpec grid, F&& f) {
    Field out(grid);
    for (std::size_t k = 0; k < out.values_.size(); ++k) out.values_[k] = f(out.site(k));
    return out;
  }

  static Field delta(GridSpec grid, const Site& at, double value = 1.0) {
    if (!grid.contains(at)) throw PreconditionError("Field::delta: site outside box");
    Field out(grid);
    out.at(at) = value;
    return out;
  }

  const GridSpec& grid() const { return grid_; }
  int halo() const { return halo_; }
  int lo() const { return -halo_; }
  int hi() const { return grid_.n() + halo_; }
  std::size_t side() const { return side_; }
  std::size_t size() const { return values_.size(); }

  bool stores(const Site& v) const {
    for (int c : v)
      if (c < lo() || c > hi()) return false;
    return true;
  }

  std::size_t index(const Site& v) const {
    const std::size_t s = side_;
    std::size_t k = 0;
    for (int c : v) k = k * s + std::size_t(c + halo_);
    return k;
  }

  Site site(std::size_t k) const {
    Site v{};
    for (int i = kDim - 1; i >= 0; --i) {
      v[i] = int(k % side_) - halo_;
      k /= side_;
    }
    return v;
  }

  /// Value at any lattice site; zero outside the stored region.
  double operator()(const Site& v) const { return stores(v) ? values_[index(v)] : 0.0; }

  double& at(const Site& v) {
    if (!stores(v)) throw PreconditionError("Field::at: site outside stored region");
    return values_[index(v)];
  }

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }

  /// Values on the box only. Anything stored in the halo is dropped.
  Field restricted() const {
    if (halo_ == 0) return *this;
    Field out(grid_);
    for (std::size_t k = 0; k < out.values_.size(); ++k) out.values_[k] = (*this)(out.site(k));
    return out;
  }

  /// Same values, stored with a wider halo.
  Field widened(int halo) const {
    if (halo < halo_) throw PreconditionError("Field::widened: cannot shrink");
    Field out(grid_, halo);
    for (std::size_t k = 0; k < values_.size(); ++k) out.at(site(k)) = values_[k];
    return out;
  }

  Field& operator+=(const Field& other) { return axpy(1.0, other); }
  Field& operator-=(const Field& other) { return axpy(-1.0, other); }
  Field& operator*=(double a) {
    for (double& x : values_) x *= a;
    return *this;
  }

  Field& axpy(double a, const Field& other) {
    if (!(other.grid_ == grid_)) throw PreconditionError("Field: grid mismatch");
    if (other.halo_ > halo_) *this = widened(other.halo_);
    if (other.halo_ == halo_) {
      for (std::size_t k = 0; k < values_.size(); ++k) values_[k] += a * other.values_[k];
    } else {
      for (std::size_t k = 0; k < other.values_.size(); ++k)
        values_[index(other.site(k))] += a * other.values_[k];
    }
    return *this;
  }

  friend Field operator-(Field a, const Field& b) { return a -= b; }
  friend Field operator+(Field a, const Field& b) { return a += b; }
  friend Field operator*(double s, Field a) { return a *= s; }

 private:
  GridSpec grid_;
  int halo_;
  std::size_t side_;
  std::vector<double> values_;
};

struct StencilEntry {
  Site offset;
  double coefficient;
};

/// Finite list of (offset, coefficient) pairs in lattice units.
struct Stencil {
  std::vector<StencilEntry> entries;

  int reach() const {
    int r = 0;
    for (const auto& e : entries)
      for (int c : e.offset) r = std::max(r, std::abs(c));
    return r;
  }

  double sum() const {
    double s = 0.0;
    for (const auto& e : entries) s += e.coefficient;
    return s;
  }

  double coefficient(const Site& offset) const {
    for (const auto& e : entries)
      if (e.offset == offset) return e.coefficient;
    return 0.0;
  }
};

/// Nine-point lattice Laplacian (unit mesh).
inline Stencil laplacian_stencil() {
  Stencil s;
  s.entries.push_back({{0, 0, 0, 0}, -2.0 * kDim});
  for (int a = 0; a < kDim; ++a) {
    s.entries.push_back({unit(a, 1), 1.0});
    s.entries.push_back({unit(a, -1), 1.0});
  }
  return s;
}

/// Self-convolution of two stencils.
inline Stencil convolve(const Stencil& a, const Stencil& b) {
  Stencil out;
  for (const auto& x : a.entries) {
    for (const auto& y : b.entries) {
      const Site off = x.offset + y.offset;
      auto it = std::find_if(out.entries.begin(), out.entries.end(),
                             [&](const StencilEntry& e) { return e.offset == off; });
      if (it == out.entries.end())
        out.entries.push_back({off, x.coefficient * y.coefficient});
      else
        it->coefficient += x.coefficient * y.coefficient;
    }
  }
  std::erase_if(out.entries, [](const StencilEntry& e) { return e.coefficient == 0.0; });
  std::sort(out.entries.begin(), out.entries.end(),
            [](const StencilEntry& x, const StencilEntry& y) { return x.offset < y.offset; });
  return out;
}

/// 33-point Bilaplacian: 72 at the center, -16 on axis neighbours, 2 on
/// diagonal pairs, 1 at double steps.
inline Stencil bilaplacian_stencil() { return convolve(laplacian_stencil(), laplacian_stencil()); }

/// Applies `stencil * scale`; the result's halo grows by the stencil reach.
inline Field apply_stencil(const Field& f, const Stencil& stencil, double scale = 1.0) {
  Field out(f.grid(), f.halo() + stencil.reach());
  auto values = out.values();
  for (std::size_t k = 0; k < values.size(); ++k) {
    const Site v = out.site(k);
    double acc = 0.0;
    for (const auto& e : stencil.entries) acc += e.coefficient * f(v + e.offset);
    values[k] = scale * acc;
  }
  return out;
}

enum class Direction { forward, backward };

/// D^h_{±a}: forward (v(x+he_a)-v(x))/h or backward (v(x)-v(x-he_a))/h.
inline Field apply_diff(const Field& f, int axis, Direction dir) {
  if (axis < 0 || axis >= kDim) throw PreconditionError("apply_diff: axis out of range");
  const double inv_h = f.grid().n();
  Field out(f.grid(), f.halo() + 1);
  auto values = out.values();
  const Site e = unit(axis);
  for (std::size_t k = 0; k < values.size(); ++k) {
    const Site v = out.site(k);
    values[k] = dir == Direction::forward ? inv_h * (f(v + e) - f(v)) : inv_h * (f(v) - f(v - e));
  }
  return out;
}

/// Mixed second difference D^h_i D^h_{-j}.
inline Field apply_mixed_diff(const Field& f, int i, int j) {
  return apply_diff(apply_diff(f, j, Direction::backward), i, Direction::forward);
}

inline Field apply_laplacian(const Field& f) {
  const double inv_h2 = double(f.grid().n()) * f.grid().n();
  return apply_stencil(f, laplacian_stencil(), inv_h2);
}

/// Δ_h ∘ Δ_h.
inline Field apply_bilaplacian(const Field& f) { return apply_laplacian(apply_laplacian(f)); }

/// Same operator through the 33-point stencil.
inline Field apply_bilaplacian_stencil(const Field& f) {
  const double n = f.grid().n();
  return apply_stencil(f, bilaplacian_stencil(), n * n * n * n);
}

/// (u, v)_{L^2_h} over the whole lattice.
inline double inner_product(const Field& u, const Field& v) {
  const Field& wide = u.halo() >= v.halo() ? u : v;
  const Field& other = u.halo() >= v.halo() ? v : u;
  double s = 0.0;
  auto values = wide.values();
  for (std::size_t k = 0; k < values.size(); ++k) s += values[k] * other(wide.site(k));
  const double h = u.grid().h();
  return s * h * h * h * h;
}

struct Norms {
  double l2h = 0.0;
  double linfh = 0.0;
  double w22h = 0.0;
  double gradient_l2h = 0.0;
  double hessian_l2h = 0.0;
};

namespace detail {

/// Copy of a field into a dense array with `pad` extra zero layers, plus the
/// strides needed for fast stencil loops.
struct Padded {
  int lo = 0;
  int side = 0;
  std::array<std::ptrdiff_t, kDim> stride{};
  std::vector<double> data;

  Padded(const Field& f, int pad) : lo(f.lo() - pad), side(int(f.side()) + 2 * pad) {
    stride[3] = 1;
    for (int a = 2; a >= 0; --a) stride[a] = stride[a + 1] * side;
    data.assign(std::size_t(side) * side * side * side, 0.0);
    auto values = f.values();
    for (std::size_t k = 0; k < values.size(); ++k) {
      const Site v = f.site(k);
      data[offset(v)] = values[k];
    }
  }

  std::ptrdiff_t offset(const Site& v) const {
    std::ptrdiff_t k = 0;
    for (int a = 0; a < kDim; ++a) k += (v[a] - lo) * stride[a];
    return k;
  }

  /// Calls fn(flat offset) for every site with coordinates in [from, to]^4.
  template <typename Fn>
  void for_range(int from, int to, Fn&& fn) const {
    for (int a = from; a <= to; ++a)
      for (int b = from; b <= to; ++b)
        for (int c = from; c <= to; ++c) {
          std::ptrdiff_t k = offset({a, b, c, from});
          for (int d = from; d <= to; ++d, ++k) fn(k);
        }
  }
};

}  // namespace detail

/// L^2_h, L^∞_h and W^{2,2}_h norms over all of (hZ)^4, the Hessian built
/// from the mixed differences D^h_i D^h_{-j}.
inline Norms norms(const Field& f) {
  const detail::Padded p(f, 2);
  const double n = f.grid().n();
  const double h4 = 1.0 / (n * n * n * n);
  double l2 = 0.0, linf = 0.0, grad = 0.0, hess = 0.0;
  p.for_range(f.lo() - 1, f.hi() + 1, [&](std::ptrdiff_t k) {
    const double u = p.data[k];
    l2 += u * u;
    linf = std::max(linf, std::abs(u));
    for (int i = 0; i < kDim; ++i) {
      const double d = p.data[k + p.stride[i]] - u;
      grad += d * d;
      for (int j = 0; j < kDim; ++j) {
        const double m = p.data[k + p.stride[i]] - p.data[k + p.stride[i] - p.stride[j]] - u +
                         p.data[k - p.stride[j]];
        hess += m * m;
      }
    }
  });
  Norms out;
  out.l2h = std::sqrt(h4 * l2);
  out.linfh = linf;
  out.gradient_l2h = std::sqrt(h4 * grad * n * n);
  out.hessian_l2h = std::sqrt(h4 * hess * n * n * n * n);
  out.w22h = std::sqrt(out.l2h * out.l2h + out.gradient_l2h * out.gradient_l2h +
                       out.hessian_l2h * out.hessian_l2h);
  return out;
}

/// Radial quintic smoothstep: 1 on [0, 1/2], 0 on [1, ∞), C² in between.
inline double cutoff_profile(double t) {
  if (t <= 0.5) return 1.0;
  if (t >= 1.0) return 0.0;
  const double s = 2.0 * t - 1.0;
  return 1.0 - s * s * s * (10.0 - 15.0 * s + 6.0 * s * s);
}

/// η((x - center) / radius) for continuous points.
inline double cutoff_value(const Point& center, double radius, const Point& x) {
  if (!(radius > 0.0)) throw PreconditionError("cutoff: radius must be positive");
  Point d{};
  for (int i = 0; i < kDim; ++i) d[i] = x[i] - center[i];
  return cutoff_profile(euclidean_norm(d) / radius);
}

/// Lattice restriction of the cutoff around `center` at scale `radius`
/// (mesh units).
inline Field cutoff(const GridSpec& grid, const Site& center, double radius) {
  const Point c = grid.position(center);
  return Field::from_function(grid, [&](const Site& v) { return cutoff_value(c, radius, grid.position(v)); });
}

// -- serialization ---------------------------------------------------------

inline constexpr char kFieldMagic[4] = {'M', 'B', 'F', '1'};

namespace detail {

template <typename T>
T to_little_endian(T value) {
  if constexpr (std::endian::native == std::endian::little) {
    return value;
  } else {
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &value, sizeof(T));
    std::reverse(bytes, bytes + sizeof(T));
    std::memcpy(&value, bytes, sizeof(T));
    return value;
  }
}

}  // namespace detail

/// 16-byte header ("MBF1", n as u32 LE, 8 reserved zero bytes) followed by
/// (n+1)^4 little-endian doubles in lexicographic site order.
inline void write_field(std::ostream& os, const Field& f) {
  if (f.halo() != 0) throw PreconditionError("write_field: only box fields can be serialized");
  os.write(kFieldMagic, 4);
  const std::uint32_t n = detail::to_little_endian(std::uint32_t(f.grid().n()));
  os.write(reinterpret_cast<const char*>(&n), 4);
  const char reserved[8] = {};
  os.write(reserved, 8);
  for (double v : f.values()) {
    const double le = detail::to_little_endian(v);
    os.write(reinterpret_cast<const char*>(&le), 8);
  }
  if (!os) throw std::runtime_error("write_field: stream error");
}

inline Field read_field(std::istream& is) {
  char magic[4];
  std::uint32_t n = 0;
  char reserved[8];
  is.read(magic, 4);
  is.read(reinterpret_cast<char*>(&n), 4);
  is.read(reserved, 8);
  if (!is || std::memcmp(magic, kFieldMagic, 4) != 0)
    throw std::runtime_error("read_field: bad header");
  n = detail::to_little_endian(n);
  if (n == 0 || n > 4096) throw std::runtime_error("read_field: implausible grid size");
  Field f{GridSpec(int(n))};
  for (double& v : f.values()) {
    is.read(reinterpret_cast<char*>(&v), 8);
    v = detail::to_little_endian(v);
  }
  if (!is) throw std::runtime_error("read_field: truncated data");
  return f;
}

inline constexpr int kJsonMaxN = 8;

inline nlohmann::json to_json(const Field& f) {
  if (f.halo() != 0) throw PreconditionError("to_json: only box fields can be exported");
  if (f.grid().n() > kJsonMaxN) throw PreconditionError("to_json: JSON export is limited to n <= 8");
  nlohmann::json j;
  j["n"] = f.grid().n();
  j["h"] = f.grid().h();
  j["values"] = std::vector<double>(f.values().begin(), f.values().end());
  return j;
}

inline Field field_from_json(const nlohmann::json& j) {
  Field f{GridSpec(j.at("n").get<int>())};
  const auto values = j.at("values").get<std::vector<double>>();
  if (values.size() != f.size()) throw std::runtime_error("field_from_json: size mismatch");
  std::copy(values.begin(), values.end(), f.values().begin());
  return f;
}

}  // namespace membrane::lattice
