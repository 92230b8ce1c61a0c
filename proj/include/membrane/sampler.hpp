#pragma once

// Exact sampling of the membrane field ψ ~ N(0, Q⁻¹), Q = Δ1ᵀΔ1 on the box.
//
// With A = Δ1 mapping box fields to the box dilated by one layer, Q = AᵀA.
// For ξ i.i.d. standard normal on the dilated box, ψ = Q⁻¹Aᵀξ has
// covariance Q⁻¹AᵀAQ⁻¹ = Q⁻¹. One CG solve per sample.

#include <cmath>
#include <cstdint>
#include <vector>

#include "membrane/batch.hpp"
#include "membrane/error.hpp"
#include "membrane/extremes.hpp"
#include "membrane/lattice.hpp"
#include "membrane/parallel.hpp"
#include "membrane/solver.hpp"

namespace membrane::sampler {

inline constexpr double kDefaultTolerance = 1e-6;

namespace detail {

// splitmix64 finalizer; the C++ standard library has no counter-based
// generator, and stream-splitting a sequential engine would make draws
// depend on the iteration order.
inline std::uint64_t mix(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

inline std::uint64_t counter_bits(std::uint64_t seed, std::uint64_t sample, std::uint64_t site, std::uint64_t lane) {
  return mix(mix(mix(mix(seed) ^ sample) ^ site) ^ lane);
}

// Uniform on (0, 1), never 0.
inline double to_unit(std::uint64_t bits) { return (double(bits >> 11) + 0.5) * 0x1.0p-53; }

}  // namespace detail

/// Standard normal keyed by (seed, sample, site), via Box–Muller.
inline double normal(std::uint64_t seed, std::uint64_t sample, std::uint64_t site) {
  const double u1 = detail::to_unit(detail::counter_bits(seed, sample, site, 0));
  const double u2 = detail::to_unit(detail::counter_bits(seed, sample, site, 1));
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

struct SampledField {
  lattice::Field field;
  solver::CgResult solve;
};

/// One draw; `sample` selects the stream. Throws SolverError on stagnation.
inline SampledField sample_field(const lattice::GridSpec& grid, std::uint64_t seed, double tol = kDefaultTolerance,
                                 std::uint64_t sample = 0) {
  if (!(tol > 0.0)) throw PreconditionError("sample_field: tol must be positive");
  const std::size_t side = std::size_t(grid.n()) + 3;
  std::vector<double> xi(side * side * side * side);
  for (std::size_t k = 0; k < xi.size(); ++k) xi[k] = normal(seed, sample, k);
  solver::BoxBilaplacian op(grid);
  std::vector<double> b(grid.site_count());
  op.apply_transpose_dilated(xi, b);
  SampledField out{lattice::Field(grid), {}};
  out.solve = solver::conjugate_gradient(grid, b, out.field.values(), {tol, 2000});
  if (!out.solve.converged) throw SolverError("sample_field: CG did not converge", out.solve.relative_residual);
  return out;
}

/// `count` independent samples with per-sample summaries.
inline SampleBatch sample_batch(const lattice::GridSpec& grid, std::uint64_t seed, std::size_t count,
                                double tol = kDefaultTolerance, bool keep_fields = false) {
  if (count < 1) throw PreconditionError("sample_batch: count must be at least 1");
  SampleBatch batch;
  batch.grid = grid;
  batch.seed = seed;
  batch.tolerance = tol;
  batch.samples.resize(count);
  std::vector<solver::CgResult> solves(count);
  if (keep_fields) batch.fields.assign(count, lattice::Field(grid));
  parallel_for(count, [&](std::size_t i) {
    SampledField s = sample_field(grid, seed, tol, i);
    batch.samples[i] = extremes::summarize(s.field, i);
    solves[i] = s.solve;
    if (keep_fields) batch.fields[i] = std::move(s.field);
  });
  for (const auto& s : solves) {
    batch.max_iterations = std::max(batch.max_iterations, s.iterations);
    batch.worst_residual = std::max(batch.worst_residual, s.relative_residual);
  }
  return batch;
}

}  // namespace membrane::sampler
