// Copyright 2026 The tgbs Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Sector-resolved click-count moments of a sub-ensemble.
//
// For the kernel B' of n clicked modes, let E_s[l] be the pair-sector-l
// weight summed over all size-s deletions T:  E_s[l] = sum_{|T|=s} g_l(B' \ T).
// Each deletion is the vacuum projector on T, so with A_s the sector weight of
// sum_{|T|=s} prod_{i in T} click_i,
//   A_s = sum_{r=0}^{s} (-1)^r C(n - r, s - r) E_r,
// and the raw moments follow from  nu^j = sum_s St2(j, s) s! C(nu, s):
//   S_j = (1/Z') sum_{s=1}^{j} St2(j, s) s! A_s,   S_0 = E_0 / Z'.
//
// Two routes produce E: a reference route that diagonalizes every deleted
// submatrix, and a fast route that evaluates every deletion at each Fourier
// node through a bounded-size determinant ratio of one cached resolvent.

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tgbs/errors.hpp"
#include "tgbs/linalg.hpp"
#include "tgbs/model.hpp"
#include "tgbs/parallel.hpp"
#include "tgbs/partition.hpp"

namespace tgbs {

inline constexpr std::size_t kMaxMomentOrder = 4;
inline constexpr std::size_t kNaiveMomentGuard = 12;
inline constexpr std::uint64_t kDefaultMemoryBudget = std::uint64_t{8} << 30;

struct ElementarySums {
  std::size_t n_sub = 0;
  std::size_t max_order = kMaxMomentOrder;
  SpectralGrid grid;
  std::array<std::vector<double>, kMaxMomentOrder + 1> sums;  // sums[s][l]
  std::uint64_t subsets = 0;                                   // deletions accumulated
};

struct MomentOptions {
  std::size_t max_order = kMaxMomentOrder;
  std::size_t naive_guard = kNaiveMomentGuard;
  std::uint64_t memory_budget = kDefaultMemoryBudget;  // bytes
  unsigned threads = 1;
};

inline double binomial(std::size_t n, std::size_t k) {
  if (k > n) return 0.0;
  double r = 1.0;
  for (std::size_t i = 1; i <= k; ++i) r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
  return std::round(r);
}

/// Lexicographic successor of a sorted k-subset of [0, n); false at the end.
inline bool next_combination(std::vector<std::size_t>& c, std::size_t n) {
  const std::size_t k = c.size();
  for (std::size_t i = k; i-- > 0;) {
    if (c[i] < n - k + i) {
      ++c[i];
      for (std::size_t j = i + 1; j < k; ++j) c[j] = c[j - 1] + 1;
      return true;
    }
  }
  return false;
}

namespace detail {

inline void check_order(std::size_t order) {
  if (order > kMaxMomentOrder) throw ValidationError("moment order above 4 is not supported");
}

inline std::uint64_t count_subsets(std::size_t n, std::size_t max_order) {
  std::uint64_t c = 0;
  for (std::size_t s = 0; s <= std::min(n, max_order); ++s) c += static_cast<std::uint64_t>(binomial(n, s));
  return c;
}

}  // namespace detail

/// Reference route: one Hermitian eigendecomposition per deletion.
inline ElementarySums elementary_sums_naive(const KernelMatrix& sub, const SpectralGrid& grid,
                                            const MomentOptions& options = {}) {
  detail::check_order(options.max_order);
  const std::size_t n = sub.dim();
  if (n > options.naive_guard)
    throw ResourceError("naive elementary sums: n_sub = " + std::to_string(n) + " exceeds guard " +
                        std::to_string(options.naive_guard));
  ElementarySums e;
  e.n_sub = n;
  e.max_order = options.max_order;
  e.grid = grid;
  for (std::size_t s = 0; s <= options.max_order; ++s) {
    std::vector<CompensatedSum> acc(grid.l_max + 1);
    if (s <= n) {
      std::vector<std::size_t> t(s);
      for (std::size_t i = 0; i < s; ++i) t[i] = i;
      do {
        const auto g = spectrum_on_grid(pair_eigvals(remove_modes(sub, t)), grid);
        for (std::size_t l = 0; l <= grid.l_max; ++l) acc[l].add(g[l]);
        ++e.subsets;
      } while (s > 0 && next_combination(t, n));
    }
    e.sums[s].resize(grid.l_max + 1);
    for (std::size_t l = 0; l <= grid.l_max; ++l) e.sums[s][l] = acc[l].value();
  }
  return e;
}

/// Bytes held by one resolvent cache plus its construction temporaries.
inline std::uint64_t resolvent_cache_bytes(std::size_t n) {
  return static_cast<std::uint64_t>(sizeof(Complex)) * (4 * n * n + 6 * n * n);
}

/// Fast route. Per Fourier node: one O(n^3) resolvent, then every deletion
/// of size <= max_order through an (2s x 2s) determinant ratio. Sums over
/// deletions are formed node by node, so only max_order + 1 inverse DFTs run.
inline ElementarySums elementary_sums_fast(const KernelMatrix& sub, const SpectralGrid& grid,
                                           const MomentOptions& options = {}) {
  detail::check_order(options.max_order);
  const std::size_t n = sub.dim();
  if (n == 0) throw ValidationError("elementary sums need n_sub >= 1");
  const std::size_t order = std::min(options.max_order, n);
  const std::size_t half = grid.nodes / 2 + 1;

  const std::uint64_t per_cache = resolvent_cache_bytes(n);
  const std::uint64_t samples = static_cast<std::uint64_t>(sizeof(Complex)) * half * (kMaxMomentOrder + 1);
  if (per_cache + samples > options.memory_budget)
    throw ResourceError("elementary sums: one resolvent cache needs " + std::to_string(per_cache + samples) +
                        " bytes, above the memory budget of " + std::to_string(options.memory_budget) +
                        "; use the naive path or a lower moment order");
  const unsigned workers = static_cast<unsigned>(std::max<std::uint64_t>(
      1, std::min<std::uint64_t>(resolve_threads(options.threads), (options.memory_budget - samples) / per_cache)));

  const RealVector lambda = pair_eigvals(sub);
  const double norm_sq = lambda.size() == 0 ? 0.0 : lambda.maxCoeff();
  if (grid.radius > 1.0 && !(grid.radius * norm_sq < 1.0))
    throw ValidationError("contour radius must keep radius * lambda_max below 1");
  std::array<std::vector<Complex>, kMaxMomentOrder + 1> phi;
  for (auto& v : phi) v.assign(half, 0.0);

  parallel_for(half, workers, [&](std::size_t j) {
    const Complex w = grid_point(grid, j);
    const Complex f = char_fn_from_eigvals(lambda, w);
    phi[0][j] = f;
    if (order == 0) return;
    const ResolventCache cache(sub.matrix(), w, norm_sq);
    const ComplexMatrix& g = cache.inverse();
    const auto gi = [&](std::size_t a, std::size_t b) {
      return g(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b));
    };
    for (std::size_t s = 1; s <= order; ++s) {
      CompensatedComplexSum acc;
      std::vector<std::size_t> t(s);
      for (std::size_t i = 0; i < s; ++i) t[i] = i;
      std::array<std::size_t, 2 * kMaxMomentOrder> idx{};
      std::array<Complex, 64> y{};
      const std::size_t dim = 2 * s;
      do {
        for (std::size_t k = 0; k < s; ++k) {
          idx[2 * k] = t[k];
          idx[2 * k + 1] = n + t[k];
        }
        for (std::size_t a = 0; a < dim; ++a)
          for (std::size_t b = 0; b < dim; ++b) y[a * dim + b] = gi(idx[a], idx[b]);
        acc.add(detail::eliminate_block(y, dim).inv_sqrt);
      } while (next_combination(t, n));
      phi[s][j] = f * acc.value();
    }
  });

  ElementarySums e;
  e.n_sub = n;
  e.max_order = options.max_order;
  e.grid = grid;
  e.subsets = detail::count_subsets(n, options.max_order);
  for (std::size_t s = 0; s <= options.max_order; ++s) {
    if (s <= order) {
      e.sums[s] = coefficients_from_half_samples(phi[s], grid);
    } else {
      e.sums[s].assign(grid.l_max + 1, 0.0);
    }
  }
  return e;
}

/// Raw moments S_0..S_max_order of the click count per pair sector.
struct MomentTable {
  std::size_t n_sub = 0;
  double z_sub = 1.0;
  std::size_t max_order = kMaxMomentOrder;
  SpectralGrid grid;
  std::vector<std::array<double, kMaxMomentOrder + 1>> sectors;  // sectors[l][j]

  std::size_t sector_count() const { return sectors.size(); }
  double raw(std::size_t l, std::size_t j) const {
    if (j > max_order) throw ValidationError("moment order not computed");
    return sectors.at(l)[j];
  }
  std::span<const double> moments(std::size_t l) const {
    return std::span<const double>(sectors.at(l).data(), max_order + 1);
  }
  /// sum over sectors of S_j
  double total(std::size_t j) const {
    double s = 0.0;
    for (const auto& row : sectors) s += row.at(j);
    return s;
  }
};

inline MomentTable assemble_moments(const ElementarySums& e, double z_sub) {
  detail::check_order(e.max_order);
  const std::size_t sectors = e.grid.l_max + 1;
  for (std::size_t s = 0; s <= e.max_order; ++s)
    if (e.sums[s].size() != sectors) throw ValidationError("elementary sums are inconsistent with their grid");
  if (!(z_sub > 0.0)) throw ValidationError("sub-ensemble norm must be positive");
  // St2(j, s) * s! for j, s = 1..4
  static constexpr double kSurjections[5][5] = {
      {0, 0, 0, 0, 0}, {0, 1, 0, 0, 0}, {0, 1, 2, 0, 0}, {0, 1, 6, 6, 0}, {0, 1, 14, 36, 24}};
  const std::size_t n = e.n_sub;
  MomentTable table;
  table.n_sub = n;
  table.z_sub = z_sub;
  table.max_order = e.max_order;
  table.grid = e.grid;
  table.sectors.resize(sectors);
  for (std::size_t l = 0; l < sectors; ++l) {
    std::array<double, kMaxMomentOrder + 1> a{};
    for (std::size_t s = 1; s <= e.max_order; ++s) {
      if (s > n) continue;
      CompensatedSum acc;
      for (std::size_t r = 0; r <= s; ++r) {
        const double term = binomial(n - r, s - r) * e.sums[r][l];
        acc.add(r % 2 == 0 ? term : -term);
      }
      a[s] = acc.value();
    }
    auto& row = table.sectors[l];
    row.fill(0.0);
    row[0] = e.sums[0][l] / z_sub;
    for (std::size_t j = 1; j <= e.max_order; ++j) {
      double v = 0.0;
      for (std::size_t s = 1; s <= j; ++s) v += kSurjections[j][s] * a[s];
      row[j] = v / z_sub;
    }
  }
  return table;
}

/// Mean number of clicks, sum_i (1 - Z(B without mode i) / Z).
inline double mean_clicks(const KernelMatrix& kernel) {
  const double z = norm_z(kernel);
  double acc = 0.0;
  for (std::size_t i = 0; i < kernel.dim(); ++i) {
    const std::size_t t[1] = {i};
    acc += 1.0 - norm_z(remove_modes(kernel, t)) / z;
  }
  return acc;
}

}  // namespace tgbs
