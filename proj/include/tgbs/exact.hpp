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

// Ground truth for small systems.
//
// * Fock expansion: the state exp(-1/2 sum B_ij a_i^dagger a_j^dagger)|0> built
//   sector by sector in the occupation basis, with no determinant formulas.
// * Inclusion-exclusion over vacuum projectors: the probability that exactly
//   the modes S click is
//     p(S) = (1/Z) sum_{T subset S} (-1)^{|T|} Z(B restricted to S \ T),
//   one Cholesky determinant per subset.

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "tgbs/errors.hpp"
#include "tgbs/linalg.hpp"
#include "tgbs/model.hpp"
#include "tgbs/parallel.hpp"
#include "tgbs/partition.hpp"

namespace tgbs {

// ---------------------------------------------------------------------------
// Fock-space oracle

inline constexpr std::size_t kFockMaxModes = 8;

/// Occupation vectors with a fixed photon total, ranked in lexicographic order.
class CompositionIndex {
 public:
  CompositionIndex(std::size_t modes, std::size_t max_total) : modes_(modes), max_total_(max_total) {
    const std::size_t rows = max_total + modes + 1;
    binom_.assign(rows * (modes + 1), 0);
    for (std::size_t a = 0; a < rows; ++a) {
      binom_[a * (modes + 1)] = 1;
      for (std::size_t b = 1; b <= std::min(a, modes); ++b)
        binom_[a * (modes + 1) + b] =
            binom_[(a - 1) * (modes + 1) + b - 1] + (b <= a - 1 ? binom_[(a - 1) * (modes + 1) + b] : 0);
    }
  }

  std::size_t modes() const { return modes_; }

  /// Number of occupation vectors with the given total.
  std::uint64_t count(std::size_t total) const { return count(total, modes_); }

  std::uint64_t rank(std::span<const std::uint16_t> occ) const {
    std::size_t remaining = 0;
    for (auto v : occ) remaining += v;
    std::uint64_t r = 0;
    for (std::size_t i = 0; i + 1 < modes_; ++i) {
      const std::size_t k = modes_ - i - 1;
      r += binom(remaining + k, k) - binom(remaining - occ[i] + k, k);
      remaining -= occ[i];
    }
    return r;
  }

  /// First occupation vector (lexicographically) with the given total.
  std::vector<std::uint16_t> first(std::size_t total) const {
    std::vector<std::uint16_t> occ(modes_, 0);
    occ.back() = static_cast<std::uint16_t>(total);
    return occ;
  }

  /// Advances to the lexicographic successor; false after the last one.
  static bool next(std::vector<std::uint16_t>& occ) {
    const std::size_t m = occ.size();
    std::size_t tail = occ[m - 1];
    for (std::size_t i = m - 1; i-- > 0;) {
      if (tail > 0) {
        ++occ[i];
        for (std::size_t k = i + 1; k + 1 < m; ++k) occ[k] = 0;
        occ[m - 1] = static_cast<std::uint16_t>(tail - 1);
        return true;
      }
      tail += occ[i];
    }
    return false;
  }

 private:
  std::uint64_t binom(std::size_t a, std::size_t b) const { return binom_[a * (modes_ + 1) + b]; }
  std::uint64_t count(std::size_t total, std::size_t parts) const {
    return parts == 0 ? (total == 0 ? 1 : 0) : binom(total + parts - 1, parts - 1);
  }

  std::size_t modes_;
  std::size_t max_total_;
  std::vector<std::uint64_t> binom_;
};

struct FockOptions {
  std::uint64_t max_states = 60'000'000;
};

/// Truncated state: sectors[p] holds the amplitudes of all 2p-photon basis
/// states in CompositionIndex order.
struct FockState {
  std::size_t modes = 0;
  std::size_t cutoff = 0;
  std::vector<std::vector<Complex>> sectors;

  double sector_norm(std::size_t p) const {
    double s = 0.0;
    for (const auto& a : sectors.at(p)) s += std::norm(a);
    return s;
  }
  double squared_norm() const {
    double s = 0.0;
    for (std::size_t p = 0; p < sectors.size(); ++p) s += sector_norm(p);
    return s;
  }
  /// Amplitude of an occupation vector (zero beyond the cutoff or odd totals).
  Complex amplitude(std::span<const std::uint16_t> occ) const {
    if (occ.size() != modes) throw ValidationError("occupation vector length mismatch");
    std::size_t total = 0;
    for (auto v : occ) total += v;
    if (total % 2 == 1 || total > cutoff) return 0.0;
    const CompositionIndex index(modes, total);
    return sectors[total / 2][index.rank(occ)];
  }
};

namespace detail {

/// Applies (1/p) Q with Q = -1/2 sum_ij B_ij a_i^dagger a_j^dagger to the
/// (2p-2)-photon sector, producing the 2p-photon sector.
inline std::vector<Complex> fock_raise(const ComplexMatrix& b, const CompositionIndex& index,
                                       std::size_t p, const std::vector<Complex>& source) {
  const std::size_t m = index.modes();
  std::vector<Complex> target(index.count(2 * p), 0.0);
  auto occ = index.first(2 * p - 2);
  std::size_t s = 0;
  const double inv_p = 1.0 / static_cast<double>(p);
  do {
    const Complex amp = source[s++] * inv_p;
    if (amp != Complex(0.0)) {
      for (std::size_t i = 0; i < m; ++i) {
        const double ni = occ[i];
        ++occ[i];
        {
          // i == j: -1/2 B_ii (a_i^dagger)^2
          ++occ[i];
          const double f = std::sqrt((ni + 1.0) * (ni + 2.0));
          target[index.rank(occ)] -= 0.5 * b(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) * f * amp;
          --occ[i];
        }
        for (std::size_t j = i + 1; j < m; ++j) {
          // i != j appears twice in the symmetric sum.
          const double nj = occ[j];
          ++occ[j];
          const double f = std::sqrt((ni + 1.0) * (nj + 1.0));
          target[index.rank(occ)] -= b(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) * f * amp;
          --occ[j];
        }
        --occ[i];
      }
    }
  } while (CompositionIndex::next(occ));
  return target;
}

inline void check_fock_dims(const KernelMatrix& kernel) {
  if (kernel.dim() > kFockMaxModes)
    throw ResourceError("Fock expansion supports at most 8 modes, got " + std::to_string(kernel.dim()));
}

}  // namespace detail

/// Streams sectors p = 0, 1, ... to visit(p, index, amplitudes); stops after
/// the visitor returns false or after sector max_pairs.
template <typename Visitor>
void fock_visit_sectors(const KernelMatrix& kernel, std::size_t max_pairs, Visitor&& visit,
                        const FockOptions& options = {}) {
  detail::check_fock_dims(kernel);
  const std::size_t m = std::max<std::size_t>(kernel.dim(), 1);
  const CompositionIndex index(m, 2 * max_pairs + 2);
  ComplexMatrix b = kernel.matrix();
  if (kernel.dim() == 0) b = ComplexMatrix::Zero(1, 1);
  std::vector<Complex> sector{1.0};
  std::uint64_t states = 1;
  if (!visit(std::size_t{0}, index, std::span<const Complex>(sector))) return;
  for (std::size_t p = 1; p <= max_pairs; ++p) {
    states += index.count(2 * p);
    if (states > options.max_states)
      throw ResourceError("Fock expansion exceeds the state budget of " + std::to_string(options.max_states));
    sector = detail::fock_raise(b, index, p, sector);
    if (!visit(p, index, std::span<const Complex>(sector))) return;
  }
}

/// Full truncated state up to `cutoff` photons (even).
inline FockState fock_expand(const KernelMatrix& kernel, std::size_t cutoff, const FockOptions& options = {}) {
  if (cutoff % 2 == 1) throw ValidationError("Fock cutoff must be even");
  detail::check_fock_dims(kernel);
  FockState state;
  state.modes = std::max<std::size_t>(kernel.dim(), 1);
  state.cutoff = cutoff;
  fock_visit_sectors(
      kernel, cutoff / 2,
      [&](std::size_t, const CompositionIndex&, std::span<const Complex> amps) {
        state.sectors.emplace_back(amps.begin(), amps.end());
        return true;
      },
      options);
  return state;
}

struct FockClickTable {
  std::size_t cutoff = 0;        // photons
  double captured_norm = 0.0;    // squared norm of the truncated state
  std::vector<double> by_mask;   // unnormalized weight per click mask (bit i = mode i)
  std::vector<double> by_pairs;  // squared norm per pair sector
};

/// Grows the Fock expansion until the captured norm reaches (1 - rel_tol) Z
/// and bins |amplitude|^2 by the set of occupied modes.
inline FockClickTable fock_click_table(const KernelMatrix& kernel, double rel_tol = 1e-8,
                                       std::size_t max_pairs = 4096, const FockOptions& options = {}) {
  detail::check_fock_dims(kernel);
  const double z = norm_z(kernel);
  FockClickTable table;
  const std::size_t m = std::max<std::size_t>(kernel.dim(), 1);
  table.by_mask.assign(std::size_t{1} << m, 0.0);
  bool reached = false;
  fock_visit_sectors(
      kernel, max_pairs,
      [&](std::size_t p, const CompositionIndex& index, std::span<const Complex> amps) {
        auto occ = index.first(2 * p);
        double sector = 0.0;
        std::size_t s = 0;
        do {
          std::size_t mask = 0;
          for (std::size_t i = 0; i < m; ++i)
            if (occ[i] > 0) mask |= std::size_t{1} << i;
          const double w = std::norm(amps[s++]);
          table.by_mask[mask] += w;
          sector += w;
        } while (CompositionIndex::next(occ));
        table.by_pairs.push_back(sector);
        table.captured_norm += sector;
        table.cutoff = 2 * p;
        reached = table.captured_norm >= (1.0 - rel_tol) * z;
        return !reached;
      },
      options);
  if (!reached)
    throw ResourceError("Fock expansion did not capture (1 - " + std::to_string(rel_tol) +
                        ") of the norm within " + std::to_string(max_pairs) + " pairs");
  return table;
}

struct FockNorm {
  double squared_norm = 0.0;
  std::size_t cutoff = 0;  // photons
  double tail_estimate = 0.0;
};

/// Squared norm of the Fock expansion, grown until the geometric tail
/// estimate of the remaining sectors drops below rel_tol of the captured norm.
/// The stopping rule never consults the determinant formula.
inline FockNorm fock_squared_norm(const KernelMatrix& kernel, double rel_tol = 1e-10,
                                  std::size_t max_pairs = 4096, const FockOptions& options = {}) {
  FockNorm out;
  double prev = 0.0;
  bool reached = false;
  fock_visit_sectors(
      kernel, max_pairs,
      [&](std::size_t p, const CompositionIndex&, std::span<const Complex> amps) {
        double sector = 0.0;
        for (const auto& a : amps) sector += std::norm(a);
        out.squared_norm += sector;
        out.cutoff = 2 * p;
        if (p >= 2) {
          if (sector == 0.0) {
            out.tail_estimate = 0.0;
            reached = true;
          } else if (sector < prev) {
            const double rho = sector / prev;
            out.tail_estimate = sector * rho / (1.0 - rho);
            reached = out.tail_estimate < rel_tol * out.squared_norm;
          }
        }
        prev = sector;
        return !reached;
      },
      options);
  if (!reached)
    throw ResourceError("Fock norm series did not settle within " + std::to_string(max_pairs) + " pairs");
  return out;
}

/// Fock-oracle outcome probability, normalized by the captured norm.
inline double fock_outcome_prob(const KernelMatrix& kernel, const OutcomePattern& pattern,
                                double rel_tol = 1e-8) {
  if (pattern.size() != kernel.dim()) throw ValidationError("pattern length does not match kernel");
  const auto table = fock_click_table(kernel, rel_tol);
  std::size_t mask = 0;
  for (auto i : pattern.clicked_modes()) mask |= std::size_t{1} << i;
  return table.by_mask[mask] / table.captured_norm;
}

// ---------------------------------------------------------------------------
// Inclusion-exclusion

inline constexpr std::size_t kExactClickGuard = 24;
inline constexpr std::size_t kExactDistributionGuard = 20;
inline constexpr std::size_t kExactSectorGuard = 16;

struct ExactOptions {
  std::size_t max_clicked = kExactClickGuard;           // exact_outcome_prob
  std::size_t max_modes = kExactDistributionGuard;      // exact_click_distribution
  std::size_t max_sector_modes = kExactSectorGuard;     // exact_sector_click_distribution
  unsigned threads = 1;
  std::function<void(const std::string&)> warn;         // "this will be slow" channel
};

namespace detail {

inline void check_guard(std::size_t value, std::size_t limit, std::size_t default_limit, const char* what,
                        const ExactOptions& options) {
  if (value > limit)
    throw ResourceError(std::string(what) + ": size " + std::to_string(value) + " exceeds guard " +
                        std::to_string(limit));
  if (value > default_limit && options.warn)
    options.warn(std::string(what) + ": size " + std::to_string(value) +
                 " is above the default guard; this will be slow");
}

/// log det of the Hermitian positive definite principal block of `o` on the
/// interleaved indices (k, n + k) for each kept mode k. `work` is scratch.
inline double pair_block_log_det(const ComplexMatrix& o, std::size_t n, std::span<const std::size_t> kept,
                                 std::vector<Complex>& work) {
  const std::size_t d = 2 * kept.size();
  if (d == 0) return 0.0;
  work.resize(d * d);
  auto idx = [&](std::size_t a) {
    return static_cast<Eigen::Index>(a % 2 == 0 ? kept[a / 2] : n + kept[a / 2]);
  };
  for (std::size_t a = 0; a < d; ++a)
    for (std::size_t c = 0; c <= a; ++c) work[a * d + c] = o(idx(a), idx(c));
  double log_det = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    double diag = work[j * d + j].real();
    for (std::size_t k = 0; k < j; ++k) diag -= std::norm(work[j * d + k]);
    if (!(diag > 0.0)) throw ValidationError("non-physical kernel: vacuum Gram matrix is not positive definite");
    const double l = std::sqrt(diag);
    work[j * d + j] = l;
    log_det += 2.0 * std::log(l);
    const double inv_l = 1.0 / l;
    for (std::size_t i = j + 1; i < d; ++i) {
      Complex v = work[i * d + j];
      for (std::size_t k = 0; k < j; ++k) v -= work[i * d + k] * std::conj(work[j * d + k]);
      work[i * d + j] = v * inv_l;
    }
  }
  return log_det;
}

/// V(K) = Z(B_K) / Z for every subset K of the n modes (bit i = mode i).
inline std::vector<double> vacuum_ratios(const KernelMatrix& kernel, unsigned threads) {
  const std::size_t n = kernel.dim();
  const ComplexMatrix o = pair_block_matrix(kernel.matrix());
  const double log_z = std::log(norm_z(kernel));
  const std::size_t total = std::size_t{1} << n;
  std::vector<double> v(total);
  const std::size_t block = std::min<std::size_t>(total, 1024);
  parallel_for(total / block, threads, [&](std::size_t bi) {
    std::vector<Complex> work;
    std::vector<std::size_t> kept;
    for (std::size_t mask = bi * block; mask < (bi + 1) * block; ++mask) {
      kept.clear();
      for (std::size_t i = 0; i < n; ++i)
        if (mask >> i & 1U) kept.push_back(i);
      v[mask] = std::exp(-0.5 * pair_block_log_det(o, n, kept, work) - log_z);
    }
  });
  return v;
}

/// In-place subset Moebius transform: f(S) <- sum_{K subset S} (-1)^{|S\K|} f(K).
inline void moebius_transform(std::vector<double>& f, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t bit = std::size_t{1} << i;
    for (std::size_t mask = 0; mask < f.size(); ++mask)
      if (mask & bit) f[mask] -= f[mask ^ bit];
  }
}

}  // namespace detail

/// Exact probability of `pattern`: 2^n Cholesky determinants, n = clicks,
/// visited in Gray-code order with compensated per-block sums.
inline double exact_outcome_prob(const KernelMatrix& kernel, const OutcomePattern& pattern,
                                 const ExactOptions& options = {}) {
  if (pattern.size() != kernel.dim())
    throw ValidationError("pattern length " + std::to_string(pattern.size()) + " does not match mode count " +
                          std::to_string(kernel.dim()));
  const auto clicked = pattern.clicked_modes();
  const std::size_t n = clicked.size();
  detail::check_guard(n, options.max_clicked, kExactClickGuard, "exact_outcome_prob", options);
  const std::size_t m = kernel.dim();
  const ComplexMatrix o = pair_block_matrix(kernel.matrix());
  const double log_z = std::log(norm_z(kernel));
  const std::uint64_t total = std::uint64_t{1} << n;
  const std::uint64_t block = std::min<std::uint64_t>(total, 4096);
  const std::size_t blocks = static_cast<std::size_t>(total / block);
  std::vector<double> partial(blocks);
  parallel_for(blocks, options.threads, [&](std::size_t bi) {
    CompensatedSum acc;
    std::vector<Complex> work;
    std::vector<std::size_t> kept;
    for (std::uint64_t i = bi * block; i < (bi + 1) * block; ++i) {
      const std::uint64_t removed = i ^ (i >> 1);
      kept.clear();
      for (std::size_t k = 0; k < n; ++k)
        if (!(removed >> k & 1U)) kept.push_back(clicked[k]);
      const double term = std::exp(-0.5 * detail::pair_block_log_det(o, m, kept, work) - log_z);
      acc.add(std::popcount(removed) % 2 == 0 ? term : -term);
    }
    partial[bi] = acc.value();
  });
  CompensatedSum sum;
  for (double p : partial) sum.add(p);
  return std::clamp(sum.value(), 0.0, 1.0);
}

inline double exact_outcome_prob(const GBSInstance& instance, const OutcomePattern& pattern,
                                 const ExactOptions& options = {}) {
  return exact_outcome_prob(build_kernel(instance), pattern, options);
}

/// Probabilities of all 2^m click patterns (bit i of the index = mode i).
inline std::vector<double> exact_pattern_probabilities(const KernelMatrix& kernel,
                                                       const ExactOptions& options = {}) {
  detail::check_guard(kernel.dim(), options.max_modes, kExactDistributionGuard, "exact_pattern_probabilities",
                      options);
  auto f = detail::vacuum_ratios(kernel, options.threads);
  detail::moebius_transform(f, kernel.dim());
  return f;
}

/// p(n) for n = 0..m: probability that exactly n detectors click.
inline std::vector<double> exact_click_distribution(const KernelMatrix& kernel, const ExactOptions& options = {}) {
  detail::check_guard(kernel.dim(), options.max_modes, kExactDistributionGuard, "exact_click_distribution",
                      options);
  const auto p = exact_pattern_probabilities(kernel, options);
  std::vector<CompensatedSum> acc(kernel.dim() + 1);
  for (std::size_t mask = 0; mask < p.size(); ++mask) acc[static_cast<std::size_t>(std::popcount(mask))].add(p[mask]);
  std::vector<double> out;
  for (const auto& a : acc) out.push_back(a.value());
  return out;
}

inline std::vector<double> exact_click_distribution(const GBSInstance& instance, const ExactOptions& options = {}) {
  return exact_click_distribution(build_kernel(instance), options);
}

/// Joint distribution of (pair sector l, click count n) under the normalized
/// state, on a shared spectral grid.
struct SectorClickTable {
  SpectralGrid grid;
  std::size_t modes = 0;
  std::vector<std::vector<double>> prob;  // prob[l][n]

  double at(std::size_t l, std::size_t n) const { return prob.at(l).at(n); }
  /// sum over sectors: p(n)
  std::vector<double> click_marginal() const {
    std::vector<double> out(modes + 1, 0.0);
    for (const auto& row : prob)
      for (std::size_t n = 0; n <= modes; ++n) out[n] += row[n];
    return out;
  }
  /// sum over click counts: g_l / Z
  std::vector<double> sector_marginal() const {
    std::vector<double> out;
    for (const auto& row : prob) {
      double s = 0.0;
      for (double v : row) s += v;
      out.push_back(s);
    }
    return out;
  }
};

inline SectorClickTable exact_sector_click_distribution(const KernelMatrix& kernel, const SpectralGrid& grid,
                                                        const ExactOptions& options = {}) {
  const std::size_t n = kernel.dim();
  detail::check_guard(n, options.max_sector_modes, kExactSectorGuard, "exact_sector_click_distribution", options);
  const double z = norm_z(kernel);
  const std::size_t total = std::size_t{1} << n;
  const std::size_t sectors = grid.l_max + 1;
  // spectra[l * total + mask]
  std::vector<double> spectra(sectors * total);
  parallel_for(total, options.threads, [&](std::size_t mask) {
    std::vector<std::size_t> kept;
    for (std::size_t i = 0; i < n; ++i)
      if (mask >> i & 1U) kept.push_back(i);
    const auto g = spectrum_on_grid(pair_eigvals(keep_modes(kernel, kept)), grid);
    for (std::size_t l = 0; l < sectors; ++l) spectra[l * total + mask] = g[l];
  });
  SectorClickTable table{grid, n, std::vector<std::vector<double>>(sectors, std::vector<double>(n + 1, 0.0))};
  std::vector<double> f(total);
  for (std::size_t l = 0; l < sectors; ++l) {
    std::copy_n(spectra.begin() + static_cast<std::ptrdiff_t>(l * total), total, f.begin());
    detail::moebius_transform(f, n);
    std::vector<CompensatedSum> acc(n + 1);
    for (std::size_t mask = 0; mask < total; ++mask) acc[static_cast<std::size_t>(std::popcount(mask))].add(f[mask]);
    for (std::size_t c = 0; c <= n; ++c) table.prob[l][c] = acc[c].value() / z;
  }
  return table;
}

}  // namespace tgbs
