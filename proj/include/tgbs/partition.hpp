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

// Partition functions and photon-pair sector spectra.
//
// For a kernel B with pair eigenvalues lambda_i (eigenvalues of B^dagger B),
//   Z          = prod_i (1 - lambda_i)^{-1/2},
//   Z(theta)   = prod_i (1 - e^{i theta} lambda_i)^{-1/2}   (principal branch per factor),
//   g_l        = coefficient of e^{i l theta} in Z(theta),
// where l counts photon pairs (photon number k = 2l; odd sectors vanish).

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "tgbs/errors.hpp"
#include "tgbs/linalg.hpp"
#include "tgbs/model.hpp"

namespace tgbs {

inline constexpr double kDefaultTailEps = 1e-6;
inline constexpr std::size_t kDefaultGridCap = std::size_t{1} << 20;

/// Clamped eigenvalues of B^dagger B; rejects non-physical kernels (max >= 1).
inline RealVector pair_eigvals(const ComplexMatrix& b) {
  if (b.rows() == 0) return {};
  RealVector ev = psd_eigvals(b.adjoint() * b);
  if (ev.size() > 0 && !(ev(ev.size() - 1) < 1.0))
    throw ValidationError("non-physical kernel: spectral norm of B^dagger B is >= 1");
  return ev;
}

inline RealVector pair_eigvals(const KernelMatrix& kernel) { return pair_eigvals(kernel.matrix()); }

inline double norm_z_from_eigvals(const RealVector& lambda) {
  double log_z = 0.0;
  for (double l : lambda) log_z -= 0.5 * std::log1p(-l);
  return std::exp(log_z);
}

inline Complex char_fn_from_eigvals(const RealVector& lambda, Complex w) {
  Complex acc = 1.0;
  for (double l : lambda) acc /= std::sqrt(1.0 - w * l);
  return acc;
}

/// Z = det(I - B^dagger B)^{-1/2}; the 0 x 0 kernel has Z = 1.
inline double norm_z(const KernelMatrix& kernel) { return norm_z_from_eigvals(pair_eigvals(kernel)); }

/// Z(theta); theta is conjugate to the photon-pair count.
inline Complex char_fn(const KernelMatrix& kernel, double theta) {
  return char_fn_from_eigvals(pair_eigvals(kernel), std::polar(1.0, theta));
}

namespace detail {

/// In-place forward DFT, X_l = sum_j x_j e^{-2 pi i j l / N}, N a power of 2.
inline void fft(std::vector<Complex>& a) {
  const std::size_t n = a.size();
  if (n <= 1) return;
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  std::vector<Complex> twiddle(n / 2);
  for (std::size_t k = 0; k < n / 2; ++k)
    twiddle[k] = std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n));
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t stride = n / len;
    for (std::size_t i = 0; i < n; i += len) {
      for (std::size_t k = 0; k < len / 2; ++k) {
        const Complex u = a[i + k];
        const Complex v = a[i + k + len / 2] * twiddle[k * stride];
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
      }
    }
  }
}

inline std::size_t next_pow2(std::size_t x) {
  std::size_t p = 1;
  while (p < x) p <<= 1;
  return p;
}

}  // namespace detail

/// Fourier grid shared by every spectrum combined in one computation:
/// `nodes` points w_j = radius exp(2 pi i j / nodes), sectors l = 0..l_max
/// retained. A radius above 1 lifts high sectors over the round-off of the
/// transform; it must keep radius * lambda_max below 1.
struct SpectralGrid {
  std::size_t nodes = 8;
  std::size_t l_max = 0;
  double radius = 1.0;

  friend bool operator==(const SpectralGrid&, const SpectralGrid&) = default;
};

inline Complex grid_point(const SpectralGrid& grid, std::size_t j) {
  return std::polar(grid.radius, 2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(grid.nodes));
}

/// Real sector coefficients l = 0..l_max from samples on the upper half of
/// the grid (j = 0..nodes/2); the lower half follows from g_l being real.
inline std::vector<double> coefficients_from_half_samples(std::span<const Complex> half,
                                                          const SpectralGrid& grid) {
  const std::size_t n = grid.nodes;
  if (n < 2 || (n & (n - 1)) != 0 || grid.l_max >= n / 2)
    throw ValidationError("spectral grid needs a power-of-two node count above 2 (l_max + 1)");
  if (half.size() != n / 2 + 1) throw ValidationError("half-grid sample count mismatch");
  std::vector<Complex> full(n);
  for (std::size_t j = 0; j <= n / 2; ++j) full[j] = half[j];
  for (std::size_t j = n / 2 + 1; j < n; ++j) full[j] = std::conj(half[n - j]);
  detail::fft(full);
  std::vector<double> g(grid.l_max + 1);
  const double inv_n = 1.0 / static_cast<double>(n);
  const double inv_r = 1.0 / grid.radius;
  double scale = inv_n;
  for (std::size_t l = 0; l <= grid.l_max; ++l) {
    g[l] = full[l].real() * scale;
    scale *= inv_r;
  }
  return g;
}

/// Sector weights g_0..g_l_max of the kernel with pair eigenvalues `lambda`,
/// evaluated on a fixed grid.
inline std::vector<double> spectrum_on_grid(const RealVector& lambda, const SpectralGrid& grid) {
  std::vector<Complex> half(grid.nodes / 2 + 1);
  for (std::size_t j = 0; j < half.size(); ++j) half[j] = char_fn_from_eigvals(lambda, grid_point(grid, j));
  return coefficients_from_half_samples(half, grid);
}

inline constexpr double kMaxContourContraction = 0.9;
inline constexpr double kContourAliasTolerance = 1e-20;

/// Grid on a circle of radius rho >= 1 whose tilted mean pair number
/// sum_k rho lambda_k / (2 (1 - rho lambda_k)) reaches `target_pairs`, capped
/// at rho lambda_max = kMaxContourContraction. Node count grows until
/// (rho lambda_max)^nodes falls below kContourAliasTolerance.
inline SpectralGrid tilted_grid(const RealVector& lambda, const SpectralGrid& base, double target_pairs,
                                std::size_t grid_cap = kDefaultGridCap) {
  SpectralGrid out = base;
  out.radius = 1.0;
  const double lmax = lambda.size() == 0 ? 0.0 : lambda.maxCoeff();
  if (!(lmax > 0.0) || lmax >= kMaxContourContraction) return out;
  const auto pairs = [&](double rho) {
    double acc = 0.0;
    for (Eigen::Index k = 0; k < lambda.size(); ++k) {
      const double x = rho * std::max(lambda[k], 0.0);
      acc += 0.5 * x / (1.0 - x);
    }
    return acc;
  };
  double lo = 1.0;
  double hi = kMaxContourContraction / lmax;
  if (pairs(lo) >= target_pairs) return out;
  if (pairs(hi) > target_pairs) {
    for (int it = 0; it < 100; ++it) {
      const double mid = 0.5 * (lo + hi);
      (pairs(mid) < target_pairs ? lo : hi) = mid;
    }
  }
  out.radius = hi;
  const double alias_nodes = std::log(kContourAliasTolerance) / std::log(out.radius * lmax);
  const std::size_t need = detail::next_pow2(static_cast<std::size_t>(std::ceil(alias_nodes)));
  out.nodes = std::max(out.nodes, need);
  if (out.nodes > grid_cap) {
    out = base;
    out.radius = 1.0;
  }
  return out;
}

struct SectorSpectrum {
  std::vector<double> weights;  // g_l, l = 0..l_max
  std::size_t l_max = 0;
  double tail_eps = kDefaultTailEps;
  std::size_t grid_size = 8;
  double z = 1.0;           // exact norm
  double imag_residue = 0;  // max |Im g_l| before taking real parts

  SpectralGrid grid() const { return {grid_size, l_max, 1.0}; }
  static constexpr std::size_t photons(std::size_t l) { return 2 * l; }
  double total() const {
    double s = 0.0;
    for (double g : weights) s += g;
    return s;
  }
};

/// Adaptive sector spectrum. The grid doubles until (a) nodes >= 2(l_max+1),
/// (b) the retained sectors hold at least (1 - tail_eps) Z, (c) l_max >=
/// l_min_required, and (d) the previous grid agrees with the current one on
/// every retained sector to 1e-10 Z.
inline SectorSpectrum sector_spectrum(const KernelMatrix& kernel, double tail_eps = kDefaultTailEps,
                                      std::size_t l_min_required = 0,
                                      std::size_t grid_cap = kDefaultGridCap) {
  if (!(tail_eps > 0.0 && tail_eps < 1.0)) throw ValidationError("tail_eps must lie in (0, 1)");
  const RealVector lambda = pair_eigvals(kernel);
  const double z = norm_z_from_eigvals(lambda);
  std::size_t n = std::max<std::size_t>(8, detail::next_pow2(2 * (l_min_required + 1)));
  std::vector<double> prev;
  while (n <= grid_cap) {
    std::vector<Complex> samples(n);
    for (std::size_t j = 0; j < n; ++j)
      samples[j] = char_fn_from_eigvals(lambda, std::polar(1.0, 2.0 * std::numbers::pi *
                                                                      static_cast<double>(j) /
                                                                      static_cast<double>(n)));
    detail::fft(samples);
    const double inv_n = 1.0 / static_cast<double>(n);
    std::vector<double> g(n / 2);
    double imag = 0.0;
    bool aliased = false;
    for (std::size_t l = 0; l < n / 2; ++l) {
      g[l] = samples[l].real() * inv_n;
      imag = std::max(imag, std::abs(samples[l].imag() * inv_n));
      if (g[l] < -1e-12 * z) aliased = true;
      if (g[l] < 0.0) g[l] = 0.0;
    }
    std::size_t l_max = g.size();
    if (!aliased) {
      double cum = 0.0;
      for (std::size_t l = 0; l < g.size(); ++l) {
        cum += g[l];
        if (l >= l_min_required && cum >= (1.0 - tail_eps) * z) {
          l_max = l;
          break;
        }
      }
    }
    if (l_max < g.size() && prev.size() > l_max) {
      double diff = 0.0;
      for (std::size_t l = 0; l <= l_max; ++l) diff = std::max(diff, std::abs(g[l] - prev[l]));
      if (diff <= 1e-10 * z) {
        if (imag > 1e-10 * z)
          throw ConvergenceError("sector spectrum has imaginary residue " + std::to_string(imag / z) +
                                 " Z");
        g.resize(l_max + 1);
        return {std::move(g), l_max, tail_eps, n, z, imag};
      }
    }
    prev = std::move(g);
    n *= 2;
  }
  throw ConvergenceError("sector spectrum did not converge within " + std::to_string(grid_cap) +
                         " Fourier nodes");
}

}  // namespace tgbs
