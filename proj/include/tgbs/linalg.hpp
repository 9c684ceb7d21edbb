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

// Dense complex linear algebra used throughout: Hermitian spectra, Haar
// unitaries, Cholesky determinants and the bounded-size determinant ratios
// behind mode-removal updates.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "tgbs/errors.hpp"
#include "tgbs/rng.hpp"

namespace tgbs {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using RealVector = Eigen::VectorXd;

/// Largest supported removal set for determinant-ratio updates.
inline constexpr std::size_t kMaxRemoval = 4;

struct HermEigen {
  RealVector eigenvalues;      // ascending
  ComplexMatrix eigenvectors;  // columns, unitary
};

inline double max_abs(const ComplexMatrix& a) {
  return a.size() == 0 ? 0.0 : a.cwiseAbs().maxCoeff();
}

/// max |(U^dagger U - I)_ij|.
inline double unitarity_error(const ComplexMatrix& u) {
  if (u.rows() != u.cols()) return std::numeric_limits<double>::infinity();
  const auto n = u.rows();
  return max_abs(u.adjoint() * u - ComplexMatrix::Identity(n, n));
}

namespace detail {

inline ComplexMatrix checked_hermitian(const ComplexMatrix& h) {
  if (h.rows() != h.cols()) throw ValidationError("Hermitian input must be square");
  const double scale = std::max(1.0, max_abs(h));
  if (max_abs(h - h.adjoint()) > 1e-12 * scale)
    throw ValidationError("matrix is not Hermitian within 1e-12");
  return (h + h.adjoint()) * 0.5;
}

}  // namespace detail

inline HermEigen herm_eigen(const ComplexMatrix& h) {
  const ComplexMatrix sym = detail::checked_hermitian(h);
  if (sym.rows() == 0) return {};
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> solver(sym);
  if (solver.info() != Eigen::Success) throw ConvergenceError("Hermitian eigensolver failed");
  return {solver.eigenvalues(), solver.eigenvectors()};
}

/// Ascending real eigenvalues of a Hermitian matrix.
inline RealVector herm_eigvals(const ComplexMatrix& h) {
  const ComplexMatrix sym = detail::checked_hermitian(h);
  if (sym.rows() == 0) return {};
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> solver(sym, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw ConvergenceError("Hermitian eigensolver failed");
  return solver.eigenvalues();
}

/// Eigenvalues of a positive semidefinite matrix. Values in [-1e-12, 0) are
/// clamped to zero; anything more negative means the input was not PSD.
inline RealVector psd_eigvals(const ComplexMatrix& h) {
  RealVector ev = herm_eigvals(h);
  const double floor = -1e-12 * std::max(1.0, max_abs(h));
  for (auto& v : ev) {
    if (v < floor) throw ValidationError("matrix is not positive semidefinite");
    if (v < 0.0) v = 0.0;
  }
  return ev;
}

/// Haar-random m x m unitary.
///
/// Entries of a complex Gaussian matrix are drawn in row-major order from
/// Xoshiro256(seed).complex_normal(); with G = QR, the result is Q scaled
/// column-wise by the phases of diag(R), i.e. the unique factor whose
/// triangular partner has a positive real diagonal.
inline ComplexMatrix haar_unitary(std::size_t m, std::uint64_t seed) {
  if (m == 0) throw ValidationError("haar_unitary: mode count must be >= 1");
  Xoshiro256 rng(seed);
  const auto n = static_cast<Eigen::Index>(m);
  ComplexMatrix g(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) g(i, j) = rng.complex_normal();
  Eigen::HouseholderQR<ComplexMatrix> qr(g);
  ComplexMatrix q = qr.householderQ() * ComplexMatrix::Identity(n, n);
  const ComplexMatrix& packed = qr.matrixQR();
  for (Eigen::Index j = 0; j < n; ++j) {
    const Complex d = packed(j, j);
    const double a = std::abs(d);
    q.col(j) *= (a > 0.0 ? d / a : Complex(1.0));
  }
  return q;
}

/// Validated, sorted copy of a 0-based index set within [0, n).
inline std::vector<std::size_t> checked_index_set(std::size_t n, std::span<const std::size_t> idx) {
  std::vector<std::size_t> out(idx.begin(), idx.end());
  std::sort(out.begin(), out.end());
  for (std::size_t k = 0; k < out.size(); ++k) {
    if (out[k] >= n)
      throw ValidationError("mode index " + std::to_string(out[k] + 1) + " out of range 1.." +
                            std::to_string(n));
    if (k > 0 && out[k] == out[k - 1])
      throw ValidationError("duplicate mode index " + std::to_string(out[k] + 1));
  }
  return out;
}

/// Indices of [0, n) not in `removed`, ascending.
inline std::vector<std::size_t> complement_indices(std::size_t n,
                                                   std::span<const std::size_t> removed) {
  const auto sorted = checked_index_set(n, removed);
  std::vector<std::size_t> keep;
  keep.reserve(n - sorted.size());
  std::size_t r = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (r < sorted.size() && sorted[r] == i) {
      ++r;
    } else {
      keep.push_back(i);
    }
  }
  return keep;
}

inline ComplexMatrix principal_submatrix(const ComplexMatrix& a, std::span<const std::size_t> keep) {
  const auto k = static_cast<Eigen::Index>(keep.size());
  ComplexMatrix out(k, k);
  for (Eigen::Index i = 0; i < k; ++i)
    for (Eigen::Index j = 0; j < k; ++j)
      out(i, j) = a(static_cast<Eigen::Index>(keep[i]), static_cast<Eigen::Index>(keep[j]));
  return out;
}

/// LU determinant; the 0 x 0 determinant is 1.
inline Complex lu_determinant(const ComplexMatrix& a) {
  if (a.rows() == 0) return 1.0;
  return a.partialPivLu().determinant();
}

/// log det of a Hermitian positive definite matrix by Cholesky.
inline double hpd_log_det(const ComplexMatrix& a) {
  if (a.rows() == 0) return 0.0;
  Eigen::LLT<ComplexMatrix> llt(a);
  if (llt.info() != Eigen::Success) throw ValidationError("matrix is not positive definite");
  double acc = 0.0;
  const ComplexMatrix& l = llt.matrixLLT();
  for (Eigen::Index i = 0; i < a.rows(); ++i) acc += std::log(l(i, i).real());
  return 2.0 * acc;
}

/// The 2n x 2n Hermitian matrix [[I, B], [B^dagger, I]]. Its determinant is
/// det(I - B^dagger B), and deleting mode i from B deletes rows and columns i
/// and n + i here.
inline ComplexMatrix pair_block_matrix(const ComplexMatrix& b) {
  const auto n = b.rows();
  ComplexMatrix out(2 * n, 2 * n);
  out.setIdentity();
  out.topRightCorner(n, n) = b;
  out.bottomLeftCorner(n, n) = b.adjoint();
  return out;
}

/// Inverse of K(w) = [[I, B], [w B^dagger, I]] for a complex symmetric B and
/// |w| <= 1, plus w itself. det K(w) = det(I - w B^dagger B), and deleting
/// modes T from B deletes the index set J = T u (n + T) from K(w), so by the
/// complementary-minor identity the determinant ratio of the deleted problem
/// is det(K(w)^{-1}[J, J]).
///
/// K(w) is diagonally similar to I + sqrt(w) H with H = [[0, B], [B^dagger, 0]]
/// Hermitian and ||H|| < 1. The inverse of that normal matrix has a positive
/// definite Hermitian part, so every principal block of K(w)^{-1} eliminates
/// without pivoting with all pivots in the open right half-plane. That fixes
/// the branch of ratio^{-1/2} as a product of principal square roots.
class ResolventCache {
 public:
  /// `norm_sq` bounds ||B||^2; the block elimination needs |w| norm_sq < 1.
  ResolventCache(const ComplexMatrix& b, Complex w, double norm_sq = 1.0)
      : n_(static_cast<std::size_t>(b.rows())), w_(w) {
    if (b.rows() != b.cols()) throw ValidationError("kernel must be square");
    if (std::abs(w) > 1.0 + 1e-12 && !(std::abs(w) * norm_sq < 1.0))
      throw ValidationError("resolvent point must satisfy |w| <= 1 or |w| ||B||^2 < 1");
    const auto n = b.rows();
    const ComplexMatrix bd = b.adjoint();
    const ComplexMatrix m = ComplexMatrix::Identity(n, n) - w * (bd * b);
    Eigen::PartialPivLU<ComplexMatrix> lu(m);
    const ComplexMatrix r = lu.inverse();
    const ComplexMatrix br = b * r;
    inverse_.resize(2 * n, 2 * n);
    inverse_.topLeftCorner(n, n) = ComplexMatrix::Identity(n, n) + w * (br * bd);
    inverse_.topRightCorner(n, n) = -br;
    inverse_.bottomLeftCorner(n, n) = -w * (r * bd);
    inverse_.bottomRightCorner(n, n) = r;
  }

  std::size_t dim() const { return n_; }
  Complex w() const { return w_; }
  const ComplexMatrix& inverse() const { return inverse_; }

 private:
  std::size_t n_;
  Complex w_;
  ComplexMatrix inverse_;
};

struct RemovalRatio {
  Complex ratio;     // det(I - w Bbar^dagger Bbar) / det(I - w B^dagger B)
  Complex inv_sqrt;  // ratio^{-1/2} on the branch continuous from w = 0
};

namespace detail {

/// In-place unpivoted elimination of a dense 2s x 2s row-major block;
/// returns the product of principal square roots of consecutive pivot pairs
/// and the plain pivot product.
inline RemovalRatio eliminate_block(std::array<Complex, 64>& y, std::size_t dim) {
  Complex product = 1.0;
  Complex root = 1.0;
  for (std::size_t k = 0; k < dim; ++k) {
    const Complex pivot = y[k * dim + k];
    if (!(pivot.real() > 0.0))
      throw ConvergenceError("removal update: pivot left the right half-plane");
    for (std::size_t i = k + 1; i < dim; ++i) {
      const Complex f = y[i * dim + k] / pivot;
      if (f == Complex(0.0)) continue;
      for (std::size_t j = k + 1; j < dim; ++j) y[i * dim + j] -= f * y[k * dim + j];
    }
    if (k % 2 == 1) {
      const Complex pair = y[(k - 1) * dim + (k - 1)] * pivot;
      root *= std::sqrt(pair);
      product *= pair;
    }
  }
  return {product, 1.0 / root};
}

}  // namespace detail

/// Determinant ratio for deleting the modes `removed` (0-based, distinct,
/// at most kMaxRemoval) from the kernel cached in `cache`.
inline RemovalRatio removal_ratio(const ResolventCache& cache, std::span<const std::size_t> removed) {
  if (removed.size() > kMaxRemoval)
    throw ValidationError("removal sets larger than 4 modes are not supported");
  const auto t = checked_index_set(cache.dim(), removed);
  if (t.empty()) return {1.0, 1.0};
  const std::size_t s = t.size();
  const std::size_t dim = 2 * s;
  const std::size_t n = cache.dim();
  std::array<std::size_t, 2 * kMaxRemoval> j{};
  for (std::size_t k = 0; k < s; ++k) {
    j[2 * k] = t[k];
    j[2 * k + 1] = n + t[k];
  }
  const ComplexMatrix& g = cache.inverse();
  std::array<Complex, 64> y{};
  for (std::size_t a = 0; a < dim; ++a)
    for (std::size_t b = 0; b < dim; ++b)
      y[a * dim + b] = g(static_cast<Eigen::Index>(j[a]), static_cast<Eigen::Index>(j[b]));
  return detail::eliminate_block(y, dim);
}

inline Complex removal_det_ratio(const ResolventCache& cache, std::span<const std::size_t> removed) {
  return removal_ratio(cache, removed).ratio;
}

}  // namespace tgbs
