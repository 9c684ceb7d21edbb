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

// Device description, its Gaussian kernel, and measurement patterns.
//
// Modes are 0-based in this API. File formats and pattern strings are
// 1-based in the sense that character i of a pattern is mode i.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tgbs/errors.hpp"
#include "tgbs/linalg.hpp"

namespace tgbs {

inline constexpr double kUnitarityTolerance = 1e-10;

/// Squeezed-vacuum inputs r (one per mode, 0 = vacuum) sent through an
/// interferometer U.
class GBSInstance {
 public:
  GBSInstance(std::vector<double> squeezing, ComplexMatrix unitary,
              std::optional<std::uint64_t> seed = std::nullopt)
      : r_(std::move(squeezing)), u_(std::move(unitary)), seed_(seed) {
    if (u_.rows() != u_.cols()) throw ValidationError("interferometer matrix must be square");
    if (static_cast<std::size_t>(u_.rows()) != r_.size())
      throw ValidationError("squeezing vector length " + std::to_string(r_.size()) +
                            " does not match mode count " + std::to_string(u_.rows()));
    if (r_.empty()) throw ValidationError("instance must have at least one mode");
    for (double r : r_)
      if (!std::isfinite(r) || r < 0.0)
        throw ValidationError("squeezing parameters must be finite and >= 0");
    for (Eigen::Index i = 0; i < u_.size(); ++i)
      if (!std::isfinite(u_.data()[i].real()) || !std::isfinite(u_.data()[i].imag()))
        throw ValidationError("interferometer has non-finite entries");
    const double err = unitarity_error(u_);
    if (err > kUnitarityTolerance)
      throw ValidationError("interferometer is not unitary: max|U^dagger U - I| = " +
                            std::to_string(err));
  }

  std::size_t modes() const { return r_.size(); }
  const std::vector<double>& squeezing() const { return r_; }
  const ComplexMatrix& unitary() const { return u_; }
  const std::optional<std::uint64_t>& seed() const { return seed_; }

 private:
  std::vector<double> r_;
  ComplexMatrix u_;
  std::optional<std::uint64_t> seed_;
};

/// Complex symmetric B defining the unnormalized output state
/// exp(-1/2 sum_ij B_ij a_i^dagger a_j^dagger)|0>. With this scaling a single
/// squeezed mode has B = tanh r and every norm reads det(I - B^dagger B)^{-1/2}.
class KernelMatrix {
 public:
  KernelMatrix() = default;

  explicit KernelMatrix(ComplexMatrix b) : b_(std::move(b)) {
    if (b_.rows() != b_.cols()) throw ValidationError("kernel must be square");
    for (Eigen::Index i = 0; i < b_.rows(); ++i)
      for (Eigen::Index j = i + 1; j < b_.cols(); ++j)
        if (b_(i, j) != b_(j, i)) throw ValidationError("kernel must be exactly symmetric");
  }

  std::size_t dim() const { return static_cast<std::size_t>(b_.rows()); }
  const ComplexMatrix& matrix() const { return b_; }
  Complex operator()(std::size_t i, std::size_t j) const {
    return b_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }

 private:
  ComplexMatrix b_;
};

/// Dark/click string over the modes of an instance.
class OutcomePattern {
 public:
  OutcomePattern() = default;
  explicit OutcomePattern(std::vector<bool> clicks) : clicks_(std::move(clicks)) {}

  /// Parses '0'/'1' characters; character i (1-based) is mode i.
  static OutcomePattern parse(std::string_view bits) {
    std::vector<bool> c;
    c.reserve(bits.size());
    for (char ch : bits) {
      if (ch == '0') {
        c.push_back(false);
      } else if (ch == '1') {
        c.push_back(true);
      } else {
        throw ValidationError("pattern must contain only '0' and '1'");
      }
    }
    return OutcomePattern(std::move(c));
  }

  /// Pattern of length m clicking exactly the 0-based modes in `clicked`.
  static OutcomePattern from_clicked(std::size_t m, std::span<const std::size_t> clicked) {
    std::vector<bool> c(m, false);
    for (auto i : checked_index_set(m, clicked)) c[i] = true;
    return OutcomePattern(std::move(c));
  }

  std::size_t size() const { return clicks_.size(); }
  bool clicked(std::size_t mode) const { return clicks_.at(mode); }
  std::size_t n_clicked() const {
    std::size_t n = 0;
    for (bool b : clicks_) n += b ? 1 : 0;
    return n;
  }
  std::vector<std::size_t> clicked_modes() const { return modes_with(true); }
  std::vector<std::size_t> dark_modes() const { return modes_with(false); }

  std::string to_string() const {
    std::string s;
    s.reserve(clicks_.size());
    for (bool b : clicks_) s.push_back(b ? '1' : '0');
    return s;
  }

  friend bool operator==(const OutcomePattern&, const OutcomePattern&) = default;

 private:
  std::vector<std::size_t> modes_with(bool value) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < clicks_.size(); ++i)
      if (clicks_[i] == value) out.push_back(i);
    return out;
  }

  std::vector<bool> clicks_;
};

/// B = U^T diag(tanh r) U, symmetrized entry-wise so B_ij == B_ji bit-exactly.
inline KernelMatrix build_kernel(const GBSInstance& instance) {
  const ComplexMatrix& u = instance.unitary();
  if (unitarity_error(u) > kUnitarityTolerance) throw ValidationError("interferometer is not unitary");
  const auto m = u.rows();
  RealVector t(m);
  for (Eigen::Index j = 0; j < m; ++j) t(j) = std::tanh(instance.squeezing()[static_cast<std::size_t>(j)]);
  ComplexMatrix b = u.transpose() * t.asDiagonal() * u;
  for (Eigen::Index i = 0; i < m; ++i) {
    for (Eigen::Index j = i + 1; j < m; ++j) {
      const Complex v = 0.5 * (b(i, j) + b(j, i));
      b(i, j) = v;
      b(j, i) = v;
    }
  }
  return KernelMatrix(std::move(b));
}

/// Principal submatrix with the given modes deleted.
inline KernelMatrix remove_modes(const KernelMatrix& kernel, std::span<const std::size_t> removed) {
  const auto keep = complement_indices(kernel.dim(), removed);
  return KernelMatrix(principal_submatrix(kernel.matrix(), keep));
}

/// Principal submatrix on the given modes (sorted, validated).
inline KernelMatrix keep_modes(const KernelMatrix& kernel, std::span<const std::size_t> kept) {
  const auto keep = checked_index_set(kernel.dim(), kept);
  return KernelMatrix(principal_submatrix(kernel.matrix(), keep));
}

/// Kernel of the sub-ensemble: the clicked modes only.
inline KernelMatrix pattern_submatrix(const KernelMatrix& kernel, const OutcomePattern& pattern) {
  if (pattern.size() != kernel.dim())
    throw ValidationError("pattern length " + std::to_string(pattern.size()) +
                          " does not match mode count " + std::to_string(kernel.dim()));
  const auto clicked = pattern.clicked_modes();
  return KernelMatrix(principal_submatrix(kernel.matrix(), clicked));
}

}  // namespace tgbs
