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

// Per-sector inverse moment problem on the discrete domain {0..D}:
//   q(nu) = exp(c_0 + c_1 z + ... + c_j z^j),   z = (nu - mu) / sigma,
// with mu, sigma from the first two input moments, such that the first j
// raw moments of q match the inputs. This is the maximum-entropy dual of a
// moment constraint, so the objective
//   Phi(c) = sum_nu q(nu) - sum_t c_t M_t
// is strictly convex with Hessian sum_nu q z^s z^t. Newton steps are damped
// by backtracking on Phi.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tgbs/errors.hpp"

namespace tgbs {

inline constexpr int kMaxFitIterations = 200;
inline constexpr double kFitTolerance = 1e-8;
inline constexpr double kDegenerateVariance = 1e-12;

struct FitCoefficients {
  int order = 2;
  std::array<double, 5> coeffs{};  // coefficients of z^t, t = 0..order; include log S_0
  double shift = 0.0;              // mu
  double scale = 1.0;              // sigma
  std::size_t domain_max = 0;
  bool converged = false;
  double residual = 0.0;  // max relative raw-moment mismatch, t = 0..order
  int iterations = 0;

  double log_mass(double nu) const {
    const double z = (nu - shift) / scale;
    double acc = 0.0;
    for (int t = order; t >= 0; --t) acc = acc * z + coeffs[static_cast<std::size_t>(t)];
    return acc;
  }
  double mass(std::size_t nu) const { return nu > domain_max ? 0.0 : std::exp(log_mass(static_cast<double>(nu))); }
};

struct SectorFit {
  std::size_t photons = 0;
  int requested_order = 2;
  int used_order = 0;  // 0 for the point-mass case
  std::size_t domain_max = 0;
  double total_mass = 0.0;               // S_0
  std::optional<FitCoefficients> fit;    // empty: point mass at `point`
  std::size_t point = 0;
  double last_point_mass = 0.0;          // q(domain_max)
  std::string diagnostic;

  bool point_mass() const { return !fit.has_value(); }
  double mass(std::size_t nu) const {
    if (nu > domain_max) return 0.0;
    if (!fit) return nu == point ? total_mass : 0.0;
    return fit->mass(nu);
  }
  std::vector<double> masses() const {
    std::vector<double> out(domain_max + 1);
    for (std::size_t nu = 0; nu <= domain_max; ++nu) out[nu] = mass(nu);
    return out;
  }
};

namespace detail {

/// Max relative mismatch of the raw moments t = 0..order of `q` vs `raw`.
inline double raw_moment_residual(const std::vector<double>& q, std::span<const double> raw, int order) {
  double worst = 0.0;
  for (int t = 0; t <= order; ++t) {
    long double m = 0.0L;
    for (std::size_t nu = 0; nu < q.size(); ++nu)
      m += static_cast<long double>(q[nu]) * std::pow(static_cast<long double>(nu), t);
    const double target = raw[static_cast<std::size_t>(t)];
    const double denom = std::max(std::abs(target), 1e-300);
    worst = std::max(worst, static_cast<double>(std::abs(m - static_cast<long double>(target))) / denom);
  }
  return worst;
}

/// Newton solve for normalized targets m (m_0 = 1) at `order`, starting at c.
/// Returns the number of iterations used; c is updated in place.
inline int newton_solve(const std::vector<double>& z, std::span<const double> m, int order,
                        std::array<double, 5>& c) {
  const std::size_t p = static_cast<std::size_t>(order) + 1;
  const std::size_t npts = z.size();
  // powers[nu][t] = z_nu^t, t = 0..2*order
  std::vector<std::array<double, 9>> powers(npts);
  for (std::size_t nu = 0; nu < npts; ++nu) {
    powers[nu][0] = 1.0;
    for (std::size_t t = 1; t <= 2 * p - 2; ++t) powers[nu][t] = powers[nu][t - 1] * z[nu];
  }
  const auto objective = [&](const std::array<double, 5>& cc, std::vector<double>& q) {
    double sum = 0.0;
    for (std::size_t nu = 0; nu < npts; ++nu) {
      double e = 0.0;
      for (std::size_t t = 0; t < p; ++t) e += cc[t] * powers[nu][t];
      q[nu] = std::exp(e);
      sum += q[nu];
    }
    double lin = 0.0;
    for (std::size_t t = 0; t < p; ++t) lin += cc[t] * m[t];
    return std::isfinite(sum) ? sum - lin : std::numeric_limits<double>::infinity();
  };
  std::vector<double> q(npts);
  std::vector<double> q_trial(npts);
  double phi = objective(c, q);
  int it = 0;
  for (; it < kMaxFitIterations; ++it) {
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(p));
    Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(p));
    for (std::size_t nu = 0; nu < npts; ++nu) {
      for (std::size_t s = 0; s < p; ++s) {
        grad(static_cast<Eigen::Index>(s)) += q[nu] * powers[nu][s];
        for (std::size_t t = 0; t <= s; ++t)
          hess(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(t)) += q[nu] * powers[nu][s + t];
      }
    }
    for (std::size_t s = 0; s < p; ++s) {
      grad(static_cast<Eigen::Index>(s)) -= m[s];
      for (std::size_t t = 0; t < s; ++t)
        hess(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(s)) =
            hess(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(t));
    }
    if (grad.cwiseAbs().maxCoeff() <= 1e-14) break;
    Eigen::VectorXd step;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(hess);
    if (ldlt.info() == Eigen::Success && ldlt.isPositive()) {
      step = ldlt.solve(-grad);
    } else {
      step = hess.completeOrthogonalDecomposition().solve(-grad);
    }
    if (!step.allFinite()) break;
    const double slope = grad.dot(step);
    double alpha = 1.0;
    bool accepted = false;
    for (int k = 0; k < 60; ++k, alpha *= 0.5) {
      std::array<double, 5> trial = c;
      for (std::size_t t = 0; t < p; ++t) trial[t] += alpha * step(static_cast<Eigen::Index>(t));
      const double phi_trial = objective(trial, q_trial);
      if (phi_trial <= phi + 1e-4 * alpha * slope) {
        c = trial;
        phi = phi_trial;
        q.swap(q_trial);
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
  }
  return it;
}

}  // namespace detail

/// Fits sector moments raw[0..order] (raw[t] = sum_nu nu^t p(nu)) on {0..domain_max}.
/// Orders are climbed 2 -> order, each started from the previous solution; if
/// the requested order fails to converge the best lower converged order is
/// returned with a diagnostic.
inline SectorFit fit_sector(std::span<const double> raw, std::size_t domain_max, int order,
                            std::size_t photons = 0) {
  if (order < 2 || order > 4) throw ValidationError("fit order must be 2, 3 or 4");
  if (raw.size() < static_cast<std::size_t>(order) + 1)
    throw ValidationError("fit needs raw moments S_0..S_order");
  const double s0 = raw[0];
  if (!(s0 > 0.0) || !std::isfinite(s0)) throw ValidationError("sector mass S_0 must be positive");

  SectorFit out;
  out.photons = photons;
  out.requested_order = order;
  out.domain_max = domain_max;
  out.total_mass = s0;

  const double mu = raw[1] / s0;
  const double var = raw[2] / s0 - mu * mu;
  const double dmax = static_cast<double>(domain_max);
  if (var < -1e-9 * std::max(1.0, mu * mu))
    throw ValidationError("inconsistent sector moments: negative variance");
  if (var < kDegenerateVariance || domain_max == 0) {
    const double rounded = std::round(mu);
    if (rounded < 0.0 || rounded > dmax) throw ValidationError("inconsistent sector moments: mean outside domain");
    out.point = static_cast<std::size_t>(rounded);
    out.used_order = 0;
    out.last_point_mass = out.point == domain_max ? s0 : 0.0;
    out.diagnostic = "point mass";
    return out;
  }
  if (mu < 0.0 || mu > dmax) throw ValidationError("inconsistent sector moments: mean outside domain");

  const double sigma = std::sqrt(var);
  std::vector<double> z(domain_max + 1);
  for (std::size_t nu = 0; nu <= domain_max; ++nu) z[nu] = (static_cast<double>(nu) - mu) / sigma;

  // Normalized scaled targets m_t = E[z^t].
  const int max_order = std::min<int>(order, static_cast<int>(domain_max));
  std::array<double, 5> m{};
  for (int t = 0; t <= max_order; ++t) {
    long double acc = 0.0L;
    for (int i = 0; i <= t; ++i) {
      long double binom = 1.0L;
      for (int k = 1; k <= i; ++k) binom = binom * (t - i + k) / k;
      acc += binom * static_cast<long double>(raw[static_cast<std::size_t>(i)] / s0) *
             std::pow(static_cast<long double>(-mu), t - i);
    }
    m[static_cast<std::size_t>(t)] = static_cast<double>(acc / std::pow(static_cast<long double>(sigma), t));
  }
  m[0] = 1.0;
  if (max_order >= 1) m[1] = 0.0;
  if (max_order >= 2) m[2] = 1.0;

  std::array<double, 5> c{};
  if (max_order >= 2) {
    double norm = 0.0;
    for (double zz : z) norm += std::exp(-0.5 * zz * zz);
    c[0] = -std::log(norm);
    c[2] = -0.5;
  } else {
    c[0] = -std::log(static_cast<double>(z.size()));
  }

  std::optional<FitCoefficients> best;
  const auto finish = [&](const std::array<double, 5>& cc, int j, int iterations) {
    FitCoefficients f;
    f.order = j;
    f.coeffs = cc;
    f.coeffs[0] += std::log(s0);
    for (int t = j + 1; t < 5; ++t) f.coeffs[static_cast<std::size_t>(t)] = 0.0;
    f.shift = mu;
    f.scale = sigma;
    f.domain_max = domain_max;
    f.iterations = iterations;
    std::vector<double> q(domain_max + 1);
    for (std::size_t nu = 0; nu <= domain_max; ++nu) q[nu] = f.mass(nu);
    f.residual = detail::raw_moment_residual(q, raw, j);
    f.converged = std::isfinite(f.residual) && f.residual <= kFitTolerance;
    return f;
  };

  const int first = std::min(2, max_order);
  std::string notes;
  for (int j = first; j <= max_order; ++j) {
    std::array<double, 5> trial = best ? best->coeffs : c;
    if (best) trial[0] -= std::log(s0);
    for (int t = j; t < 5 && best; ++t) trial[static_cast<std::size_t>(t)] = 0.0;
    const int iters = detail::newton_solve(z, std::span<const double>(m.data(), 5), j, trial);
    const FitCoefficients f = finish(trial, j, iters);
    if (f.converged) {
      best = f;
    } else {
      notes += "order " + std::to_string(j) + " did not converge (residual " + std::to_string(f.residual) + "); ";
      break;
    }
  }
  if (!best)
    throw ConvergenceError("moment fit failed at the lowest order: " + notes);
  out.fit = best;
  out.used_order = best->order;
  out.last_point_mass = best->mass(domain_max);
  if (best->order < order) {
    out.diagnostic = notes.empty() ? "order capped by domain size" : notes + "fell back to order " +
                                                                          std::to_string(best->order);
  }
  return out;
}

/// Sum of fitted top-point masses over sectors able to light every detector
/// (photons >= n_max). Sectors with fewer photons contribute exactly zero.
inline double last_point_sum(std::span<const SectorFit> fits, std::size_t n_max, std::string* diagnostic = nullptr) {
  double sum = 0.0;
  std::size_t used = 0;
  for (const auto& f : fits) {
    if (f.photons < n_max) continue;
    if (f.domain_max != n_max) throw ValidationError("sector fit domain does not end at the requested point");
    sum += f.last_point_mass;
    ++used;
  }
  if (used == 0 && diagnostic) *diagnostic = "no retained sector has enough photons to light every detector";
  return sum;
}

}  // namespace tgbs
