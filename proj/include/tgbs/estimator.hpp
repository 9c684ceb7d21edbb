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

// Outcome probability p(S) = P'(all n clicked) * Z'/Z, where the first factor
// is the top point of the click-count distribution of the sub-ensemble B'
// (clicked modes only). That distribution is split by photon-pair sector;
// each sector's first raw moments are matched by an exponential polynomial
// and its mass at n clicks is read off.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "tgbs/errors.hpp"
#include "tgbs/exact.hpp"
#include "tgbs/fit.hpp"
#include "tgbs/model.hpp"
#include "tgbs/moments.hpp"
#include "tgbs/partition.hpp"
#include "tgbs/rng.hpp"

namespace tgbs {

inline constexpr std::size_t kDefaultExactThreshold = 12;
inline constexpr double kEstimatorTailEps = 1e-12;
inline constexpr double kDefaultRetention = 1e-12;

struct EstimatorConfig {
  int order = 4;
  double tail_eps = kEstimatorTailEps;
  std::size_t exact_threshold = kDefaultExactThreshold;
  std::uint64_t memory_budget = kDefaultMemoryBudget;
  unsigned threads = 0;  // 0: all hardware threads
  bool force_naive = false;
  double retention = kDefaultRetention;  // relative to the largest sector mass S_0
  std::size_t grid_cap = kDefaultGridCap;
  bool tilt_contour = true;  // evaluate moments on a radius > 1 circle, see tilted_grid
};

struct SectorDiagnostic {
  std::size_t photons = 0;
  double mass = 0.0;
  int used_order = 0;
  double residual = 0.0;
  int iterations = 0;
  double last_point = 0.0;
  std::string note;
};

struct EstimateDiagnostics {
  std::size_t grid_nodes = 0;
  std::size_t l_max = 0;
  double contour_radius = 1.0;
  double tail_mass = 0.0;     // sub-ensemble mass beyond l_max, relative to Z'
  double dropped_mass = 0.0;  // retained-grid sectors skipped for low mass
  std::string elementary_path;
  std::vector<SectorDiagnostic> sectors;
  std::vector<std::string> notes;
};

struct ProbabilityEstimate {
  double value = 0.0;
  int order = 0;       // requested order (0 on the exact path)
  int order_used = 0;  // lowest order over fitted sectors
  std::size_t n_clicked = 0;
  double z_ratio = 1.0;  // Z'/Z
  double first_factor = 0.0;
  std::size_t sectors_used = 0;
  bool exact = false;
  std::string method;  // "exact" | "approx"
  EstimateDiagnostics diagnostics;
  double seconds = 0.0;
};

namespace detail {

inline void check_config(const EstimatorConfig& config) {
  if (config.order < 2 || config.order > 4) throw ValidationError("order must be 2, 3 or 4");
  if (!(config.tail_eps > 0.0 && config.tail_eps < 1.0)) throw ValidationError("tail_eps must lie in (0, 1)");
  if (!(config.retention >= 0.0 && config.retention < 1.0)) throw ValidationError("retention must lie in [0, 1)");
}

inline ElementarySums elementary_sums(const KernelMatrix& sub, const SpectralGrid& grid,
                                      const EstimatorConfig& config, std::string& path) {
  MomentOptions opts;
  opts.max_order = static_cast<std::size_t>(config.order);
  opts.memory_budget = config.memory_budget;
  opts.threads = config.threads;
  if (config.force_naive) {
    path = "naive";
    return elementary_sums_naive(sub, grid, opts);
  }
  try {
    path = "fast";
    return elementary_sums_fast(sub, grid, opts);
  } catch (const ResourceError&) {
    if (sub.dim() > opts.naive_guard) throw;
    path = "naive";
    return elementary_sums_naive(sub, grid, opts);
  }
}

/// Moment grid for `sub`: the spectrum grid, tilted towards `target_pairs`
/// when the config allows it.
inline SpectralGrid moment_grid(const KernelMatrix& sub, const SectorSpectrum& spec, double target_pairs,
                                const EstimatorConfig& config, EstimateDiagnostics& diag) {
  const SpectralGrid grid =
      config.tilt_contour ? tilted_grid(pair_eigvals(sub), spec.grid(), target_pairs, config.grid_cap) : spec.grid();
  diag.grid_nodes = grid.nodes;
  diag.l_max = grid.l_max;
  diag.contour_radius = grid.radius;
  return grid;
}

struct SectorFits {
  std::vector<SectorFit> fits;
  double dropped = 0.0;
};

/// Fits every sector with at least `min_photons` photons and mass above
/// retention * (largest S_0); domain per sector is {0..min(photons, n_max)}.
inline SectorFits fit_sectors(const MomentTable& table, std::size_t n_max, int order, double retention,
                              std::size_t min_photons, EstimateDiagnostics& diag) {
  SectorFits out;
  double largest = 0.0;
  for (std::size_t l = 0; l < table.sector_count(); ++l) largest = std::max(largest, table.raw(l, 0));
  const double floor = retention * largest;
  for (std::size_t l = 0; l < table.sector_count(); ++l) {
    const std::size_t photons = SectorSpectrum::photons(l);
    if (photons < min_photons) continue;
    const auto raw = table.moments(l);
    if (!(raw[0] > floor)) {
      out.dropped += std::max(raw[0], 0.0);
      continue;
    }
    const std::size_t domain = std::min(photons, n_max);
    SectorFit f = fit_sector(raw, domain, order, photons);
    SectorDiagnostic d;
    d.photons = photons;
    d.mass = raw[0];
    d.used_order = f.used_order;
    if (f.fit) {
      d.residual = f.fit->residual;
      d.iterations = f.fit->iterations;
    }
    d.last_point = domain == n_max ? f.last_point_mass : 0.0;
    d.note = f.diagnostic;
    diag.sectors.push_back(std::move(d));
    out.fits.push_back(std::move(f));
  }
  diag.dropped_mass = out.dropped;
  return out;
}

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace detail

inline ProbabilityEstimate approx_outcome_prob(const KernelMatrix& kernel, const OutcomePattern& pattern,
                                               const EstimatorConfig& config = {}) {
  const auto t0 = std::chrono::steady_clock::now();
  detail::check_config(config);
  const KernelMatrix sub = pattern_submatrix(kernel, pattern);
  const std::size_t n = sub.dim();
  const double z = norm_z(kernel);
  const double z_sub = norm_z(sub);

  ProbabilityEstimate est;
  est.n_clicked = n;
  est.z_ratio = z_sub / z;

  if (n == 0 || n <= config.exact_threshold) {
    ExactOptions eo;
    eo.threads = resolve_threads(config.threads);
    est.value = exact_outcome_prob(kernel, pattern, eo);
    est.first_factor = est.value / est.z_ratio;
    est.exact = true;
    est.method = "exact";
    est.diagnostics.notes.push_back("exact inclusion-exclusion path (n_clicked <= exact_threshold)");
    est.seconds = detail::seconds_since(t0);
    return est;
  }

  est.method = "approx";
  est.order = config.order;
  const std::size_t l_min = (n + 1) / 2 + 8;
  const SectorSpectrum spec = sector_spectrum(sub, config.tail_eps, l_min, config.grid_cap);
  auto& diag = est.diagnostics;
  const SpectralGrid grid = detail::moment_grid(sub, spec, static_cast<double>(n), config, diag);
  diag.tail_mass = std::max(0.0, 1.0 - spec.total() / z_sub);

  const ElementarySums e = detail::elementary_sums(sub, grid, config, diag.elementary_path);
  const MomentTable table = assemble_moments(e, z_sub);
  const auto fits = detail::fit_sectors(table, n, config.order, config.retention, n, diag);

  std::string note;
  est.first_factor = last_point_sum(fits.fits, n, &note);
  if (!note.empty()) diag.notes.push_back(note);
  est.sectors_used = fits.fits.size();
  est.order_used = config.order;
  for (const auto& f : fits.fits) est.order_used = std::min(est.order_used, f.used_order);
  est.value = est.first_factor * est.z_ratio;
  est.seconds = detail::seconds_since(t0);
  return est;
}

inline ProbabilityEstimate approx_outcome_prob(const GBSInstance& instance, const OutcomePattern& pattern,
                                               const EstimatorConfig& config = {}) {
  return approx_outcome_prob(build_kernel(instance), pattern, config);
}

inline double relative_deviation(double p_approx, double p_exact) {
  if (!(p_exact > 0.0)) throw ValidationError("relative deviation is undefined for p_exact <= 0");
  return (p_approx - p_exact) / p_exact;
}

struct DeviationSample {
  std::string pattern;
  std::size_t n = 0;
  int order = 0;
  double p_exact = 0.0;
  double p_approx = 0.0;
  double delta = 0.0;
  double seconds = 0.0;
};

struct DeviationAggregate {
  int order = 0;
  std::size_t count = 0;
  double mean_abs = 0.0;
  double median_abs = 0.0;
  double stddev = 0.0;      // of the signed deviation
  double stddev_abs = 0.0;  // of |deviation|
};

namespace detail {

inline double sample_stddev(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

inline double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 == 1 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

}  // namespace detail

struct DeviationReport {
  std::vector<DeviationSample> samples;

  std::vector<int> orders() const {
    std::vector<int> out;
    for (const auto& s : samples)
      if (std::find(out.begin(), out.end(), s.order) == out.end()) out.push_back(s.order);
    return out;
  }
  DeviationAggregate aggregate(int order) const {
    std::vector<double> signed_dev;
    std::vector<double> abs_dev;
    for (const auto& s : samples) {
      if (s.order != order) continue;
      signed_dev.push_back(s.delta);
      abs_dev.push_back(std::abs(s.delta));
    }
    DeviationAggregate a;
    a.order = order;
    a.count = abs_dev.size();
    if (abs_dev.empty()) return a;
    a.mean_abs = std::accumulate(abs_dev.begin(), abs_dev.end(), 0.0) / static_cast<double>(abs_dev.size());
    a.median_abs = detail::median(abs_dev);
    a.stddev = detail::sample_stddev(signed_dev);
    a.stddev_abs = detail::sample_stddev(abs_dev);
    return a;
  }
  double fraction_below(int order, double bound) const {
    std::size_t total = 0;
    std::size_t hit = 0;
    for (const auto& s : samples) {
      if (s.order != order) continue;
      ++total;
      if (std::abs(s.delta) < bound) ++hit;
    }
    return total == 0 ? 0.0 : static_cast<double>(hit) / static_cast<double>(total);
  }
};

/// `count` patterns on m modes with exactly n clicks, each drawn uniformly by
/// a Fisher-Yates prefix from one seeded stream.
inline std::vector<OutcomePattern> sample_patterns(std::size_t m, std::size_t n, std::size_t count,
                                                   std::uint64_t seed) {
  if (n > m) throw ValidationError("cannot click more detectors than modes");
  Xoshiro256 rng(seed);
  std::vector<OutcomePattern> out;
  out.reserve(count);
  std::vector<std::size_t> perm(m);
  for (std::size_t c = 0; c < count; ++c) {
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(rng.below(m - i));
      std::swap(perm[i], perm[j]);
    }
    std::vector<std::size_t> clicked(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n));
    out.push_back(OutcomePattern::from_clicked(m, clicked));
  }
  return out;
}

struct SweepOptions {
  std::size_t n_clicked = 0;
  std::size_t samples = 0;
  std::vector<int> orders{2, 3, 4};
  std::uint64_t seed = 0;
  EstimatorConfig config;  // `order` is overridden per sample
  std::size_t max_exact_clicked = kExactDistributionGuard;
};

/// Exact reference plus one estimate per order for each sampled pattern.
/// Patterns are processed in order and the callback, if set, sees each row.
template <typename RowCallback = std::nullptr_t>
DeviationReport deviation_sweep(const GBSInstance& instance, const SweepOptions& options,
                                RowCallback&& on_row = nullptr) {
  if (options.n_clicked > options.max_exact_clicked)
    throw ResourceError("sweep needs an exact reference; n_clicked " + std::to_string(options.n_clicked) +
                        " exceeds " + std::to_string(options.max_exact_clicked));
  for (int j : options.orders)
    if (j < 2 || j > 4) throw ValidationError("sweep orders must be 2, 3 or 4");
  const KernelMatrix kernel = build_kernel(instance);
  const auto patterns = sample_patterns(instance.modes(), options.n_clicked, options.samples, options.seed);
  ExactOptions eo;
  eo.threads = resolve_threads(options.config.threads);
  DeviationReport report;
  for (const auto& pattern : patterns) {
    const double p_exact = exact_outcome_prob(kernel, pattern, eo);
    for (int j : options.orders) {
      EstimatorConfig cfg = options.config;
      cfg.order = j;
      const ProbabilityEstimate est = approx_outcome_prob(kernel, pattern, cfg);
      DeviationSample row;
      row.pattern = pattern.to_string();
      row.n = options.n_clicked;
      row.order = j;
      row.p_exact = p_exact;
      row.p_approx = est.value;
      row.delta = relative_deviation(est.value, p_exact);
      row.seconds = est.seconds;
      if constexpr (!std::is_same_v<std::decay_t<RowCallback>, std::nullptr_t>) on_row(row);
      report.samples.push_back(std::move(row));
    }
  }
  return report;
}

// p(n) curves

enum class CurveMode { exact, approx };

/// Click-number distribution n = 0..m. The approximate curve evaluates every
/// fitted full-system sector at each n and is a diagnostic, not a validated
/// estimator.
inline std::vector<double> click_number_curve(const GBSInstance& instance, CurveMode mode,
                                              const EstimatorConfig& config = {},
                                              EstimateDiagnostics* diagnostics = nullptr) {
  const KernelMatrix kernel = build_kernel(instance);
  const std::size_t m = kernel.dim();
  if (mode == CurveMode::exact) {
    ExactOptions eo;
    eo.threads = resolve_threads(config.threads);
    return exact_click_distribution(kernel, eo);
  }
  detail::check_config(config);
  EstimateDiagnostics local;
  EstimateDiagnostics& diag = diagnostics ? *diagnostics : local;
  const double z = norm_z(kernel);
  const SectorSpectrum spec = sector_spectrum(kernel, config.tail_eps, (m + 1) / 2 + 8, config.grid_cap);
  diag.tail_mass = std::max(0.0, 1.0 - spec.total() / z);
  const SpectralGrid grid = detail::moment_grid(kernel, spec, static_cast<double>(m), config, diag);
  const ElementarySums e = detail::elementary_sums(kernel, grid, config, diag.elementary_path);
  const MomentTable table = assemble_moments(e, z);
  const auto fits = detail::fit_sectors(table, m, config.order, config.retention, 0, diag);
  std::vector<double> curve(m + 1, 0.0);
  for (const auto& f : fits.fits)
    for (std::size_t nu = 0; nu <= f.domain_max; ++nu) curve[nu] += f.mass(nu);
  return curve;
}

struct SectorCurve {
  std::size_t photons = 0;
  std::vector<double> values;  // p_k(n), n = 0..m; empty for odd k
};

/// Per-sector contributions p_k(n) for the requested photon numbers.
inline std::vector<SectorCurve> sector_curves(const GBSInstance& instance, std::span<const std::size_t> photons,
                                              CurveMode mode, const EstimatorConfig& config = {}) {
  const KernelMatrix kernel = build_kernel(instance);
  const std::size_t m = kernel.dim();
  std::size_t l_need = 0;
  for (std::size_t k : photons) l_need = std::max(l_need, k / 2);
  std::vector<SectorCurve> out;
  for (std::size_t k : photons) out.push_back({k, {}});

  const double z = norm_z(kernel);
  const SectorSpectrum spec =
      sector_spectrum(kernel, config.tail_eps, std::max(l_need, (m + 1) / 2 + 8), config.grid_cap);
  if (mode == CurveMode::exact) {
    ExactOptions eo;
    eo.threads = resolve_threads(config.threads);
    const SectorClickTable table = exact_sector_click_distribution(kernel, spec.grid(), eo);
    for (auto& c : out) {
      if (c.photons % 2 != 0) continue;
      c.values.assign(m + 1, 0.0);
      const std::size_t l = c.photons / 2;
      if (l < table.prob.size()) c.values = table.prob[l];
    }
    return out;
  }
  detail::check_config(config);
  EstimateDiagnostics diag;
  const SpectralGrid grid = detail::moment_grid(kernel, spec, static_cast<double>(m), config, diag);
  const ElementarySums e = detail::elementary_sums(kernel, grid, config, diag.elementary_path);
  const MomentTable table = assemble_moments(e, z);
  const auto fits = detail::fit_sectors(table, m, config.order, config.retention, 0, diag);
  for (auto& c : out) {
    if (c.photons % 2 != 0) continue;
    c.values.assign(m + 1, 0.0);
    for (const auto& f : fits.fits) {
      if (f.photons != c.photons) continue;
      for (std::size_t nu = 0; nu <= f.domain_max; ++nu) c.values[nu] = f.mass(nu);
    }
  }
  return out;
}

}  // namespace tgbs
