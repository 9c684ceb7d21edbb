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

// Acceptance suite: one PASS/FAIL line per criterion. Pass criterion numbers
// as arguments to run a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <set>
#include <string>
#include <vector>

#include "test_util.hpp"

namespace {

using namespace tgbs;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::uint64_t peak_rss_bytes() {
  std::ifstream in("/proc/self/status");
  std::string line;
  while (std::getline(in, line))
    if (line.rfind("VmHWM:", 0) == 0) return std::stoull(line.substr(6)) * 1024;
  return 0;
}

OutcomePattern mask_pattern(std::size_t m, std::size_t mask) {
  std::string s(m, '0');
  for (std::size_t i = 0; i < m; ++i)
    if (mask >> i & 1U) s[i] = '1';
  return OutcomePattern::parse(s);
}

// Largest per-mode squeezing used for m-mode norm checks; the truncated Fock
// space grows as C(K + m - 1, m - 1) in the photon cutoff K.
double fock_squeezing_cap(std::size_t m) {
  static constexpr double caps[9] = {0.0, 1.5, 1.5, 1.5, 1.3, 0.8, 0.6, 0.45, 0.35};
  return caps[m];
}

Outcome criterion1() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  std::size_t largest_cutoff = 0;
  for (std::uint64_t i = 0; i < 100; ++i) {
    const std::size_t m = 1 + i % 8;
    const KernelMatrix k = build_kernel(testing::random_instance(m, fock_squeezing_cap(m), 10'000 + i));
    const FockNorm f = fock_squared_norm(k, 1e-10);
    worst = std::max(worst, testing::rel_diff(f.squared_norm, norm_z(k)));
    largest_cutoff = std::max(largest_cutoff, f.cutoff);
  }
  const double t = seconds_since(t0);
  return {worst <= 1e-6 && t < 60.0,
          fmt("100 instances m<=8: max rel |fock - Z| = %.2e (tol 1e-6), max cutoff %zu photons, %.1f s", worst,
              largest_cutoff, t)};
}

Outcome criterion2() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  for (std::uint64_t i = 0; i < 30; ++i) {
    const std::size_t m = 1 + i;
    const KernelMatrix k = build_kernel(testing::random_instance(m, 1.5, 20'000 + i));
    const SectorSpectrum s = sector_spectrum(k, 1e-10);
    worst = std::max(worst, testing::rel_diff(s.total(), s.z));
  }
  ComplexMatrix u(1, 1);
  u(0, 0) = 1.0;
  const SectorSpectrum one = sector_spectrum(build_kernel(GBSInstance({1.0}, u, std::nullopt)), 1e-12);
  const double g1_err = std::abs(one.weights.at(1) - std::pow(std::tanh(1.0), 2) / 2.0);
  const double t = seconds_since(t0);
  return {worst <= 1e-8 && g1_err <= 1e-10,
          fmt("30 instances m=1..30: max rel |sum g - Z| = %.2e (tol 1e-8); single-mode |g_1 - tanh^2/2| = %.2e "
              "(tol 1e-10), %.1f s",
              worst, g1_err, t)};
}

Outcome criterion3() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  double worst_total = 0.0;
  std::size_t patterns = 0;
  for (std::uint64_t i = 0; i < 40; ++i) {
    const std::size_t m = 1 + i % 4;
    const KernelMatrix k = build_kernel(testing::random_instance(m, 1.2, 30'000 + i));
    const FockClickTable table = fock_click_table(k, 1e-13);
    CompensatedSum total;
    for (std::size_t mask = 0; mask < (std::size_t{1} << m); ++mask) {
      const double p = exact_outcome_prob(k, mask_pattern(m, mask));
      worst = std::max(worst, std::abs(p - table.by_mask[mask] / table.captured_norm));
      total.add(p);
      ++patterns;
    }
    worst_total = std::max(worst_total, std::abs(total.value() - 1.0));
  }
  const double t = seconds_since(t0);
  return {worst <= 1e-8 && worst_total <= 1e-8 && t < 60.0,
          fmt("40 instances m<=4, %zu patterns: max |exact - fock| = %.2e (tol 1e-8), max |sum - 1| = %.2e, %.1f s",
              patterns, worst, worst_total, t)};
}

Outcome criterion4() {
  const auto t0 = Clock::now();
  double worst_rel = 0.0;
  double worst_floor = 0.0;
  for (std::uint64_t i = 0; i < 50; ++i) {
    const std::size_t n = 1 + i % 10;
    const KernelMatrix k = build_kernel(testing::random_instance(n, 1.5, 40'000 + i));
    const SectorSpectrum spec = sector_spectrum(k, 1e-12);
    const auto naive = elementary_sums_naive(k, spec.grid());
    const auto fast = elementary_sums_fast(k, spec.grid());
    for (std::size_t s = 0; s <= 4; ++s) {
      double scale = 0.0;
      for (double v : naive.sums[s]) scale = std::max(scale, std::abs(v));
      for (std::size_t l = 0; l <= spec.l_max; ++l) {
        const double d = std::abs(fast.sums[s][l] - naive.sums[s][l]);
        worst_floor = std::max(worst_floor, scale > 0 ? d / scale : d);
        if (naive.sums[s][l] >= 1e-6 * scale && scale > 0) worst_rel = std::max(worst_rel, d / naive.sums[s][l]);
      }
    }
  }
  double worst_moment = 0.0;
  for (std::uint64_t i = 0; i < 20; ++i) {
    const std::size_t m = 1 + i % 4;
    const KernelMatrix k = build_kernel(testing::random_instance(m, 1.2, 41'000 + i));
    const SectorSpectrum spec = sector_spectrum(k, 1e-12);
    const MomentTable t = assemble_moments(elementary_sums_fast(k, spec.grid()), spec.z);
    const SectorClickTable exact = exact_sector_click_distribution(k, spec.grid());
    for (std::size_t l = 0; l <= spec.l_max; ++l)
      for (std::size_t j = 0; j <= 4; ++j) {
        double e = 0.0;
        for (std::size_t c = 0; c <= m; ++c) e += std::pow(double(c), double(j)) * exact.at(l, c);
        worst_moment = std::max(worst_moment, std::abs(t.raw(l, j) - e));
      }
  }
  double worst_mean = 0.0;
  for (std::uint64_t i = 0; i < 20; ++i) {
    const std::size_t m = 2 + i;
    const KernelMatrix k = build_kernel(testing::random_instance(m, 1.4, 42'000 + i));
    const SectorSpectrum spec = sector_spectrum(k, 1e-12);
    MomentOptions one;
    one.max_order = 1;
    const MomentTable t = assemble_moments(elementary_sums_fast(k, spec.grid(), one), spec.z);
    worst_mean = std::max(worst_mean, testing::rel_diff(t.total(1), mean_clicks(k)));
  }
  const double t = seconds_since(t0);
  return {worst_rel <= 1e-9 && worst_floor <= 1e-13 && worst_moment <= 1e-6 && worst_mean <= 1e-10 && t < 300.0,
          fmt("fast vs naive (50 kernels n<=10): max rel %.2e on sectors >= 1e-6 of peak (tol 1e-9), max abs/peak "
              "%.2e; S vs exact sector moments (m<=4): %.2e (tol 1e-6); sum S_1 vs mean clicks: %.2e (tol 1e-10); "
              "%.1f s",
              worst_rel, worst_floor, worst_moment, worst_mean, t)};
}

Outcome criterion5() {
  const auto t0 = Clock::now();
  Xoshiro256 rng(50'000);
  double worst = 0.0;
  std::size_t fits = 0;
  bool all_converged = true;
  for (int order = 2; order <= 4; ++order) {
    for (std::size_t domain : {5u, 10u, 20u, 35u, 50u}) {
      for (int rep = 0; rep < 10; ++rep) {
        const double mu = domain * (0.15 + 0.7 * rng.uniform());
        const double sigma = 0.8 + domain * (0.25 + 0.25 * rng.uniform());
        std::array<double, 5> c{std::log(rng.uniform() + 0.01), rng.uniform() - 0.5, -0.4 - rng.uniform(), 0.0,
                                0.0};
        if (order >= 3) c[3] = 0.1 * (rng.uniform() - 0.5);
        if (order >= 4) c[4] = -0.02 - 0.1 * rng.uniform();
        std::vector<double> s(5, 0.0);
        for (std::size_t nu = 0; nu <= domain; ++nu) {
          const double z = (nu - mu) / sigma;
          const double q = std::exp(c[0] + z * (c[1] + z * (c[2] + z * (c[3] + z * c[4]))));
          for (int t = 0; t <= 4; ++t) s[static_cast<std::size_t>(t)] += q * std::pow(double(nu), t);
        }
        const SectorFit f = fit_sector(s, domain, order);
        all_converged = all_converged && f.fit && f.fit->converged && f.used_order == order;
        if (f.fit) worst = std::max(worst, f.fit->residual);
        ++fits;
      }
    }
  }
  const std::vector<double> vacuum{0.4, 0.0, 0.0, 0.0, 0.0};
  const SectorFit d = fit_sector(vacuum, 12, 4, 0);
  const bool degenerate_ok = d.point_mass() && d.used_order == 0 && d.point == 0 && d.last_point_mass == 0.0;
  const double t = seconds_since(t0);
  return {all_converged && worst < 1e-8 && degenerate_ok,
          fmt("%zu constructed generators (orders 2-4, domains up to 50): max moment residual %.2e (tol 1e-8), "
              "all at requested order: %s; degenerate sector as point mass without iteration: %s; %.2f s",
              fits, worst, all_converged ? "yes" : "no", degenerate_ok ? "yes" : "no", t)};
}

constexpr std::uint64_t kOrderSweepSeed = 2026;

DeviationReport& order_sweep() {
  static DeviationReport report = [] {
    const GBSInstance inst = testing::half_filled(20, 10, 1.4, kOrderSweepSeed);
    SweepOptions o;
    o.n_clicked = 14;
    o.samples = 50;
    o.seed = kOrderSweepSeed + 1;
    o.config.exact_threshold = 0;
    o.config.threads = 0;
    return deviation_sweep(inst, o);
  }();
  return report;
}

Outcome criterion6() {
  const auto t0 = Clock::now();
  const DeviationReport& r = order_sweep();
  const double m2 = r.aggregate(2).median_abs;
  const double m3 = r.aggregate(3).median_abs;
  const double m4 = r.aggregate(4).median_abs;
  const double t = seconds_since(t0);
  return {m2 > m3 && m3 > m4 && t < 1800.0,
          fmt("m=20, 10 squeezers r=1.4, 50 patterns n=14: median |dp| order 2/3/4 = %.3f / %.3f / %.3f "
              "(strictly decreasing required), %.1f s",
              m2, m3, m4, t)};
}

double mean_order4(std::size_t m, std::size_t n, double r, std::uint64_t seed, std::size_t samples) {
  const GBSInstance inst = testing::half_filled(m, m / 2, r, seed);
  SweepOptions o;
  o.n_clicked = n;
  o.samples = samples;
  o.orders = {4};
  o.seed = seed + 1;
  o.config.exact_threshold = 0;
  o.config.threads = 0;
  return deviation_sweep(inst, o).aggregate(4).mean_abs;
}

Outcome criterion7() {
  const auto t0 = Clock::now();
  std::vector<double> by_m;
  for (std::size_t m : {18u, 24u, 36u}) by_m.push_back(mean_order4(m, 12, 1.6, 7'000 + m, 30));
  std::vector<double> by_r;
  for (double r : {0.8, 1.2, 1.6}) by_r.push_back(mean_order4(20, 14, r, 7'100, 30));
  const bool left = by_m[0] <= by_m[1] && by_m[1] <= by_m[2];
  const bool right = by_r[0] >= by_r[1] && by_r[1] >= by_r[2];
  const double t = seconds_since(t0);
  return {left && right && t < 3600.0,
          fmt("n=12 r=1.6, m=18/24/36: mean |dp(4)| = %.3f / %.3f / %.3f (nondecreasing: %s); m=20 n=14, "
              "r=0.8/1.2/1.6: %.3f / %.3f / %.3f (nonincreasing: %s); 30 patterns per point, %.1f s",
              by_m[0], by_m[1], by_m[2], left ? "yes" : "no", by_r[0], by_r[1], by_r[2], right ? "yes" : "no", t)};
}

Outcome criterion8() {
  const auto t0 = Clock::now();
  const GBSInstance inst = testing::half_filled(70, 35, 1.4, 8'000);
  const OutcomePattern p = sample_patterns(70, 50, 1, 8'001).front();
  EstimatorConfig cfg;
  cfg.order = 4;
  cfg.threads = 0;
  const ProbabilityEstimate a = approx_outcome_prob(inst, p, cfg);
  const double first = a.seconds;
  const ProbabilityEstimate b = approx_outcome_prob(inst, p, cfg);
  const std::uint64_t peak = peak_rss_bytes();
  const bool ok = std::isfinite(a.value) && a.value > 0.0 && a.value == b.value && first <= 3600.0 &&
                  peak <= (std::uint64_t{32} << 30);
  (void)t0;
  return {ok, fmt("m=70, 35 squeezers r=1.4, n=50, order 4: p = %.6e, %.1f s per estimate (limit 3600 s) on %u "
                  "thread(s), peak RSS %.1f MiB (limit 32 GiB), rerun identical: %s",
                  a.value, first, resolve_threads(0), static_cast<double>(peak) / (1 << 20),
                  a.value == b.value ? "yes" : "no")};
}

Outcome criterion9() {
  const DeviationReport& r = order_sweep();
  const double frac = r.fraction_below(4, 0.8);
  return {frac >= 0.9, fmt("order-4 samples of the criterion 6 sweep with |dp| < 0.8: %.0f%% (>= 90%% required)",
                           100.0 * frac)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"norm identity", criterion1},        {"sector completeness", criterion2},
      {"exact-oracle agreement", criterion3}, {"moment correctness", criterion4},
      {"fit round trip", criterion5},       {"order improvement", criterion6},
      {"deviation trends", criterion7},     {"headline-scale performance", criterion8},
      {"accuracy envelope", criterion9}};
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!selected.empty() && !selected.count(id)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::printf("criterion %d %s (%s): %s\n", id, o.pass ? "PASS" : "FAIL", criteria[i].first, o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
