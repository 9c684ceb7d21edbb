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

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "test_util.hpp"

namespace tgbs {
namespace {

std::vector<double> raw_moments(const std::vector<double>& q, int order = 4) {
  std::vector<double> s(static_cast<std::size_t>(order) + 1, 0.0);
  for (std::size_t nu = 0; nu < q.size(); ++nu)
    for (int t = 0; t <= order; ++t) s[static_cast<std::size_t>(t)] += q[nu] * std::pow(double(nu), t);
  return s;
}

double max_of(const std::vector<double>& v) { return *std::max_element(v.begin(), v.end()); }

TEST(Fit, RecoversDiscretizedGaussian) {
  std::vector<double> q(31);
  for (std::size_t nu = 0; nu <= 30; ++nu) q[nu] = 0.4 * std::exp(-std::pow(nu - 17.3, 2) / (2 * 4.1 * 4.1));
  const SectorFit f = fit_sector(raw_moments(q, 2), 30, 2);
  ASSERT_TRUE(f.fit.has_value());
  EXPECT_TRUE(f.fit->converged);
  EXPECT_EQ(f.used_order, 2);
  for (std::size_t nu = 0; nu <= 30; ++nu) EXPECT_NEAR(f.mass(nu), q[nu], 1e-8 * max_of(q));
  EXPECT_NEAR(f.last_point_mass, q[30], 1e-8 * max_of(q));
}

// Constructed generators exp(sum_t c_t z^t) of orders 2..4 are recovered.
TEST(FitProperty, RoundTrip) {
  Xoshiro256 rng(17);
  int cases = 0;
  for (int order = 2; order <= 4; ++order) {
    for (std::size_t domain : {4u, 12u, 30u, 50u}) {
      for (int rep = 0; rep < 5; ++rep) {
        const double mu = domain * (0.2 + 0.6 * rng.uniform());
        const double sigma = 1.0 + 0.2 * domain * rng.uniform();
        std::array<double, 5> c{};
        c[1] = rng.uniform() - 0.5;
        c[2] = -0.5 - rng.uniform();
        if (order >= 3) c[3] = 0.2 * (rng.uniform() - 0.5);
        if (order >= 4) c[4] = -0.05 - 0.1 * rng.uniform();
        std::vector<double> q(domain + 1);
        for (std::size_t nu = 0; nu <= domain; ++nu) {
          const double z = (nu - mu) / sigma;
          q[nu] = std::exp(c[0] + c[1] * z + c[2] * z * z + c[3] * z * z * z + c[4] * z * z * z * z);
        }
        const auto s = raw_moments(q, order);
        const SectorFit f = fit_sector(s, domain, order, 2 * domain);
        ASSERT_TRUE(f.fit.has_value());
        EXPECT_EQ(f.used_order, std::min<int>(order, static_cast<int>(domain)));
        EXPECT_LT(f.fit->residual, 1e-8) << "order=" << order << " domain=" << domain;
        for (std::size_t nu = 0; nu <= domain; ++nu) {
          if (q[nu] > 1e-300) {
            EXPECT_GT(f.mass(nu), 0.0);
          }
          EXPECT_NEAR(f.mass(nu), q[nu], 1e-6 * max_of(q));
        }
        EXPECT_LE(f.last_point_mass, s[0] * (1 + 1e-6));
        ++cases;
      }
    }
  }
  EXPECT_EQ(cases, 60);
}

TEST(FitProperty, OrderNesting) {
  std::vector<double> q(41);
  for (std::size_t nu = 0; nu <= 40; ++nu) q[nu] = std::exp(-std::pow(nu - 22.0, 2) / 30.0);
  const SectorFit f = fit_sector(raw_moments(q, 4), 40, 4);
  ASSERT_TRUE(f.fit.has_value());
  EXPECT_EQ(f.used_order, 4);
  EXPECT_LT(std::abs(f.fit->coeffs[3]), 1e-6);
  EXPECT_LT(std::abs(f.fit->coeffs[4]), 1e-6);
}

TEST(Fit, DegenerateSectors) {
  const std::vector<double> vacuum{0.3, 0.0, 0.0, 0.0, 0.0};
  const SectorFit f = fit_sector(vacuum, 10, 4, 0);
  EXPECT_TRUE(f.point_mass());
  EXPECT_EQ(f.point, 0u);
  EXPECT_EQ(f.last_point_mass, 0.0);
  EXPECT_EQ(f.mass(0), 0.3);

  const double s0 = 0.2;
  const std::vector<double> top{s0, s0 * 10, s0 * 100, s0 * 1000, s0 * 10000};
  const SectorFit g = fit_sector(top, 10, 4, 20);
  EXPECT_TRUE(g.point_mass());
  EXPECT_EQ(g.last_point_mass, s0);

  const std::vector<double> one{0.5, 0.0, 0.0};
  const SectorFit h = fit_sector(one, 0, 2, 0);
  EXPECT_TRUE(h.point_mass());
  EXPECT_EQ(h.mass(0), 0.5);
}

TEST(Fit, FallsBackWhenHigherOrderCannotMatch) {
  // symmetric Gaussian with its fourth moment replaced by an unreachable value
  std::vector<double> q(11);
  for (std::size_t nu = 0; nu <= 10; ++nu) q[nu] = std::exp(-std::pow(nu - 5.0, 2) / 6.0);
  auto s = raw_moments(q, 4);
  const double mu = s[1] / s[0];
  const double var = s[2] / s[0] - mu * mu;
  s[4] = s[0] * (std::pow(mu, 4) + 6 * mu * mu * var + 0.5 * var * var);
  const SectorFit f = fit_sector(s, 10, 4);
  ASSERT_TRUE(f.fit.has_value());
  EXPECT_EQ(f.used_order, 3);
  EXPECT_FALSE(f.diagnostic.empty());
  EXPECT_LT(f.fit->residual, 1e-8);
}

TEST(Fit, Validation) {
  const std::vector<double> s{1.0, 2.0, 5.0, 14.0, 42.0};
  EXPECT_THROW(fit_sector(s, 10, 5), ValidationError);
  EXPECT_THROW(fit_sector(s, 10, 1), ValidationError);
  EXPECT_THROW(fit_sector(std::vector<double>{0.0, 0, 0, 0, 0}, 10, 2), ValidationError);
  EXPECT_THROW(fit_sector(std::vector<double>{1.0, 2.0}, 10, 2), ValidationError);
  EXPECT_THROW(fit_sector(std::vector<double>{1.0, 2.0, 1.0}, 10, 2), ValidationError);
  EXPECT_THROW(fit_sector(std::vector<double>{1.0, 12.0, 150.0}, 10, 2), ValidationError);
}

TEST(Fit, LastPointSum) {
  std::vector<SectorFit> fits;
  std::string diag;
  EXPECT_EQ(last_point_sum(fits, 5, &diag), 0.0);
  EXPECT_FALSE(diag.empty());

  fits.push_back(fit_sector(raw_moments({0.01, 0.03, 0.04, 0.02}), 3, 4, 2));  // k = 2 < 5: excluded
  const double s0 = 0.25;
  const std::vector<double> top{s0, s0 * 5, s0 * 25, s0 * 125, s0 * 625};
  fits.push_back(fit_sector(top, 5, 4, 6));
  diag.clear();
  EXPECT_DOUBLE_EQ(last_point_sum(fits, 5, &diag), s0);
  EXPECT_TRUE(diag.empty());
}

// Against exact sector distributions the fitted masses improve with order
// on most sectors.
TEST(FitProperty, HigherOrderTracksExactSectorsBetter) {
  std::size_t total = 0;
  std::size_t improving = 0;
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const KernelMatrix k = build_kernel(testing::half_filled(10, 5, 1.4, 900 + seed));
    const SectorSpectrum spec = sector_spectrum(k, 1e-12);
    const MomentTable t = assemble_moments(elementary_sums_fast(k, spec.grid()), spec.z);
    const SectorClickTable exact = exact_sector_click_distribution(k, spec.grid());
    for (std::size_t l = 3; l <= spec.l_max; ++l) {
      if (t.raw(l, 0) < 1e-6) continue;
      const std::size_t domain = std::min<std::size_t>(2 * l, 10);
      double err[5] = {};
      for (int j = 2; j <= 4; ++j) {
        const SectorFit f = fit_sector(t.moments(l), domain, j, 2 * l);
        for (std::size_t n = 0; n <= domain; ++n) err[j] += std::abs(f.mass(n) - exact.at(l, n));
      }
      ++total;
      if (err[4] <= err[3] && err[3] <= err[2]) ++improving;
    }
  }
  ASSERT_GT(total, 20u);
  EXPECT_GE(static_cast<double>(improving), 0.8 * static_cast<double>(total));
}

}  // namespace
}  // namespace tgbs
