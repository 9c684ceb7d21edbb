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
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <vector>

#include "test_util.hpp"

namespace tgbs {
namespace {

constexpr double kTanh1 = 0.7615941559557649;

TEST(Model, SingleModeKernel) {
  ComplexMatrix u(1, 1);
  u(0, 0) = 1.0;
  const KernelMatrix k = build_kernel(GBSInstance({1.0}, u, std::nullopt));
  EXPECT_NEAR(k(0, 0).real(), kTanh1, 1e-15);
  EXPECT_EQ(k(0, 0).imag(), 0.0);
}

TEST(Model, VacuumKernelIsZero) {
  const KernelMatrix k = build_kernel(GBSInstance(std::vector<double>(5, 0.0), haar_unitary(5, 1), 1));
  EXPECT_EQ(max_abs(k.matrix()), 0.0);
}

TEST(Model, BeamsplitterKernel) {
  const KernelMatrix k = build_kernel(testing::beamsplitter_instance());
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) EXPECT_NEAR(std::abs(k(i, j) - Complex(kTanh1 / 2)), 0.0, 1e-15);
  const std::vector<std::size_t> second{1};
  const KernelMatrix sub = remove_modes(k, second);
  ASSERT_EQ(sub.dim(), 1u);
  EXPECT_NEAR(sub(0, 0).real(), kTanh1 / 2, 1e-15);
}

TEST(ModelProperty, KernelSymmetricAndPhysical) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto inst = testing::random_instance(3 + seed % 12, 3.0, seed);
    const KernelMatrix k = build_kernel(inst);
    EXPECT_EQ(k.matrix(), k.matrix().transpose());
    EXPECT_LT(pair_eigvals(k).maxCoeff(), 1.0);
  }
}

TEST(ModelProperty, NormIndependentOfInterferometer) {
  const std::vector<double> r{0.3, 1.1, 0.0, 0.7, 1.4};
  double expected = 1.0;
  for (double x : r) expected *= std::cosh(x);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const KernelMatrix k = build_kernel(GBSInstance(r, haar_unitary(5, seed), seed));
    EXPECT_LT(testing::rel_diff(norm_z(k), expected), 1e-12);
  }
}

TEST(ModelProperty, RemovalCommutes) {
  const KernelMatrix k = build_kernel(testing::random_instance(7, 1.0, 5));
  const std::vector<std::size_t> t1{1, 4};
  const std::vector<std::size_t> t2_reindexed{0, 3};  // modes 0 and 5 after deleting 1 and 4
  const std::vector<std::size_t> both{0, 1, 4, 5};
  EXPECT_EQ(remove_modes(remove_modes(k, t1), t2_reindexed).matrix(), remove_modes(k, both).matrix());
}

TEST(Model, RemoveEdgeCases) {
  const KernelMatrix k = build_kernel(testing::random_instance(4, 1.0, 5));
  EXPECT_EQ(remove_modes(k, {}).matrix(), k.matrix());
  const std::vector<std::size_t> all{0, 1, 2, 3};
  EXPECT_EQ(remove_modes(k, all).dim(), 0u);
  EXPECT_DOUBLE_EQ(norm_z(remove_modes(k, all)), 1.0);
  const std::vector<std::size_t> bad{4};
  EXPECT_THROW(remove_modes(k, bad), ValidationError);
}

TEST(Model, PatternSubmatrix) {
  const KernelMatrix k = build_kernel(testing::random_instance(3, 1.0, 9));
  EXPECT_EQ(pattern_submatrix(k, OutcomePattern::parse("111")).matrix(), k.matrix());
  EXPECT_EQ(pattern_submatrix(k, OutcomePattern::parse("000")).dim(), 0u);
  const KernelMatrix s = pattern_submatrix(k, OutcomePattern::parse("101"));
  ASSERT_EQ(s.dim(), 2u);
  EXPECT_EQ(s(0, 1), k(0, 2));
  EXPECT_EQ(s(1, 1), k(2, 2));
  EXPECT_THROW(pattern_submatrix(k, OutcomePattern::parse("10")), ValidationError);
}

TEST(Model, PatternParsing) {
  const auto p = OutcomePattern::parse("01101");
  EXPECT_EQ(p.size(), 5u);
  EXPECT_EQ(p.n_clicked(), 3u);
  EXPECT_EQ(p.clicked_modes(), (std::vector<std::size_t>{1, 2, 4}));
  EXPECT_EQ(p.to_string(), "01101");
  const std::vector<std::size_t> c{1, 2, 4};
  EXPECT_EQ(OutcomePattern::from_clicked(5, c), p);
  EXPECT_THROW(OutcomePattern::parse("01x"), ValidationError);
}

TEST(Model, InstanceValidation) {
  const ComplexMatrix u = haar_unitary(3, 1);
  EXPECT_THROW(GBSInstance({1.0, 1.0}, u, std::nullopt), ValidationError);
  EXPECT_THROW(GBSInstance({1.0, -0.1, 0.0}, u, std::nullopt), ValidationError);
  EXPECT_THROW(GBSInstance({1.0, NAN, 0.0}, u, std::nullopt), ValidationError);
  ComplexMatrix bad = u;
  bad(0, 0) += 1e-3;
  EXPECT_THROW(GBSInstance({1.0, 0.0, 0.0}, bad, std::nullopt), ValidationError);
}

class InstanceFile : public ::testing::Test {
 protected:
  std::filesystem::path path = std::filesystem::temp_directory_path() /
                               ("tgbs_model_" + std::to_string(::testing::UnitTest::GetInstance()->random_seed()) +
                                ".json");
  void TearDown() override { std::filesystem::remove(path); }
};

TEST_F(InstanceFile, RoundTripIsBitExact) {
  const auto inst = testing::random_instance(6, 1.5, 77);
  save_instance(inst, path.string());
  const auto back = load_instance(path.string());
  EXPECT_EQ(back.squeezing(), inst.squeezing());
  EXPECT_EQ(back.unitary(), inst.unitary());
  EXPECT_EQ(back.seed(), inst.seed());
}

TEST_F(InstanceFile, RejectsBadFiles) {
  auto j = instance_to_json(testing::random_instance(3, 1.0, 1));
  j["r"] = std::vector<double>{1.0, 1.0};
  std::ofstream(path) << j.dump();
  EXPECT_THROW(load_instance(path.string()), ValidationError);

  j = instance_to_json(testing::random_instance(3, 1.0, 1));
  j["U_re"][0][0] = j["U_re"][0][0].get<double>() + 1e-5;
  std::ofstream(path, std::ios::trunc) << j.dump();
  EXPECT_THROW(load_instance(path.string()), ValidationError);

  std::ofstream(path, std::ios::trunc) << "{ not json";
  EXPECT_THROW(load_instance(path.string()), ValidationError);
  EXPECT_THROW(load_instance("/nonexistent/dir/x.json"), ValidationError);
}

}  // namespace
}  // namespace tgbs
