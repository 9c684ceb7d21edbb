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

// Instance files:
//   { "m": int, "r": [float; m], "U_re": [[float; m]; m], "U_im": [[float; m]; m],
//     "seed": optional int }
// Row i of U_re/U_im is row i of U. Unknown keys (e.g. "config", "version")
// are ignored on load. Doubles are written in shortest round-trip form, so a
// save/load cycle is bit-exact.

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "tgbs/errors.hpp"
#include "tgbs/model.hpp"

namespace tgbs {

inline nlohmann::ordered_json instance_to_json(const GBSInstance& instance) {
  const auto m = static_cast<Eigen::Index>(instance.modes());
  nlohmann::ordered_json j;
  j["m"] = instance.modes();
  j["r"] = instance.squeezing();
  auto re = nlohmann::ordered_json::array();
  auto im = nlohmann::ordered_json::array();
  for (Eigen::Index i = 0; i < m; ++i) {
    std::vector<double> row_re(static_cast<std::size_t>(m));
    std::vector<double> row_im(static_cast<std::size_t>(m));
    for (Eigen::Index k = 0; k < m; ++k) {
      row_re[static_cast<std::size_t>(k)] = instance.unitary()(i, k).real();
      row_im[static_cast<std::size_t>(k)] = instance.unitary()(i, k).imag();
    }
    re.push_back(row_re);
    im.push_back(row_im);
  }
  j["U_re"] = re;
  j["U_im"] = im;
  if (instance.seed()) j["seed"] = *instance.seed();
  return j;
}

inline GBSInstance instance_from_json(const nlohmann::json& j) {
  try {
    if (!j.is_object()) throw ValidationError("instance file must hold a JSON object");
    for (const char* key : {"m", "r", "U_re", "U_im"})
      if (!j.contains(key)) throw ValidationError(std::string("instance file missing key '") + key + "'");
    const auto m = j.at("m").get<std::int64_t>();
    if (m < 1) throw ValidationError("instance mode count must be >= 1");
    const auto r = j.at("r").get<std::vector<double>>();
    if (r.size() != static_cast<std::size_t>(m))
      throw ValidationError("schema: 'r' has length " + std::to_string(r.size()) + ", expected m = " +
                            std::to_string(m));
    const auto re = j.at("U_re").get<std::vector<std::vector<double>>>();
    const auto im = j.at("U_im").get<std::vector<std::vector<double>>>();
    if (re.size() != static_cast<std::size_t>(m) || im.size() != static_cast<std::size_t>(m))
      throw ValidationError("schema: U_re/U_im must have m rows");
    ComplexMatrix u(m, m);
    for (std::int64_t i = 0; i < m; ++i) {
      const auto ui = static_cast<std::size_t>(i);
      if (re[ui].size() != static_cast<std::size_t>(m) || im[ui].size() != static_cast<std::size_t>(m))
        throw ValidationError("schema: U_re/U_im rows must have m entries");
      for (std::int64_t k = 0; k < m; ++k)
        u(i, k) = Complex(re[ui][static_cast<std::size_t>(k)], im[ui][static_cast<std::size_t>(k)]);
    }
    std::optional<std::uint64_t> seed;
    if (j.contains("seed") && !j.at("seed").is_null()) seed = j.at("seed").get<std::uint64_t>();
    return GBSInstance(r, std::move(u), seed);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed instance file: ") + e.what());
  }
}

/// Writes the instance; `extra` keys are appended after the schema fields.
inline void save_instance(const GBSInstance& instance, const std::string& path,
                          const nlohmann::ordered_json& extra = nlohmann::ordered_json::object()) {
  auto j = instance_to_json(instance);
  for (auto it = extra.begin(); it != extra.end(); ++it) j[it.key()] = it.value();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot open '" + path + "' for writing");
  out << j.dump(1) << '\n';
  if (!out) throw ValidationError("failed writing '" + path + "'");
}

inline GBSInstance load_instance(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open instance file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("malformed instance file '" + path + "': " + e.what());
  }
  return instance_from_json(j);
}

}  // namespace tgbs
