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

// Subcommands of the tgbs executable. Kept in a header so tests can drive
// the command line in-process through run_cli.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <new>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "tgbs/tgbs.hpp"

namespace tgbs::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitResource = 3;

using Json = nlohmann::ordered_json;

struct EstimatorFlags {
  int order = 4;
  double tail_eps = kEstimatorTailEps;
  std::size_t exact_threshold = kDefaultExactThreshold;
  double memory_budget_gib = 8.0;
  unsigned threads = 0;

  void add_to(CLI::App& app, bool with_order = true) {
    if (with_order) app.add_option("--order", order, "fit order (2, 3 or 4)")->check(CLI::Range(2, 4));
    app.add_option("--tail-eps", tail_eps, "sector truncation mass, relative to the sub-ensemble norm");
    app.add_option("--exact-threshold", exact_threshold, "use exact inclusion-exclusion up to this many clicks");
    app.add_option("--memory-budget", memory_budget_gib, "memory budget in GiB");
    app.add_option("--threads", threads, "worker threads (0: all cores)");
  }
  EstimatorConfig config() const {
    if (!(memory_budget_gib > 0.0)) throw ValidationError("--memory-budget must be positive");
    EstimatorConfig c;
    c.order = order;
    c.tail_eps = tail_eps;
    c.exact_threshold = exact_threshold;
    c.memory_budget = static_cast<std::uint64_t>(memory_budget_gib * static_cast<double>(std::uint64_t{1} << 30));
    c.threads = threads;
    return c;
  }
  Json to_json() const {
    Json j;
    j["order"] = order;
    j["tail_eps"] = tail_eps;
    j["exact_threshold"] = exact_threshold;
    j["memory_budget_gib"] = memory_budget_gib;
    j["threads"] = resolve_threads(threads);
    return j;
  }
};

inline std::vector<std::size_t> parse_list(const std::string& text, const char* what) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty() || item.find_first_not_of("0123456789") != std::string::npos)
      throw ValidationError(std::string(what) + ": expected a comma-separated list of non-negative integers");
    out.push_back(static_cast<std::size_t>(std::stoull(item)));
  }
  if (out.empty()) throw ValidationError(std::string(what) + ": list is empty");
  return out;
}

/// Peak resident set size in bytes, 0 where unavailable.
inline std::uint64_t peak_rss_bytes() {
  std::ifstream in("/proc/self/status");
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("VmHWM:", 0) == 0) {
      std::istringstream ls(line.substr(6));
      std::uint64_t kb = 0;
      ls >> kb;
      return kb * 1024;
    }
  }
  return 0;
}

/// Opens `path` for writing, "-" meaning `fallback`.
class Output {
 public:
  Output(const std::string& path, std::ostream& fallback) {
    if (path.empty() || path == "-") {
      stream_ = &fallback;
    } else {
      file_ = std::make_unique<std::ofstream>(path, std::ios::binary);
      if (!*file_) throw ValidationError("cannot open '" + path + "' for writing");
      stream_ = file_.get();
    }
  }
  std::ostream& operator*() { return *stream_; }
  void finish() {
    stream_->flush();
    if (!*stream_) throw ValidationError("write failed");
  }

 private:
  std::unique_ptr<std::ofstream> file_;
  std::ostream* stream_ = nullptr;
};

inline std::string format_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

inline Json diagnostics_json(const ProbabilityEstimate& est) {
  const auto& d = est.diagnostics;
  Json j;
  j["exact_path"] = est.exact;
  j["first_factor"] = est.first_factor;
  j["order_used"] = est.order_used;
  j["sectors_used"] = est.sectors_used;
  j["grid_nodes"] = d.grid_nodes;
  j["l_max"] = d.l_max;
  j["contour_radius"] = d.contour_radius;
  j["tail_mass"] = d.tail_mass;
  j["dropped_mass"] = d.dropped_mass;
  j["elementary_path"] = d.elementary_path;
  auto sectors = Json::array();
  for (const auto& s : d.sectors) {
    Json row;
    row["k"] = s.photons;
    row["mass"] = s.mass;
    row["order"] = s.used_order;
    row["residual"] = s.residual;
    row["iterations"] = s.iterations;
    row["last_point"] = s.last_point;
    if (!s.note.empty()) row["note"] = s.note;
    sectors.push_back(row);
  }
  j["sectors"] = sectors;
  j["notes"] = d.notes;
  return j;
}

inline void write_csv_preamble(std::ostream& os, const Json& config) {
  os << "# tgbs " << kVersion << '\n';
  os << "# config " << config.dump() << '\n';
}

// gen

struct GenArgs {
  std::size_t modes = 0;
  std::size_t squeezers = 0;
  double r = 1.4;
  std::uint64_t seed = 0;
  std::string positions;
  std::string out;
};

inline int cmd_gen(const GenArgs& a, std::ostream& out) {
  if (a.modes == 0) throw ValidationError("--modes must be >= 1");
  if (a.squeezers > a.modes) throw ValidationError("--squeezers cannot exceed --modes");
  if (!std::isfinite(a.r) || a.r < 0.0) throw ValidationError("--r must be finite and non-negative");
  std::vector<std::size_t> pos;
  if (!a.positions.empty()) {
    for (std::size_t p : parse_list(a.positions, "--positions")) {
      if (p < 1 || p > a.modes) throw ValidationError("--positions entries are 1-based mode numbers");
      pos.push_back(p - 1);
    }
    pos = checked_index_set(a.modes, pos);
    if (pos.size() != a.squeezers) throw ValidationError("--positions must list exactly --squeezers modes");
  } else {
    for (std::size_t i = 0; i < a.squeezers; ++i) pos.push_back(i);
  }
  std::vector<double> r(a.modes, 0.0);
  for (std::size_t p : pos) r[p] = a.r;
  const GBSInstance instance(r, haar_unitary(a.modes, a.seed), a.seed);

  Json cfg;
  cfg["command"] = "gen";
  cfg["modes"] = a.modes;
  cfg["squeezers"] = a.squeezers;
  cfg["r"] = a.r;
  cfg["seed"] = a.seed;
  std::vector<std::size_t> one_based;
  for (std::size_t p : pos) one_based.push_back(p + 1);
  cfg["positions"] = one_based;
  Json extra;
  extra["config"] = cfg;
  extra["version"] = std::string(kVersion);
  save_instance(instance, a.out, extra);
  out << "wrote " << a.out << '\n';
  return kExitOk;
}

// prob

struct ProbArgs {
  std::string instance;
  std::string pattern;
  bool exact = false;
  EstimatorFlags est;
  std::string out;
};

inline int cmd_prob(const ProbArgs& a, std::ostream& out) {
  const auto t0 = std::chrono::steady_clock::now();
  const GBSInstance instance = load_instance(a.instance);
  const OutcomePattern pattern = OutcomePattern::parse(a.pattern);
  if (pattern.size() != instance.modes())
    throw ValidationError("pattern length " + std::to_string(pattern.size()) + " does not match m = " +
                          std::to_string(instance.modes()));
  const EstimatorConfig config = a.est.config();
  ProbabilityEstimate est;
  if (a.exact) {
    const KernelMatrix kernel = build_kernel(instance);
    ExactOptions eo;
    eo.threads = resolve_threads(config.threads);
    est.value = exact_outcome_prob(kernel, pattern, eo);
    est.n_clicked = pattern.n_clicked();
    est.z_ratio = norm_z(pattern_submatrix(kernel, pattern)) / norm_z(kernel);
    est.first_factor = est.value / est.z_ratio;
    est.exact = true;
    est.method = "exact";
    est.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  } else {
    est = approx_outcome_prob(instance, pattern, config);
  }
  Json cfg;
  cfg["command"] = "prob";
  cfg["instance"] = a.instance;
  cfg["exact"] = a.exact;
  cfg["estimator"] = a.est.to_json();
  Json j;
  j["pattern"] = pattern.to_string();
  j["n"] = est.n_clicked;
  j["method"] = est.method;
  j["order"] = est.order;
  j["value"] = est.value;
  j["z_ratio"] = est.z_ratio;
  j["first_factor"] = est.first_factor;
  j["diagnostics"] = diagnostics_json(est);
  j["seconds"] = est.seconds;
  j["config"] = cfg;
  j["version"] = std::string(kVersion);
  Output o(a.out, out);
  *o << j.dump(2) << '\n';
  o.finish();
  return kExitOk;
}

// sweep

struct SweepArgs {
  std::string instance;
  std::size_t n_clicked = 0;
  std::size_t samples = 0;
  std::string orders = "2,3,4";
  std::uint64_t seed = 0;
  EstimatorFlags est;
  std::string out;
};

inline int cmd_sweep(const SweepArgs& a, std::ostream& out, std::ostream& err) {
  const GBSInstance instance = load_instance(a.instance);
  SweepOptions opts;
  opts.n_clicked = a.n_clicked;
  opts.samples = a.samples;
  opts.seed = a.seed;
  opts.orders.clear();
  for (std::size_t j : parse_list(a.orders, "--orders")) opts.orders.push_back(static_cast<int>(j));
  opts.config = a.est.config();
  if (a.n_clicked > instance.modes()) throw ValidationError("--n-clicked exceeds the mode count");

  Json cfg;
  cfg["command"] = "sweep";
  cfg["instance"] = a.instance;
  cfg["n_clicked"] = a.n_clicked;
  cfg["samples"] = a.samples;
  cfg["orders"] = a.orders;
  cfg["seed"] = a.seed;
  cfg["estimator"] = a.est.to_json();

  Output o(a.out, out);
  std::ostream& os = *o;
  write_csv_preamble(os, cfg);
  os << "pattern,n,order,p_exact,p_approx,delta_p,seconds\n";
  std::size_t rows = 0;
  const DeviationReport report = deviation_sweep(instance, opts, [&](const DeviationSample& s) {
    os << s.pattern << ',' << s.n << ',' << s.order << ',' << format_double(s.p_exact) << ','
       << format_double(s.p_approx) << ',' << format_double(s.delta) << ',' << format_double(s.seconds) << '\n';
    os.flush();
    if (++rows % opts.orders.size() == 0)
      err << "sweep: " << rows / opts.orders.size() << "/" << a.samples << " patterns\n";
  });
  os << "# summary,order,count,mean_abs_delta,median_abs_delta,stddev_abs_delta\n";
  for (int j : opts.orders) {
    const auto agg = report.aggregate(j);
    os << "# summary," << j << ',' << agg.count << ',' << format_double(agg.mean_abs) << ','
       << format_double(agg.median_abs) << ',' << format_double(agg.stddev_abs) << '\n';
  }
  o.finish();
  return kExitOk;
}

// curve

struct CurveArgs {
  std::string instance;
  std::string mode = "exact";
  std::string sectors;
  EstimatorFlags est;
  std::string out;
};

inline int cmd_curve(const CurveArgs& a, std::ostream& out) {
  const GBSInstance instance = load_instance(a.instance);
  CurveMode mode;
  if (a.mode == "exact") {
    mode = CurveMode::exact;
  } else if (a.mode == "approx") {
    mode = CurveMode::approx;
  } else {
    throw ValidationError("--mode must be 'exact' or 'approx'");
  }
  std::vector<std::size_t> ks;
  if (!a.sectors.empty()) ks = parse_list(a.sectors, "--sectors");
  EstimatorConfig config = a.est.config();
  const std::vector<double> p = click_number_curve(instance, mode, config);
  std::vector<SectorCurve> curves;
  if (!ks.empty()) curves = sector_curves(instance, ks, mode, config);

  Json cfg;
  cfg["command"] = "curve";
  cfg["instance"] = a.instance;
  cfg["mode"] = a.mode;
  cfg["sectors"] = a.sectors;
  cfg["estimator"] = a.est.to_json();
  Output o(a.out, out);
  std::ostream& os = *o;
  write_csv_preamble(os, cfg);
  os << "n,p";
  for (const auto& c : curves) os << ",p_" << c.photons;
  os << '\n';
  for (std::size_t n = 0; n < p.size(); ++n) {
    os << n << ',' << format_double(p[n]);
    for (const auto& c : curves) os << ',' << format_double(c.values.empty() ? 0.0 : c.values[n]);
    os << '\n';
  }
  o.finish();
  return kExitOk;
}

// bench

struct BenchArgs {
  std::size_t n_clicked = 50;
  std::size_t modes = 70;
  std::optional<std::size_t> squeezers;
  double r = 1.4;
  std::uint64_t seed = 1;
  EstimatorFlags est;
  std::string out;
};

inline int cmd_bench(const BenchArgs& a, std::ostream& out) {
  if (a.modes == 0) throw ValidationError("--modes must be >= 1");
  if (a.n_clicked > a.modes) throw ValidationError("--n-clicked exceeds --modes");
  const std::size_t s = a.squeezers.value_or(a.modes / 2);
  if (s > a.modes) throw ValidationError("--squeezers cannot exceed --modes");
  std::vector<double> r(a.modes, 0.0);
  for (std::size_t i = 0; i < s; ++i) r[i] = a.r;
  const GBSInstance instance(r, haar_unitary(a.modes, a.seed), a.seed);
  const OutcomePattern pattern = sample_patterns(a.modes, a.n_clicked, 1, a.seed).front();
  EstimatorConfig config = a.est.config();
  const ProbabilityEstimate est = approx_outcome_prob(instance, pattern, config);
  const std::uint64_t peak = peak_rss_bytes();
  if (peak > config.memory_budget)
    throw ResourceError("peak memory " + std::to_string(peak) + " bytes exceeded the budget of " +
                        std::to_string(config.memory_budget) + " bytes");
  Json cfg;
  cfg["command"] = "bench";
  cfg["modes"] = a.modes;
  cfg["squeezers"] = s;
  cfg["r"] = a.r;
  cfg["seed"] = a.seed;
  cfg["n_clicked"] = a.n_clicked;
  cfg["estimator"] = a.est.to_json();
  Json j;
  j["pattern"] = pattern.to_string();
  j["n"] = est.n_clicked;
  j["method"] = est.method;
  j["order"] = est.order;
  j["value"] = est.value;
  j["z_ratio"] = est.z_ratio;
  j["first_factor"] = est.first_factor;
  j["seconds"] = est.seconds;
  j["peak_rss_bytes"] = peak;
  j["grid_nodes"] = est.diagnostics.grid_nodes;
  j["sectors_used"] = est.sectors_used;
  j["config"] = cfg;
  j["version"] = std::string(kVersion);
  Output o(a.out, out);
  *o << j.dump(2) << '\n';
  o.finish();
  return kExitOk;
}

/// Parses and runs one command line. Returns the process exit code.
inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Threshold-detector Gaussian boson sampling probabilities", "tgbs"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  GenArgs gen;
  auto* g = app.add_subcommand("gen", "write a random instance file");
  g->add_option("--modes", gen.modes, "number of modes")->required();
  g->add_option("--squeezers", gen.squeezers, "number of squeezed inputs")->required();
  g->add_option("--r", gen.r, "squeezing parameter of every squeezed input");
  g->add_option("--seed", gen.seed, "seed of the Haar-random interferometer");
  g->add_option("--positions", gen.positions, "1-based squeezed modes, comma separated (default 1..s)");
  g->add_option("--out", gen.out, "instance JSON path")->required();

  ProbArgs prob;
  auto* p = app.add_subcommand("prob", "probability of one outcome pattern");
  p->add_option("--instance", prob.instance, "instance JSON path")->required();
  p->add_option("--pattern", prob.pattern, "outcome string of 0/1, one character per mode")->required();
  p->add_flag("--exact", prob.exact, "exact inclusion-exclusion instead of the approximation");
  prob.est.add_to(*p);
  p->add_option("--out", prob.out, "output path (default stdout)");

  SweepArgs sweep;
  auto* sw = app.add_subcommand("sweep", "exact vs approximate deviations over random patterns");
  sw->add_option("--instance", sweep.instance, "instance JSON path")->required();
  sw->add_option("--n-clicked", sweep.n_clicked, "clicks per pattern")->required();
  sw->add_option("--samples", sweep.samples, "number of patterns")->required();
  sw->add_option("--orders", sweep.orders, "comma-separated fit orders");
  sw->add_option("--seed", sweep.seed, "pattern sampling seed");
  sweep.est.add_to(*sw, false);
  sw->add_option("--out", sweep.out, "CSV path (default stdout)");

  CurveArgs curve;
  auto* cv = app.add_subcommand("curve", "click-number distribution p(n) and sector parts p_k(n)");
  cv->add_option("--instance", curve.instance, "instance JSON path")->required();
  cv->add_option("--mode", curve.mode, "exact or approx");
  cv->add_option("--sectors", curve.sectors, "comma-separated photon numbers k");
  curve.est.add_to(*cv);
  cv->add_option("--out", curve.out, "CSV path (default stdout)");

  BenchArgs bench;
  auto* b = app.add_subcommand("bench", "time one approximate estimate on a random instance");
  b->add_option("--n-clicked", bench.n_clicked, "clicks in the benchmark pattern");
  b->add_option("--modes", bench.modes, "number of modes");
  b->add_option("--squeezers", bench.squeezers, "squeezed inputs (default modes/2)");
  b->add_option("--r", bench.r, "squeezing parameter");
  b->add_option("--seed", bench.seed, "instance and pattern seed");
  bench.est.add_to(*b);
  b->add_option("--out", bench.out, "JSON path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitValidation;
  }

  try {
    if (*g) return cmd_gen(gen, out);
    if (*p) return cmd_prob(prob, out);
    if (*sw) return cmd_sweep(sweep, out, err);
    if (*cv) return cmd_curve(curve, out);
    if (*b) return cmd_bench(bench, out);
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const ResourceError& e) {
    err << "resource error: " << e.what() << " (peak rss " << peak_rss_bytes() << " bytes)\n";
    return kExitResource;
  } catch (const ConvergenceError& e) {
    err << "convergence error: " << e.what() << '\n';
    return kExitResource;
  } catch (const std::bad_alloc&) {
    err << "resource error: out of memory (peak rss " << peak_rss_bytes() << " bytes)\n";
    return kExitResource;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  }
  return kExitValidation;
}

}  // namespace tgbs::cli
