// Copyright 2026 The sparsegrad Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "sparsegrad/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

#include "json.hpp"
#include "sparsegrad/descent.hpp"
#include "sparsegrad/errors.hpp"
#include "sparsegrad/measurement.hpp"
#include "sparsegrad/parallel.hpp"

namespace sparsegrad {
namespace {

using json = nlohmann::json;
using Clock = std::chrono::steady_clock;

// Seed streams for one experiment seed.
constexpr std::uint64_t kFunctionStream = 100;
constexpr std::uint64_t kPointStream = 101;
constexpr std::uint64_t kMatrixStream = 102;
constexpr std::uint64_t kSignStream = 103;
constexpr std::uint64_t kEgopStream = 104;
constexpr std::uint64_t kTruthStream = 105;

const std::vector<std::string> kKinds{"error_vs_k", "comparison", "sparsity", "egop_vs_r",
                                      "optimizer"};
const std::vector<std::string> kMethods{"sgd", "nesterov", "adaptive", "kw", "exact"};

std::string axis_for(const std::string& kind) {
  if (kind == "error_vs_k") return "k";
  if (kind == "comparison") return "budget";
  if (kind == "sparsity") return "s";
  if (kind == "egop_vs_r") return "r";
  return "method";
}

std::string primary_metric(const std::string& kind) {
  if (kind == "comparison") return "proposed_rel_error";
  if (kind == "egop_vs_r") return "frob_error";
  if (kind == "optimizer") return "reached";
  return "rel_error";
}

double elapsed_ms(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError("config: '" + where + "' must be an object");
  for (const auto& item : j.items()) {
    if (!allowed.count(item.key())) {
      throw ConfigError("config: unknown key '" + item.key() + "' in " + where);
    }
  }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: bad value for '") + key + "': " + e.what());
  }
}

struct CellResult {
  std::vector<ResultRow> rows;
};

// Everything a cell needs that depends only on the seed.
struct SeedContext {
  std::uint64_t seed = 0;
  Matrix truth;  // egop_vs_r only
};

EstimatorConfig estimator_for(const ExperimentConfig& c, std::uint64_t seed, int k) {
  EstimatorConfig e;
  e.m = c.m;
  e.k = k;
  e.delta = c.delta;
  e.residual_tol = c.residual_tol;
  e.relative_tol = c.relative_tol;
  e.refit = c.refit;
  e.matrix_seed = derive_seed(seed, kMatrixStream);
  e.sign_seed = derive_seed(seed, kSignStream);
  return e;
}

FunctionSpec function_for(const ExperimentConfig& c, std::uint64_t seed) {
  FunctionSpec spec = c.function;
  spec.seed = derive_seed(c.function.seed, derive_seed(seed, kFunctionStream));
  return spec;
}

// Estimate with the configured tolerance source; calibration is charged to
// the same objective so evals reflect the full cost.
GradientEstimate estimate_with(const ExperimentConfig& c, const Objective& obj, const Vector& x,
                               EstimatorConfig e) {
  const auto a = gaussian_matrix(e.m, x.size(), e.matrix_seed);
  if (c.calibration_probes > 0) {
    e.relative_tol = 0.0;
    e.residual_tol = calibrate_tolerance(obj, x, e, a, c.calibration_probes);
  }
  return estimate_gradient(obj, x, e, a);
}

ResultRow row(const ExperimentConfig& c, std::uint64_t seed, const std::string& sweep,
              const std::string& metric, double value, std::int64_t evals, double wall_ms) {
  ResultRow r;
  r.experiment = c.id;
  r.seed = seed;
  r.sweep = sweep;
  r.metric = metric;
  r.value = value;
  r.evals = evals;
  r.wall_ms = c.record_wall_time ? wall_ms : 0.0;
  return r;
}

void error_cell(const ExperimentConfig& c, std::uint64_t seed, double value, CellResult& out) {
  const auto start = Clock::now();
  FunctionSpec spec = function_for(c, seed);
  int k = c.k;
  if (c.axis == "k") k = static_cast<int>(value);
  if (c.axis == "s") spec.s = static_cast<Index>(value);
  const auto tf = make_function(spec);
  const auto obj = tf.objective();
  const Vector x = normal_point(spec.n, derive_seed(seed, kPointStream));
  const auto est = estimate_with(c, obj, x, estimator_for(c, seed, k));
  const double err = relative_error(est.g, tf.gradient(x));
  const double ms = elapsed_ms(start);
  char sweep[32];
  std::snprintf(sweep, sizeof sweep, "%g", value);
  out.rows.push_back(row(c, seed, sweep, "rel_error", err, obj.eval_count(), ms));
  out.rows.push_back(row(c, seed, sweep, "support_size", static_cast<double>(est.support.size()),
                         obj.eval_count(), ms));
}

void comparison_cell(const ExperimentConfig& c, std::uint64_t seed, double value,
                     CellResult& out) {
  const auto budget = static_cast<std::int64_t>(value);
  const FunctionSpec spec = function_for(c, seed);
  const auto tf = make_function(spec);
  const Vector x = normal_point(spec.n, derive_seed(seed, kPointStream));
  const Vector truth = tf.gradient(x);
  char sweep[32];
  std::snprintf(sweep, sizeof sweep, "%lld", static_cast<long long>(budget));

  // Proposed: calibration (1 + 2P) and the k + 1 measurement evaluations
  // share the budget. f(x) is evaluated in both, as the two calls are
  // independent entry points.
  {
    const auto start = Clock::now();
    const auto obj = tf.objective();
    const std::int64_t calibration = c.calibration_probes > 0 ? 1 + 2 * c.calibration_probes : 0;
    const std::int64_t k = budget - 1 - calibration;
    if (k < 1) throw ConfigError("comparison: budget " + std::string(sweep) + " too small");
    const auto est = estimate_with(c, obj, x, estimator_for(c, seed, static_cast<int>(k)));
    out.rows.push_back(row(c, seed, sweep, "proposed_rel_error", relative_error(est.g, truth),
                           obj.eval_count(), elapsed_ms(start)));
  }
  {
    const auto start = Clock::now();
    const auto obj = tf.objective();
    const double delta = c.delta > 0.0 ? c.delta : default_delta(x);
    const Vector g = naive_sp_estimate(obj, x, delta, static_cast<int>(budget - 1),
                                       derive_seed(seed, kSignStream));
    out.rows.push_back(row(c, seed, sweep, "naive_rel_error", relative_error(g, truth),
                           obj.eval_count(), elapsed_ms(start)));
  }
}

void egop_cell(const ExperimentConfig& c, const SeedContext& ctx, double value, CellResult& out) {
  const auto start = Clock::now();
  const auto vf = make_vector_function(function_for(c, ctx.seed));
  std::vector<Objective> objectives;
  for (const auto& f : vf.outputs) objectives.push_back(f.objective());
  std::vector<const Objective*> outputs;
  for (const auto& o : objectives) outputs.push_back(&o);
  PointSampler sampler;
  sampler.scale = c.sample_scale;
  EgopOptions options;
  options.r = static_cast<int>(value);
  options.seed = derive_seed(ctx.seed, kEgopStream);
  options.calibration_probes = c.calibration_probes;
  const auto est = egop_estimate(outputs, sampler, estimator_for(c, ctx.seed, c.k), options);
  const double frob = (ctx.truth - est.g_hat).norm();
  const double truth_norm = ctx.truth.norm();
  const double dist = subspace_distance(edr_subspace(est, c.edr_dim).basis, vf.relevant_span);
  const double ms = elapsed_ms(start);
  char sweep[32];
  std::snprintf(sweep, sizeof sweep, "%d", options.r);
  out.rows.push_back(row(c, ctx.seed, sweep, "frob_error", frob, est.evals_used, ms));
  out.rows.push_back(row(c, ctx.seed, sweep, "rel_frob_error",
                         truth_norm > 0.0 ? frob / truth_norm : frob, est.evals_used, ms));
  out.rows.push_back(row(c, ctx.seed, sweep, "edr_distance", dist, est.evals_used, ms));
}

void optimizer_cell(const ExperimentConfig& c, std::uint64_t seed, const std::string& method,
                    CellResult& out) {
  const FunctionSpec spec = function_for(c, seed);
  const auto tf = make_function(spec);
  const Vector x0 = c.x0_scale * normal_point(spec.n, derive_seed(seed, kPointStream));
  const double f0 = tf.value(x0);
  StopRule stop;
  stop.max_iter = c.max_iter;
  stop.eval_budget = c.eval_budget;
  stop.g_tol = 0.0;
  // A thousandfold decrease when f0 > 0; otherwise demand the same absolute
  // improvement below f0.
  stop.target_value = f0 > 0.0 ? c.target_factor * f0 : f0 - std::abs(f0) * (1.0 - c.target_factor);
  const auto schedule = StepSchedule::harmonic(c.a0, c.n0);
  EstimatorConfig e = estimator_for(c, seed, c.descent_k);
  e.residual_tol = 0.0;
  e.relative_tol = c.descent_relative_tol;
  const auto obj = tf.objective();

  DescentTrace trace;
  if (method == "sgd") {
    trace = sgd_run(obj, x0, schedule, e, stop);
  } else if (method == "nesterov") {
    trace = nesterov_run(obj, x0, schedule, e, stop);
  } else if (method == "adaptive") {
    trace = adaptive_run(obj, x0, schedule, e, c.inner_steps, stop);
  } else if (method == "kw") {
    trace = kiefer_wolfowitz_run(obj, x0, schedule, c.kw_delta, stop);
  } else {
    trace = exact_gradient_run(obj, x0, schedule, tf.gradient, stop);
  }
  const auto& last = trace.records.back();
  const bool reached = trace.stop_reason == StopReason::kTarget;
  out.rows.push_back(row(c, seed, method, "reached", reached ? 1.0 : 0.0, last.evals, last.wall_ms));
  out.rows.push_back(row(c, seed, method, "iterations", trace.iterations(), last.evals,
                         last.wall_ms));
  out.rows.push_back(row(c, seed, method, "final_f", last.f, last.evals, last.wall_ms));
  if (c.record_wall_time) {
    out.rows.push_back(row(c, seed, method, "wall_ms", last.wall_ms, last.evals, last.wall_ms));
  }
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

}  // namespace

std::string ExperimentConfig::sweep_label(std::size_t i) const {
  if (axis == "method") return i < labels.size() ? labels[i] : std::string();
  if (i >= values.size()) return {};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", values[i]);
  return buf;
}

void ExperimentConfig::validate() const {
  if (id.empty()) throw ConfigError("config: 'experiment' is required");
  if (std::find(kKinds.begin(), kKinds.end(), kind) == kKinds.end()) {
    throw ConfigError("config: unknown experiment kind '" + kind + "'");
  }
  if (function.n < 1) throw ConfigError("config: function.n must be >= 1");
  if (m < 1) throw ConfigError("config: estimator.m must be >= 1");
  if (k < 1) throw ConfigError("config: estimator.k must be >= 1");
  if (!(delta >= 0.0)) throw ConfigError("config: estimator.delta must be >= 0");
  if (kind != "optimizer" && calibration_probes <= 0 && relative_tol <= 0.0 &&
      residual_tol <= 0.0) {
    throw ConfigError("config: need calibration_probes, relative_tol or residual_tol");
  }
  if (calibration_probes == 1 || calibration_probes < 0) {
    throw ConfigError("config: calibration_probes must be 0 or >= 2");
  }
  if (jobs < 1) throw ConfigError("config: jobs must be >= 1");
  if (axis != axis_for(kind)) {
    throw ConfigError("config: experiment kind '" + kind + "' sweeps '" + axis_for(kind) +
                      "', got '" + axis + "'");
  }
  if (axis == "method") {
    if (!values.empty()) throw ConfigError("config: method sweep takes string values");
    std::set<std::string> seen;
    for (const auto& l : labels) {
      if (std::find(kMethods.begin(), kMethods.end(), l) == kMethods.end()) {
        throw ConfigError("config: unknown method '" + l + "'");
      }
      if (!seen.insert(l).second) throw ConfigError("config: duplicate method '" + l + "'");
    }
    if (max_iter < 0 || eval_budget < 0) throw ConfigError("config: bad optimizer limits");
    if (!(a0 > 0.0) || !(n0 > 0.0)) throw ConfigError("config: a0 and n0 must be positive");
    if (!(target_factor > 0.0 && target_factor < 1.0)) {
      throw ConfigError("config: target_factor must lie in (0, 1)");
    }
    if (inner_steps < 1) throw ConfigError("config: inner_steps must be >= 1");
    if (descent_k < 1 || !(descent_relative_tol > 0.0)) {
      throw ConfigError("config: optimizer k and relative_tol must be positive");
    }
  } else {
    if (!labels.empty()) throw ConfigError("config: numeric sweep takes numbers");
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (!(values[i] >= 1.0) || values[i] != std::floor(values[i])) {
        throw ConfigError("config: sweep values must be positive integers");
      }
      if (i > 0 && !(values[i] > values[i - 1])) {
        throw ConfigError("config: sweep values must be strictly increasing");
      }
    }
  }
  if (kind == "egop_vs_r") {
    if (edr_dim < 1 || edr_dim > function.n) throw ConfigError("config: bad egop.edr_dim");
    if (truth_samples < 1) throw ConfigError("config: egop.truth_samples must be >= 1");
    if (!(sample_scale > 0.0)) throw ConfigError("config: egop.sample_scale must be positive");
  }
}

ExperimentConfig parse_experiment_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  check_keys(j,
             {"experiment", "kind", "function", "estimator", "egop", "optimizer", "seeds", "sweep",
              "jobs", "record_wall_time", "output", "notes"},
             "config");
  ExperimentConfig c;
  read(j, "experiment", c.id);
  c.kind = c.id;
  read(j, "kind", c.kind);
  if (j.contains("function")) {
    const auto& f = j.at("function");
    check_keys(f, {"family", "n", "s", "d", "seed"}, "function");
    read(f, "family", c.function.family);
    read(f, "n", c.function.n);
    read(f, "s", c.function.s);
    read(f, "d", c.function.d);
    read(f, "seed", c.function.seed);
  }
  if (j.contains("estimator")) {
    const auto& e = j.at("estimator");
    check_keys(e,
               {"m", "k", "delta", "residual_tol", "relative_tol", "calibration_probes", "refit"},
               "estimator");
    read(e, "m", c.m);
    read(e, "k", c.k);
    read(e, "delta", c.delta);
    read(e, "residual_tol", c.residual_tol);
    read(e, "relative_tol", c.relative_tol);
    read(e, "calibration_probes", c.calibration_probes);
    read(e, "refit", c.refit);
  }
  if (j.contains("egop")) {
    const auto& g = j.at("egop");
    check_keys(g, {"edr_dim", "sample_scale", "truth_samples"}, "egop");
    read(g, "edr_dim", c.edr_dim);
    read(g, "sample_scale", c.sample_scale);
    read(g, "truth_samples", c.truth_samples);
  }
  if (j.contains("optimizer")) {
    const auto& o = j.at("optimizer");
    check_keys(o,
               {"a0", "n0", "max_iter", "eval_budget", "target_factor", "inner_steps", "x0_scale",
                "kw_delta", "k", "relative_tol"},
               "optimizer");
    read(o, "a0", c.a0);
    read(o, "n0", c.n0);
    read(o, "max_iter", c.max_iter);
    read(o, "eval_budget", c.eval_budget);
    read(o, "target_factor", c.target_factor);
    read(o, "inner_steps", c.inner_steps);
    read(o, "x0_scale", c.x0_scale);
    read(o, "kw_delta", c.kw_delta);
    read(o, "k", c.descent_k);
    read(o, "relative_tol", c.descent_relative_tol);
  }
  if (j.contains("seeds")) {
    const auto& s = j.at("seeds");
    if (s.is_array()) {
      read(j, "seeds", c.seeds);
    } else {
      check_keys(s, {"start", "count"}, "seeds");
      std::uint64_t start = 0;
      std::int64_t count = 0;
      read(s, "start", start);
      read(s, "count", count);
      if (count < 0) throw ConfigError("config: seeds.count must be >= 0");
      for (std::int64_t i = 0; i < count; ++i) c.seeds.push_back(start + static_cast<std::uint64_t>(i));
    }
  }
  if (j.contains("sweep")) {
    const auto& s = j.at("sweep");
    check_keys(s, {"axis", "values"}, "sweep");
    read(s, "axis", c.axis);
    if (s.contains("values")) {
      const auto& v = s.at("values");
      if (!v.is_array()) throw ConfigError("config: sweep.values must be an array");
      for (const auto& item : v) {
        if (item.is_string()) {
          c.labels.push_back(item.get<std::string>());
        } else if (item.is_number()) {
          c.values.push_back(item.get<double>());
        } else {
          throw ConfigError("config: sweep values must be numbers or strings");
        }
      }
    }
  } else {
    c.axis = axis_for(c.kind);
  }
  read(j, "jobs", c.jobs);
  read(j, "record_wall_time", c.record_wall_time);
  read(j, "output", c.output);
  read(j, "notes", c.notes);
  c.validate();
  return c;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_experiment_config(buffer.str());
}

std::vector<ResultRow> run_experiment(const ExperimentConfig& config) {
  config.validate();
  const std::size_t sweeps = config.sweep_size();
  const std::size_t cells = config.seeds.size() * sweeps;
  if (cells == 0) return {};

  std::vector<SeedContext> contexts(config.seeds.size());
  for (std::size_t i = 0; i < contexts.size(); ++i) contexts[i].seed = config.seeds[i];
  if (config.kind == "egop_vs_r") {
    parallel_for(static_cast<int>(contexts.size()), config.jobs, [&](int i) {
      auto& ctx = contexts[static_cast<std::size_t>(i)];
      const auto vf = make_vector_function(function_for(config, ctx.seed));
      ctx.truth = expected_outer_product(vf, config.sample_scale, config.truth_samples,
                                         derive_seed(ctx.seed, kTruthStream));
    });
  }

  std::vector<CellResult> results(cells);
  parallel_for(static_cast<int>(cells), config.jobs, [&](int index) {
    const std::size_t cell = static_cast<std::size_t>(index);
    const SeedContext& ctx = contexts[cell / sweeps];
    const std::size_t j = cell % sweeps;
    CellResult& out = results[cell];
    const auto start = Clock::now();
    try {
      if (config.kind == "error_vs_k" || config.kind == "sparsity") {
        error_cell(config, ctx.seed, config.values[j], out);
      } else if (config.kind == "comparison") {
        comparison_cell(config, ctx.seed, config.values[j], out);
      } else if (config.kind == "egop_vs_r") {
        egop_cell(config, ctx, config.values[j], out);
      } else {
        optimizer_cell(config, ctx.seed, config.labels[j], out);
      }
    } catch (const Error& e) {
      out.rows.clear();
      ResultRow r = row(config, ctx.seed, config.sweep_label(j), primary_metric(config.kind), 0.0,
                        0, elapsed_ms(start));
      r.failed = true;
      out.rows.push_back(r);
    }
  });

  std::vector<ResultRow> rows;
  for (auto& r : results) {
    for (auto& x : r.rows) rows.push_back(std::move(x));
  }
  return rows;
}

OutputFormat parse_format(const std::string& name) {
  if (name == "csv") return OutputFormat::kCsv;
  if (name == "jsonl") return OutputFormat::kJsonl;
  throw ConfigError("unknown output format '" + name + "' (expected csv or jsonl)");
}

void write_rows(std::ostream& out, const std::vector<ResultRow>& rows, OutputFormat format,
                bool header) {
  if (format == OutputFormat::kCsv) {
    if (header) out << "experiment,seed,sweep,metric,value,evals,wall_ms\n";
    for (const auto& r : rows) {
      out << csv_field(r.experiment) << ',' << r.seed << ',' << csv_field(r.sweep) << ','
          << csv_field(r.metric) << ',' << (r.failed ? "failed" : format_double(r.value)) << ','
          << r.evals << ',' << format_double(r.wall_ms) << '\n';
    }
    return;
  }
  for (const auto& r : rows) {
    json j;
    j["experiment"] = r.experiment;
    j["seed"] = r.seed;
    j["sweep"] = r.sweep;
    j["metric"] = r.metric;
    if (r.failed) {
      j["value"] = "failed";
    } else {
      j["value"] = r.value;
    }
    j["evals"] = r.evals;
    j["wall_ms"] = r.wall_ms;
    out << j.dump() << '\n';
  }
}

double relative_error(const Vector& g, const Vector& g_true) {
  if (g.size() != g_true.size()) throw DimensionMismatch("relative_error: length mismatch");
  const double scale = g_true.norm();
  const double diff = (g - g_true).norm();
  return scale > 0.0 ? diff / scale : g.norm();
}

Matrix expected_outer_product(const VectorFunction& vf, double scale, int samples,
                              std::uint64_t seed) {
  if (samples < 1) throw InvalidArgument("expected_outer_product: samples must be >= 1");
  const Matrix& v = vf.relevant_span;
  if (v.cols() == 0 || v.rows() != vf.n) {
    throw InvalidArgument("expected_outer_product: function has no relevant span");
  }
  Matrix c = Matrix::Zero(v.cols(), v.cols());
  Rng rng(seed);
  Vector x(vf.n);
  for (int i = 0; i < samples; ++i) {
    for (Index t = 0; t < vf.n; ++t) x(t) = scale * rng.normal();
    for (const auto& f : vf.outputs) {
      const Vector p = v.transpose() * f.gradient(x);
      c.noalias() += p * p.transpose();
    }
  }
  c /= static_cast<double>(samples);
  return v * c * v.transpose();
}

double median(std::vector<double> values) {
  if (values.empty()) throw InvalidArgument("median: empty list");
  std::sort(values.begin(), values.end());
  const std::size_t h = values.size() / 2;
  return values.size() % 2 ? values[h] : 0.5 * (values[h - 1] + values[h]);
}

}  // namespace sparsegrad
