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

// Experiment sweeps driven by JSON configs, and the row format they emit.
//
// A config names an experiment kind, a test function, estimator settings, a
// seed list and one sweep axis. run_experiment evaluates every (seed, value)
// cell and returns rows in seed-major order. A cell that throws produces a
// single row whose value is the string "failed".

#ifndef SPARSEGRAD_EXPERIMENT_HPP_
#define SPARSEGRAD_EXPERIMENT_HPP_

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "sparsegrad/egop.hpp"
#include "sparsegrad/sparse_gradient.hpp"
#include "sparsegrad/zoo.hpp"

namespace sparsegrad {

/// Supported kinds: error_vs_k, comparison, sparsity, egop_vs_r, optimizer.
struct ExperimentConfig {
  std::string id;
  std::string kind;
  FunctionSpec function;

  // estimator
  Index m = 50;
  int k = 1;
  double delta = 1e-5;
  double residual_tol = 0.0;
  double relative_tol = 0.0;
  int calibration_probes = 20;
  bool refit = false;

  // egop_vs_r
  int r = 1;
  Index edr_dim = 3;
  double sample_scale = 1.0;
  int truth_samples = 20000;

  // optimizer
  double a0 = 0.05;
  double n0 = 100.0;
  int max_iter = 3000;
  std::int64_t eval_budget = 0;
  double target_factor = 1e-3;
  int inner_steps = 5;
  double x0_scale = 0.3;
  double kw_delta = 1e-5;
  int descent_k = 10;
  double descent_relative_tol = 0.3;

  std::vector<std::uint64_t> seeds;
  std::string axis;                       ///< k | s | r | budget | method
  std::vector<double> values;             ///< numeric axes
  std::vector<std::string> labels;        ///< method axis

  int jobs = 1;
  bool record_wall_time = false;
  std::string output;
  std::string notes;

  /// Throws ConfigError.
  void validate() const;
  std::size_t sweep_size() const { return axis == "method" ? labels.size() : values.size(); }
  std::string sweep_label(std::size_t i) const;
};

struct ResultRow {
  std::string experiment;
  std::uint64_t seed = 0;
  std::string sweep;
  std::string metric;
  double value = 0.0;
  bool failed = false;
  std::int64_t evals = 0;
  double wall_ms = 0.0;
};

/// Parses a config from JSON text or a file. Unknown keys are rejected.
ExperimentConfig parse_experiment_config(const std::string& json_text);
ExperimentConfig load_experiment_config(const std::string& path);

std::vector<ResultRow> run_experiment(const ExperimentConfig& config);

enum class OutputFormat { kCsv, kJsonl };
OutputFormat parse_format(const std::string& name);

/// CSV header: experiment,seed,sweep,metric,value,evals,wall_ms
void write_rows(std::ostream& out, const std::vector<ResultRow>& rows, OutputFormat format,
                bool header = true);

/// Relative error |g - g_true| / |g_true| (|g| when g_true is zero).
double relative_error(const Vector& g, const Vector& g_true);

/// E[sum_j grad f_j grad f_j^T] for x ~ N(0, scale^2 I), by Monte Carlo with
/// exact gradients projected onto the function's relevant span.
Matrix expected_outer_product(const VectorFunction& vf, double scale, int samples,
                              std::uint64_t seed);

/// Median of a list; throws on an empty list.
double median(std::vector<double> values);

}  // namespace sparsegrad

#endif  // SPARSEGRAD_EXPERIMENT_HPP_
