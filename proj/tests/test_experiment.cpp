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

#include <cmath>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "json.hpp"
#include "sparsegrad/errors.hpp"
#include "sparsegrad/experiment.hpp"

namespace sparsegrad {
namespace {

const char* kSmall = R"({
  "experiment": "small",
  "kind": "error_vs_k",
  "function": {"family": "sum_squares", "n": 200, "s": 3},
  "estimator": {"m": 20, "delta": 1e-5, "calibration_probes": 10},
  "seeds": [3, 1],
  "sweep": {"axis": "k", "values": [5, 50]}
})";

std::string config_file(const std::string& name) {
  return std::string(SPARSEGRAD_CONFIG_DIR) + "/" + name + ".json";
}

TEST(ExperimentConfig, ParsesAndDefaults) {
  const auto c = parse_experiment_config(kSmall);
  EXPECT_EQ(c.id, "small");
  EXPECT_EQ(c.kind, "error_vs_k");
  EXPECT_EQ(c.function.n, 200);
  EXPECT_EQ(c.m, 20);
  ASSERT_EQ(c.seeds.size(), 2u);
  EXPECT_EQ(c.seeds[0], 3u);
  EXPECT_EQ(c.sweep_size(), 2u);
  EXPECT_EQ(c.sweep_label(1), "50");
  EXPECT_EQ(c.jobs, 1);
  EXPECT_FALSE(c.record_wall_time);
}

TEST(ExperimentConfig, SeedRange) {
  auto j = nlohmann::json::parse(kSmall);
  j["seeds"] = {{"start", 10}, {"count", 4}};
  const auto c = parse_experiment_config(j.dump());
  EXPECT_EQ(c.seeds, (std::vector<std::uint64_t>{10, 11, 12, 13}));
}

TEST(ExperimentConfig, RejectsBadConfigs) {
  auto bad = [](const std::function<void(nlohmann::json&)>& edit) {
    auto j = nlohmann::json::parse(kSmall);
    edit(j);
    return j.dump();
  };
  EXPECT_THROW(parse_experiment_config("{not json"), ConfigError);
  EXPECT_THROW(parse_experiment_config(bad([](auto& j) { j["colour"] = 1; })), ConfigError);
  EXPECT_THROW(parse_experiment_config(bad([](auto& j) { j["kind"] = "nope"; })), ConfigError);
  EXPECT_THROW(parse_experiment_config(bad([](auto& j) { j["sweep"]["values"] = {50, 5}; })),
               ConfigError);
  EXPECT_THROW(parse_experiment_config(bad([](auto& j) { j["sweep"]["values"] = {5, 5}; })),
               ConfigError);
  EXPECT_THROW(parse_experiment_config(bad([](auto& j) { j["sweep"]["axis"] = "r"; })),
               ConfigError);
  EXPECT_THROW(parse_experiment_config(bad([](auto& j) { j["estimator"]["m"] = "many"; })),
               ConfigError);
  EXPECT_THROW(parse_experiment_config(bad([](auto& j) { j["function"]["n"] = 0; })),
               ConfigError);
  EXPECT_THROW(parse_experiment_config(bad([](auto& j) {
                 j["estimator"]["calibration_probes"] = 0;
               })),
               ConfigError);
  EXPECT_THROW(load_experiment_config("/nonexistent/config.json"), ConfigError);
}

TEST(RunExperiment, RowsInSeedMajorOrder) {
  const auto rows = run_experiment(parse_experiment_config(kSmall));
  ASSERT_EQ(rows.size(), 8u);  // 2 seeds x 2 values x 2 metrics
  EXPECT_EQ(rows[0].seed, 3u);
  EXPECT_EQ(rows[0].sweep, "5");
  EXPECT_EQ(rows[0].metric, "rel_error");
  EXPECT_EQ(rows[2].sweep, "50");
  EXPECT_EQ(rows[4].seed, 1u);
  for (const auto& r : rows) {
    EXPECT_FALSE(r.failed);
    EXPECT_TRUE(std::isfinite(r.value));
    EXPECT_EQ(r.wall_ms, 0.0);
  }
  // k + 1 measurement evaluations plus 1 + 2 * 10 for calibration.
  EXPECT_EQ(rows[0].evals, 5 + 1 + 21);
  EXPECT_EQ(rows[2].evals, 50 + 1 + 21);
}

TEST(RunExperiment, EmptySeedListGivesNoRows) {
  auto j = nlohmann::json::parse(kSmall);
  j["seeds"] = nlohmann::json::array();
  EXPECT_TRUE(run_experiment(parse_experiment_config(j.dump())).empty());
}

TEST(RunExperiment, DeterministicAndIndependentOfJobs) {
  auto c = parse_experiment_config(kSmall);
  const auto a = run_experiment(c);
  c.jobs = 3;
  const auto b = run_experiment(c);
  ASSERT_EQ(a.size(), b.size());
  std::ostringstream sa;
  std::ostringstream sb;
  write_rows(sa, a, OutputFormat::kCsv);
  write_rows(sb, b, OutputFormat::kCsv);
  EXPECT_EQ(sa.str(), sb.str());
}

TEST(RunExperiment, FailedCellBecomesSentinelRow) {
  auto j = nlohmann::json::parse(kSmall);
  j["kind"] = "comparison";
  j["sweep"] = {{"axis", "budget"}, {"values", {10, 200}}};
  const auto rows = run_experiment(parse_experiment_config(j.dump()));
  // Budget 10 cannot pay for 10 calibration probes.
  ASSERT_EQ(rows.size(), 1u + 2u + 1u + 2u);
  EXPECT_TRUE(rows[0].failed);
  EXPECT_EQ(rows[0].sweep, "10");
  EXPECT_EQ(rows[0].metric, "proposed_rel_error");
  EXPECT_FALSE(rows[1].failed);
  EXPECT_LE(rows[1].evals, 200);
  EXPECT_EQ(rows[2].metric, "naive_rel_error");
  EXPECT_EQ(rows[2].evals, 200);
  std::ostringstream out;
  write_rows(out, rows, OutputFormat::kCsv);
  EXPECT_NE(out.str().find("small,3,10,proposed_rel_error,failed,0,0\n"), std::string::npos);
}

TEST(RunExperiment, OptimizerKind) {
  const char* text = R"({
    "experiment": "opt",
    "kind": "optimizer",
    "function": {"family": "eq14", "n": 200},
    "estimator": {"m": 30, "delta": 1e-5},
    "optimizer": {"a0": 0.02, "max_iter": 500, "k": 10, "relative_tol": 0.3},
    "seeds": [0],
    "sweep": {"axis": "method", "values": ["sgd", "kw", "exact"]}
  })";
  const auto rows = run_experiment(parse_experiment_config(text));
  ASSERT_EQ(rows.size(), 9u);
  for (const auto& r : rows) {
    if (r.metric == "reached") EXPECT_EQ(r.value, 1.0) << r.sweep;
  }
  EXPECT_EQ(rows[6].sweep, "exact");
  EXPECT_EQ(rows[6].evals, 0);
  EXPECT_EQ(rows[3].evals % 400, 0);
}

TEST(RunExperiment, EgopKind) {
  const char* text = R"({
    "experiment": "egop",
    "kind": "egop_vs_r",
    "function": {"family": "quad_mmt_vec", "n": 100, "s": 3},
    "estimator": {"m": 30, "k": 50, "delta": 1e-5, "calibration_probes": 10},
    "egop": {"truth_samples": 2000},
    "seeds": [0],
    "sweep": {"axis": "r", "values": [2, 8]}
  })";
  const auto rows = run_experiment(parse_experiment_config(text));
  ASSERT_EQ(rows.size(), 6u);
  EXPECT_EQ(rows[2].metric, "edr_distance");
  EXPECT_GE(rows[2].value, 0.0);
  EXPECT_LE(rows[2].value, 1.0);
  EXPECT_EQ(rows[3].evals, 4 * rows[0].evals);
}

TEST(WriteRows, JsonlMirrorsCsvFields) {
  ResultRow ok{"e", 7, "10", "rel_error", 0.25, false, 12, 0.0};
  ResultRow bad{"e", 8, "10", "rel_error", 0.0, true, 0, 0.0};
  std::ostringstream out;
  write_rows(out, {ok, bad}, OutputFormat::kJsonl);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  const auto j = nlohmann::json::parse(line);
  EXPECT_EQ(j.size(), 7u);
  EXPECT_EQ(j["experiment"], "e");
  EXPECT_EQ(j["seed"], 7);
  EXPECT_EQ(j["value"], 0.25);
  EXPECT_EQ(j["evals"], 12);
  std::getline(in, line);
  EXPECT_EQ(nlohmann::json::parse(line)["value"], "failed");
  EXPECT_THROW(parse_format("xml"), ConfigError);
}

TEST(Helpers, RelativeErrorAndMedian) {
  Vector g(2);
  g << 1.0, 0.0;
  Vector t(2);
  t << 2.0, 0.0;
  EXPECT_DOUBLE_EQ(relative_error(g, t), 0.5);
  EXPECT_DOUBLE_EQ(relative_error(g, Vector::Zero(2)), 1.0);
  EXPECT_DOUBLE_EQ(median({3.0, 1.0, 2.0}), 2.0);
  EXPECT_DOUBLE_EQ(median({4.0, 1.0, 2.0, 3.0}), 2.5);
  EXPECT_THROW(median({}), InvalidArgument);
}

TEST(Helpers, ExpectedOuterProductOfSingleQuadratic) {
  // f = (m.x)^2 with x ~ N(0, I) and m holding three +-1 entries:
  // E[grad grad^T] = 4 |m|^2 m m^T, whose trace is 4 |m|^4 = 36.
  const auto vf = make_vector_function({"quad_mmt_vec", 50, 3, 2, 5});
  VectorFunction one = vf;
  one.outputs.resize(1);
  const Matrix g = expected_outer_product(one, 1.0, 40000, 9);
  EXPECT_NEAR(g.trace(), 36.0, 0.05 * 36.0);
  EXPECT_LE((g - g.transpose()).norm(), 1e-12 * g.norm());
  one.relevant_span.resize(0, 0);
  EXPECT_THROW(expected_outer_product(one, 1.0, 10, 9), InvalidArgument);
}

TEST(ShippedConfigs, AllParse) {
  for (const char* name :
       {"error_vs_k", "comparison", "comparison_s50", "sparsity", "egop_vs_r", "optimizer"}) {
    EXPECT_NO_THROW(load_experiment_config(config_file(name))) << name;
  }
}

}  // namespace
}  // namespace sparsegrad
