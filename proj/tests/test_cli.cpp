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

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "json.hpp"
#include "sparsegrad/cli.hpp"
#include "sparsegrad/sparse_gradient.hpp"

namespace sparsegrad {
namespace {

struct Run {
  int code = 0;
  std::string out;
  std::string err;
};

Run run(const std::vector<std::string>& args) {
  std::ostringstream out;
  std::ostringstream err;
  Run r;
  r.code = cli_main(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> v;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) v.push_back(l);
  return v;
}

std::vector<std::string> fields(const std::string& line) {
  std::vector<std::string> v;
  std::istringstream in(line);
  for (std::string f; std::getline(in, f, ',');) v.push_back(f);
  if (!line.empty() && line.back() == ',') v.emplace_back();
  return v;
}

// Value of column `name` in a two-line CSV.
std::string column(const std::string& csv, const std::string& name) {
  const auto l = lines(csv);
  if (l.size() < 2) return "<missing>";
  const auto head = fields(l[0]);
  const auto row = fields(l[1]);
  for (std::size_t i = 0; i < head.size() && i < row.size(); ++i) {
    if (head[i] == name) return row[i];
  }
  return "<missing>";
}

std::string temp_path(const std::string& stem) {
  return ::testing::TempDir() + "sparsegrad_" + stem;
}

TEST(Cli, AdviseMatchesLibrary) {
  const auto r = run({"advise", "--s", "3", "--n", "25000", "--eps", "0.01", "--tau", "1"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(column(r.out, "m_min"), std::to_string(min_measurements(3, 25000, 0.01, 1.0)));
}

TEST(Cli, AdviseWithRepetitions) {
  const auto r = run({"advise", "--s", "3", "--n", "25000", "--eps", "0.01", "--tau", "1", "--c",
                      "1", "--t", "1"});
  ASSERT_EQ(r.code, 0) << r.err;
  const Index m = min_measurements(3, 25000, 0.01, 1.0);
  EXPECT_EQ(column(r.out, "k_min"), std::to_string(min_repetitions(m, 1.0, 1.0, 0.01)));
  EXPECT_EQ(column(r.out, "t_admissible"), "true");
}

TEST(Cli, EstimateDefaults) {
  const auto r = run({"estimate"});
  ASSERT_EQ(r.code, 0) << r.err;
  const std::string err = column(r.out, "rel_error");
  ASSERT_NE(err, "<missing>");
  EXPECT_TRUE(std::isfinite(std::stod(err)));
  EXPECT_EQ(column(r.out, "family"), "sum_squares");
  // 1 + 2 * 20 calibration evaluations and k + 1 = 11 measurement ones.
  EXPECT_EQ(column(r.out, "evals"), "52");
}

TEST(Cli, EstimateJsonl) {
  const auto r = run({"--format", "jsonl", "estimate", "--n", "50", "--probes", "0", "--tol", "0.01"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(lines(r.out).at(0));
  EXPECT_EQ(j["n"], 50);
  EXPECT_EQ(j["evals"], 11);
  EXPECT_TRUE(j["rel_error"].is_number());
}

TEST(Cli, EstimateExternalObjective) {
  const auto r = run({"estimate", "--external", ECHO_OBJECTIVE_PATH, "--n", "20", "--m", "8", "--k",
                      "3", "--probes", "0", "--tol", "0.001"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(column(r.out, "family"), "external");
  EXPECT_EQ(column(r.out, "rel_error"), "");
  EXPECT_EQ(column(r.out, "evals"), "4");
}

TEST(Cli, ExternalFailureIsRuntimeError) {
  const auto r = run({"estimate", "--external", std::string(ECHO_OBJECTIVE_PATH) + " 3", "--n", "5",
                      "--m", "4", "--probes", "0", "--tol", "0.1"});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("exited with status 3"), std::string::npos);
}

TEST(Cli, SeedFromEnvironmentAndFlag) {
  ::setenv("SPARSEGRAD_SEED", "41", 1);
  const auto env = run({"estimate", "--n", "30", "--probes", "0", "--tol", "0.01"});
  const auto flag = run({"--seed", "7", "estimate", "--n", "30", "--probes", "0", "--tol", "0.01"});
  ::setenv("SPARSEGRAD_SEED", "x1", 1);
  const auto broken = run({"estimate", "--n", "30", "--probes", "0", "--tol", "0.01"});
  ::unsetenv("SPARSEGRAD_SEED");
  EXPECT_EQ(column(env.out, "seed"), "41");
  EXPECT_EQ(column(flag.out, "seed"), "7");
  EXPECT_EQ(broken.code, 1);
}

TEST(Cli, OptimizeEmitsTrace) {
  const auto r = run({"optimize", "--method", "exact", "--n", "100", "--max-iter", "5"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto l = lines(r.out);
  ASSERT_GE(l.size(), 2u);
  EXPECT_EQ(l[0], "method,n,f,grad_norm,step,evals,wall_ms");
  EXPECT_EQ(fields(l[1])[0], "exact");
  EXPECT_NE(r.err.find("stop reason"), std::string::npos);
  EXPECT_EQ(run({"optimize", "--method", "newton"}).code, 1);
}

TEST(Cli, EgopSmall) {
  const auto r = run({"egop", "--n", "60", "--m", "20", "--k", "20", "--r", "3", "--probes", "5",
                      "--truth-samples", "500"});
  ASSERT_EQ(r.code, 0) << r.err;
  const double d = std::stod(column(r.out, "edr_distance"));
  EXPECT_GE(d, 0.0);
  EXPECT_LE(d, 1.0);
}

TEST(Cli, BenchIsReproducibleAndWritesFile) {
  const std::string config = temp_path("bench.json");
  {
    std::ofstream f(config);
    f << R"({"experiment": "tiny", "function": {"family": "quad_mmt", "n": 300},
             "estimator": {"m": 20, "delta": 1e-5, "calibration_probes": 5},
             "seeds": {"start": 0, "count": 3}, "kind": "error_vs_k",
             "sweep": {"axis": "k", "values": [1, 10]}})";
  }
  const auto a = run({"bench", "--config", config});
  const auto b = run({"bench", "--config", config, "--jobs", "2"});
  ASSERT_EQ(a.code, 0) << a.err;
  EXPECT_EQ(a.out, b.out);
  EXPECT_EQ(lines(a.out).at(0), "experiment,seed,sweep,metric,value,evals,wall_ms");
  EXPECT_EQ(lines(a.out).size(), 1u + 3u * 2u * 2u);

  const std::string out_path = temp_path("bench.csv");
  const auto c = run({"--out", out_path, "bench", "--config", config});
  ASSERT_EQ(c.code, 0) << c.err;
  EXPECT_TRUE(c.out.empty());
  std::ifstream in(out_path);
  std::stringstream written;
  written << in.rdbuf();
  EXPECT_EQ(written.str(), a.out);
  std::remove(config.c_str());
  std::remove(out_path.c_str());
}

TEST(Cli, ConfigErrorsExitOne) {
  EXPECT_EQ(run({}).code, 1);
  EXPECT_EQ(run({"frobnicate"}).code, 1);
  EXPECT_EQ(run({"advise", "--s", "3"}).code, 1);
  EXPECT_EQ(run({"advise", "--s", "0", "--n", "10", "--eps", "0.1", "--tau", "1"}).code, 1);
  EXPECT_EQ(run({"--format", "xml", "advise", "--s", "3", "--n", "10", "--eps", "0.1", "--tau",
                 "1"})
                .code,
            1);
  const auto missing = run({"bench", "--config", "/nonexistent.json"});
  EXPECT_EQ(missing.code, 1);
  EXPECT_NE(missing.err.find("cannot open"), std::string::npos);
  EXPECT_EQ(run({"estimate", "--probes", "0"}).code, 1);
}

TEST(Cli, HelpExitsZero) {
  const auto r = run({"--help"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("advise"), std::string::npos);
}

}  // namespace
}  // namespace sparsegrad
