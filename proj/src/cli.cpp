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

#include "sparsegrad/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <utility>

#include "CLI11.hpp"
#include "json.hpp"
#include "sparsegrad/descent.hpp"
#include "sparsegrad/egop.hpp"
#include "sparsegrad/errors.hpp"
#include "sparsegrad/experiment.hpp"
#include "sparsegrad/sparse_gradient.hpp"
#include "sparsegrad/zoo.hpp"

namespace sparsegrad {
namespace {

using json = nlohmann::json;
using Record = std::vector<std::pair<std::string, json>>;

std::string scalar_text(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_null()) return "";
  if (v.is_number_float()) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v.get<double>());
    return buf;
  }
  return v.dump();
}

void write_records(std::ostream& out, const std::vector<Record>& records, OutputFormat format) {
  if (records.empty()) return;
  if (format == OutputFormat::kJsonl) {
    for (const auto& r : records) {
      json j = json::object();
      for (const auto& [k, v] : r) j[k] = v;
      out << j.dump() << '\n';
    }
    return;
  }
  for (std::size_t i = 0; i < records.front().size(); ++i) {
    out << (i ? "," : "") << records.front()[i].first;
  }
  out << '\n';
  for (const auto& r : records) {
    for (std::size_t i = 0; i < r.size(); ++i) out << (i ? "," : "") << scalar_text(r[i].second);
    out << '\n';
  }
}

std::string join(const std::vector<Index>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + std::to_string(v[i]);
  return s;
}

std::vector<std::string> split_command(const std::string& command) {
  std::istringstream in(command);
  std::vector<std::string> argv;
  for (std::string word; in >> word;) argv.push_back(word);
  if (argv.empty()) throw ConfigError("--external: empty command");
  return argv;
}

std::uint64_t default_seed() {
  const char* env = std::getenv("SPARSEGRAD_SEED");
  if (env == nullptr || *env == '\0') return 0;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(env, &end, 10);
  if (*end != '\0') throw ConfigError("SPARSEGRAD_SEED is not an unsigned integer");
  return v;
}

struct Globals {
  std::optional<std::uint64_t> seed;
  std::string out;
  std::string format = "csv";

  std::uint64_t resolved_seed() const { return seed ? *seed : default_seed(); }
};

struct EstimatorFlags {
  std::string family = "sum_squares";
  Index n = 100;
  Index s = 3;
  Index m = 20;
  int k = 10;
  double delta = 1e-5;
  double tol = 0.0;
  double relative_tol = 0.0;
  int probes = 20;

  void add(CLI::App* cmd) {
    cmd->add_option("--family", family, "test function family")->capture_default_str();
    cmd->add_option("--n", n, "dimension")->capture_default_str()->check(CLI::PositiveNumber);
    cmd->add_option("--s", s, "sparsity parameter of the test function")->capture_default_str();
    cmd->add_option("--m", m, "measurements")->capture_default_str()->check(CLI::PositiveNumber);
    cmd->add_option("--k", k, "SP repetitions")->capture_default_str()->check(CLI::PositiveNumber);
    cmd->add_option("--delta", delta, "SP step (0 picks 1e-3 (1 + |x|))")->capture_default_str();
    cmd->add_option("--tol", tol, "absolute residual tolerance");
    cmd->add_option("--relative-tol", relative_tol, "residual tolerance relative to |y|");
    cmd->add_option("--probes", probes, "calibration probes (0 disables calibration)")
        ->capture_default_str();
  }

  EstimatorConfig config(std::uint64_t seed) const {
    EstimatorConfig c;
    c.m = m;
    c.k = k;
    c.delta = delta;
    c.residual_tol = tol;
    c.relative_tol = relative_tol;
    c.matrix_seed = derive_seed(seed, 2);
    c.sign_seed = derive_seed(seed, 3);
    if (probes <= 0) c.validate();
    return c;
  }
};

int run_estimate(const Globals& g, const EstimatorFlags& f, const std::string& external,
                 double noise, std::vector<Record>& out) {
  const std::uint64_t seed = g.resolved_seed();
  std::optional<TestFunction> tf;
  std::unique_ptr<Objective> obj;
  const NoiseModel nm{noise, derive_seed(seed, 4)};
  if (!external.empty()) {
    obj = std::make_unique<Objective>(make_external_objective(split_command(external), f.n, nm));
  } else {
    tf = make_function({f.family, f.n, f.s, 2, seed});
    obj = std::make_unique<Objective>(tf->objective(nm));
  }
  const Vector x = normal_point(f.n, derive_seed(seed, 1));
  EstimatorConfig c = f.config(seed);
  const auto a = gaussian_matrix(c.m, f.n, c.matrix_seed);
  if (f.probes > 0) {
    c.relative_tol = 0.0;
    c.residual_tol = calibrate_tolerance(*obj, x, c, a, f.probes);
  }
  const auto est = estimate_gradient(*obj, x, c, a);
  Record r;
  r.emplace_back("family", external.empty() ? f.family : "external");
  r.emplace_back("n", f.n);
  r.emplace_back("m", c.m);
  r.emplace_back("k", c.k);
  r.emplace_back("seed", seed);
  r.emplace_back("evals", obj->eval_count());
  r.emplace_back("residual_tol", est.residual_tol);
  r.emplace_back("residual_norm", est.residual_norm);
  r.emplace_back("support_size", est.support.size());
  r.emplace_back("rel_error", tf ? json(relative_error(est.g, tf->gradient(x))) : json());
  r.emplace_back("support", join(est.support));
  out.push_back(std::move(r));
  return 0;
}

struct EgopFlags {
  int r = 10;
  Index d = 3;
  int truth_samples = 5000;
};

int run_egop(const Globals& g, const EstimatorFlags& f, const EgopFlags& e,
             std::vector<Record>& out) {
  const std::uint64_t seed = g.resolved_seed();
  const auto vf = make_vector_function({f.family, f.n, f.s, 2, seed});
  std::vector<Objective> objectives;
  for (const auto& o : vf.outputs) objectives.push_back(o.objective());
  std::vector<const Objective*> outputs;
  for (const auto& o : objectives) outputs.push_back(&o);
  EgopOptions options;
  options.r = e.r;
  options.seed = derive_seed(seed, 5);
  options.calibration_probes = f.probes;
  const auto est = egop_estimate(outputs, PointSampler{}, f.config(seed), options);
  const auto sub = edr_subspace(est, e.d);
  Record r;
  r.emplace_back("family", f.family);
  r.emplace_back("n", f.n);
  r.emplace_back("r", e.r);
  r.emplace_back("seed", seed);
  r.emplace_back("evals", est.evals_used);
  std::string values;
  for (Index i = 0; i < e.d && i < est.eigenvalues.size(); ++i) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%s%.6g", i ? " " : "", est.eigenvalues(i));
    values += buf;
  }
  r.emplace_back("top_eigenvalues", values);
  r.emplace_back("rank_deficient", sub.rank_deficient);
  if (vf.relevant_span.cols() > 0) {
    const Matrix truth = expected_outer_product(vf, 1.0, e.truth_samples, derive_seed(seed, 6));
    const double frob = (truth - est.g_hat).norm();
    r.emplace_back("edr_distance", subspace_distance(sub.basis, vf.relevant_span));
    r.emplace_back("frob_error", frob);
    r.emplace_back("rel_frob_error", frob / truth.norm());
  }
  out.push_back(std::move(r));
  return 0;
}

struct OptimizeFlags {
  std::string method = "sgd";
  double a0 = 0.02;
  double n0 = 100.0;
  int max_iter = 2000;
  std::int64_t budget = 0;
  double target_factor = 1e-3;
  int inner_steps = 5;
  double x0_scale = 0.3;
};

int run_optimize(const Globals& g, const EstimatorFlags& f, const OptimizeFlags& o,
                 std::vector<Record>& out, std::ostream& err) {
  const std::uint64_t seed = g.resolved_seed();
  const auto tf = make_function({f.family, f.n, f.s, 2, seed});
  const Vector x0 = o.x0_scale * normal_point(f.n, derive_seed(seed, 1));
  StopRule stop;
  stop.max_iter = o.max_iter;
  stop.eval_budget = o.budget;
  stop.g_tol = 0.0;
  const double f0 = tf.value(x0);
  if (o.target_factor > 0.0 && f0 > 0.0) stop.target_value = o.target_factor * f0;
  const auto schedule = StepSchedule::harmonic(o.a0, o.n0);
  const EstimatorConfig c = f.config(seed);
  const auto obj = tf.objective();
  DescentTrace trace;
  if (o.method == "sgd") {
    trace = sgd_run(obj, x0, schedule, c, stop);
  } else if (o.method == "nesterov") {
    trace = nesterov_run(obj, x0, schedule, c, stop);
  } else if (o.method == "adaptive") {
    trace = adaptive_run(obj, x0, schedule, c, o.inner_steps, stop);
  } else if (o.method == "kw") {
    trace = kiefer_wolfowitz_run(obj, x0, schedule, f.delta > 0.0 ? f.delta : 1e-5, stop);
  } else {
    trace = exact_gradient_run(obj, x0, schedule, tf.gradient, stop);
  }
  for (const auto& rec : trace.records) {
    Record r;
    r.emplace_back("method", trace.method);
    r.emplace_back("n", rec.n);
    r.emplace_back("f", rec.f);
    r.emplace_back("grad_norm", rec.grad_norm);
    r.emplace_back("step", rec.step);
    r.emplace_back("evals", rec.evals);
    r.emplace_back("wall_ms", rec.wall_ms);
    out.push_back(std::move(r));
  }
  err << trace.method << ": " << trace.iterations() << " iterations, stop reason "
      << to_string(trace.stop_reason) << '\n';
  return 0;
}

struct AdviseFlags {
  Index s = 0;
  Index n = 0;
  double eps = 0.0;
  double tau = 0.0;
  double c = 0.0;
  double t = 0.0;
  double k_const = 0.0;
  double delta = 0.0;
};

int run_advise(const AdviseFlags& a, std::vector<Record>& out) {
  Record r;
  r.emplace_back("s", a.s);
  r.emplace_back("n", a.n);
  r.emplace_back("eps", a.eps);
  r.emplace_back("tau", a.tau);
  if (a.c > 0.0 && a.t > 0.0) {
    const auto rep = advise(a.s, a.n, a.eps, a.tau, a.c, a.t, a.k_const, a.delta);
    r.emplace_back("m_min", rep.m_min);
    r.emplace_back("k_min", rep.k_min);
    r.emplace_back("t_floor", rep.t_floor);
    r.emplace_back("t_admissible", rep.t_admissible);
  } else {
    r.emplace_back("m_min", min_measurements(a.s, a.n, a.eps, a.tau));
  }
  out.push_back(std::move(r));
  return 0;
}

}  // namespace

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Sparse gradient estimation from function values"};
  app.name("sparsegrad");
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--seed", g.seed, "master seed (default: $SPARSEGRAD_SEED or 0)");
  app.add_option("--out", g.out, "output file (default: standard output)");
  app.add_option("--format", g.format, "csv or jsonl")
      ->capture_default_str()
      ->check(CLI::IsMember({"csv", "jsonl"}));

  EstimatorFlags est_flags;
  std::string external;
  double noise = 0.0;
  auto* estimate = app.add_subcommand("estimate", "estimate one gradient");
  est_flags.add(estimate);
  estimate->add_option("--external", external,
                       "objective command; reads x on stdin, prints f(x)");
  estimate->add_option("--noise", noise, "std of additive evaluation noise");

  EstimatorFlags egop_est;
  egop_est.family = "quad_mmt_vec";
  egop_est.n = 500;
  egop_est.m = 40;
  egop_est.k = 50;
  EgopFlags egop_flags;
  auto* egop = app.add_subcommand("egop", "estimate the expected gradient outer product");
  egop_est.add(egop);
  egop->add_option("--r", egop_flags.r, "sample points")->capture_default_str();
  egop->add_option("--d", egop_flags.d, "subspace dimension")->capture_default_str();
  egop->add_option("--truth-samples", egop_flags.truth_samples,
                   "Monte Carlo samples for the reference EGOP")
      ->capture_default_str();

  EstimatorFlags opt_est;
  opt_est.family = "eq14";
  opt_est.n = 500;
  opt_est.m = 50;
  opt_est.probes = 0;
  opt_est.relative_tol = 0.3;
  OptimizeFlags opt_flags;
  auto* optimize = app.add_subcommand("optimize", "run a descent method and print its trace");
  opt_est.add(optimize);
  optimize->add_option("--method", opt_flags.method)
      ->capture_default_str()
      ->check(CLI::IsMember({"sgd", "nesterov", "adaptive", "kw", "exact"}));
  optimize->add_option("--a0", opt_flags.a0, "initial step")->capture_default_str();
  optimize->add_option("--n0", opt_flags.n0, "step decay scale")->capture_default_str();
  optimize->add_option("--max-iter", opt_flags.max_iter)->capture_default_str();
  optimize->add_option("--budget", opt_flags.budget, "evaluation budget, 0 for none")
      ->capture_default_str();
  optimize->add_option("--target-factor", opt_flags.target_factor,
                       "stop once f <= factor * f(x0)")
      ->capture_default_str();
  optimize->add_option("--inner-steps", opt_flags.inner_steps, "homotopy steps per iteration")
      ->capture_default_str();
  optimize->add_option("--x0-scale", opt_flags.x0_scale)->capture_default_str();

  std::string config_path;
  int jobs = 0;
  auto* bench = app.add_subcommand("bench", "run an experiment config");
  bench->add_option("--config", config_path, "JSON experiment config")->required();
  bench->add_option("--jobs", jobs, "parallel cells (default: from config)");

  AdviseFlags adv;
  auto* advise_cmd = app.add_subcommand("advise", "minimum measurements and repetitions");
  advise_cmd->add_option("--s", adv.s)->required();
  advise_cmd->add_option("--n", adv.n)->required();
  advise_cmd->add_option("--eps", adv.eps)->required();
  advise_cmd->add_option("--tau", adv.tau)->required();
  advise_cmd->add_option("--c", adv.c, "bound on third derivatives");
  advise_cmd->add_option("--t", adv.t, "deviation allowed for the averaged measurements");
  advise_cmd->add_option("--K", adv.k_const, "constant of the O(delta) term");
  advise_cmd->add_option("--delta", adv.delta);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "sparsegrad: " << e.what() << '\n';
    return 1;
  }

  try {
    const OutputFormat format = parse_format(g.format);
    std::vector<Record> records;
    std::vector<ResultRow> rows;
    bool have_rows = false;
    std::string out_path = g.out;
    if (estimate->parsed()) {
      run_estimate(g, est_flags, external, noise, records);
    } else if (egop->parsed()) {
      run_egop(g, egop_est, egop_flags, records);
    } else if (optimize->parsed()) {
      run_optimize(g, opt_est, opt_flags, records, err);
    } else if (bench->parsed()) {
      ExperimentConfig config = load_experiment_config(config_path);
      if (jobs > 0) config.jobs = jobs;
      if (out_path.empty()) out_path = config.output;
      rows = run_experiment(config);
      have_rows = true;
    } else {
      run_advise(adv, records);
    }
    std::ofstream file;
    std::ostream* sink = &out;
    if (!out_path.empty()) {
      file.open(out_path);
      if (!file) throw ConfigError("cannot open output file '" + out_path + "'");
      sink = &file;
    }
    if (have_rows) {
      write_rows(*sink, rows, format);
    } else {
      write_records(*sink, records, format);
    }
    return 0;
  } catch (const InvalidArgument& e) {
    err << "sparsegrad: " << e.what() << '\n';
    return 1;
  } catch (const Error& e) {
    err << "sparsegrad: " << e.what() << '\n';
    return 2;
  }
}

int cli_main(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return cli_main(args, std::cout, std::cerr);
}

}  // namespace sparsegrad
