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

#include "sparsegrad/homotopy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "sparsegrad/errors.hpp"

namespace sparsegrad {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// Relative Cholesky pivot below which the factor is rebuilt from scratch.
constexpr double kPivotFloor = 1e-10;
// Step lengths below this fraction of the current scale are treated as zero.
constexpr double kStepFloor = 1e-12;

enum class Event { kNone, kAdd, kRemove, kTolerance, kEnd };

struct Candidate {
  double step = kInf;
  Event event = Event::kNone;
  Index index = -1;  // column for kAdd, active position for kRemove

  void offer(double s, Event e, Index i) {
    if (s < step) {
      step = s;
      event = e;
      index = i;
    }
  }
};

// Smallest positive root of |r + g u|^2 = tol^2 in g, or +inf.
double tolerance_crossing(const Vector& r, const Vector& u, double tol, bool increasing) {
  const double uu = u.squaredNorm();
  if (uu <= 0.0) return kInf;
  const double ur = u.dot(r);
  const double rr = r.squaredNorm();
  if (increasing) {
    // residual grows from below tol
    const double disc = ur * ur + uu * (tol * tol - rr);
    if (disc < 0.0) return kInf;
    const double g = (-ur + std::sqrt(disc)) / uu;
    return g >= 0.0 ? g : kInf;
  }
  // residual shrinks: |r - g u|^2 = tol^2
  const double disc = ur * ur - uu * (rr - tol * tol);
  if (disc < 0.0) return kInf;
  const double g = (ur - std::sqrt(disc)) / uu;
  return g >= 0.0 ? g : kInf;
}

class PathState {
 public:
  PathState(const Matrix& a, Vector data)
      : a_(a),
        data_(std::move(data)),
        z_(Vector::Zero(a.cols())),
        is_active_(static_cast<std::size_t>(a.cols()), 0) {}

  void load(const SparseSolution& start) {
    z_ = start.z;
    active_.clear();
    signs_.clear();
    std::fill(is_active_.begin(), is_active_.end(), 0);
    if (!start.active.empty() && start.active.size() == start.active_signs.size()) {
      active_ = start.active;
      signs_ = start.active_signs;
    } else {
      for (Index j : start.support) {
        if (z_(j) == 0.0) continue;
        active_.push_back(j);
        signs_.push_back(z_(j) > 0.0 ? 1.0 : -1.0);
      }
    }
    for (Index j : active_) is_active_[static_cast<std::size_t>(j)] = 1;
    for (Index j = 0; j < z_.size(); ++j) {
      if (!is_active_[static_cast<std::size_t>(j)]) z_(j) = 0.0;
    }
    lambda_ = start.lambda_final;
    if (!active_.empty()) refactor();
  }

  const Vector& data() const { return data_; }
  double lambda() const { return lambda_; }
  std::size_t active_size() const { return active_.size(); }
  int steps() const { return steps_; }
  const std::vector<double>& breakpoint_residuals() const { return history_; }

  void refresh() {
    residual_ = data_;
    for (std::size_t p = 0; p < active_.size(); ++p) {
      residual_.noalias() -= z_(active_[p]) * a_.col(active_[p]);
    }
    corr_.noalias() = a_.transpose() * residual_;
  }

  double residual_norm() const { return residual_.norm(); }

  // Moves the data to `target` at fixed lambda. Returns false when the step
  // budget ran out first.
  bool move_data(const Vector& target, int budget) {
    Index just_removed = -1;
    Index just_added = -1;
    for (;;) {
      refresh();
      const Vector delta = target - data_;
      if (delta.norm() == 0.0) return true;
      const Vector d = active_.empty() ? Vector() : solve_gram(active_transpose_times(delta));
      Vector moved = delta;
      if (!active_.empty()) moved.noalias() -= active_times(d);
      const Vector w = a_.transpose() * moved;

      Candidate best;
      best.offer(1.0, Event::kEnd, -1);
      for (std::size_t p = 0; p < active_.size(); ++p) {
        const Index j = active_[p];
        if (j == just_added || d(static_cast<Index>(p)) == 0.0) continue;
        const double t = -z_(j) / d(static_cast<Index>(p));
        if (t > kStepFloor) best.offer(t, Event::kRemove, static_cast<Index>(p));
      }
      if (active_.size() < static_cast<std::size_t>(a_.rows())) {
        for (Index j = 0; j < a_.cols(); ++j) {
          if (is_active_[static_cast<std::size_t>(j)] || j == just_removed) continue;
          double t = kInf;
          if (w(j) > 0.0) t = (lambda_ - corr_(j)) / w(j);
          if (w(j) < 0.0) t = (-lambda_ - corr_(j)) / w(j);
          if (t > kStepFloor) best.offer(t, Event::kAdd, j);
        }
      }

      if (best.event != Event::kEnd && steps_ >= budget) return false;
      const double t = best.step;
      for (std::size_t p = 0; p < active_.size(); ++p) {
        z_(active_[p]) += t * d(static_cast<Index>(p));
      }
      if (best.event == Event::kEnd) {
        data_ = target;
        refresh();
        return true;
      }
      data_ += t * delta;
      just_removed = just_added = -1;
      if (best.event == Event::kAdd) {
        const double c = corr_(best.index) + t * w(best.index);
        add(best.index, c >= 0.0 ? 1.0 : -1.0);
        just_added = best.index;
      } else {
        just_removed = remove(best.index);
      }
      ++steps_;
      refresh();
      history_.push_back(residual_norm());
    }
  }

  // Decreases lambda until the residual falls to tol. Returns false when the
  // budget ran out first.
  bool descend(double tol, int budget) {
    Index just_removed = -1;
    Index just_added = -1;
    for (;;) {
      refresh();
      const double rnorm = residual_norm();
      if (rnorm <= tol) return true;
      if (active_.empty()) {
        Index j = 0;
        const double top = corr_.cwiseAbs().maxCoeff(&j);
        if (top <= 0.0) {
          throw DegenerateStep("homotopy: data is orthogonal to every column");
        }
        if (steps_ >= budget) return false;
        lambda_ = top;
        add(j, corr_(j) >= 0.0 ? 1.0 : -1.0);
        just_added = j;
        just_removed = -1;
        ++steps_;
        history_.push_back(rnorm);
        continue;
      }
      const Vector d = solve_gram(sign_vector());
      const Vector u = active_times(d);
      const Vector v = a_.transpose() * u;

      Candidate best;
      best.offer(lambda_, Event::kEnd, -1);
      best.offer(tolerance_crossing(residual_, u, tol, false), Event::kTolerance, -1);
      const double floor = kStepFloor * lambda_;
      for (std::size_t p = 0; p < active_.size(); ++p) {
        const Index j = active_[p];
        const double dj = d(static_cast<Index>(p));
        if (j == just_added || dj == 0.0) continue;
        const double g = -z_(j) / dj;
        if (g > floor) best.offer(g, Event::kRemove, static_cast<Index>(p));
      }
      if (active_.size() < static_cast<std::size_t>(a_.rows())) {
        for (Index j = 0; j < a_.cols(); ++j) {
          if (is_active_[static_cast<std::size_t>(j)] || j == just_removed) continue;
          const double vj = v(j);
          const double cj = corr_(j);
          if (1.0 - vj > 0.0) {
            const double g = (lambda_ - cj) / (1.0 - vj);
            if (g > floor) best.offer(g, Event::kAdd, j);
          }
          if (1.0 + vj > 0.0) {
            const double g = (lambda_ + cj) / (1.0 + vj);
            if (g > floor) best.offer(g, Event::kAdd, j);
          }
        }
      }

      const bool is_breakpoint = best.event == Event::kAdd || best.event == Event::kRemove;
      if (is_breakpoint && steps_ >= budget) return false;
      const double g = best.step;
      for (std::size_t p = 0; p < active_.size(); ++p) {
        z_(active_[p]) += g * d(static_cast<Index>(p));
      }
      lambda_ = std::max(lambda_ - g, 0.0);
      if (best.event == Event::kTolerance) {
        refresh();
        return true;
      }
      if (best.event == Event::kEnd) {
        refresh();
        if (residual_norm() <= tol) return true;
        throw MaxStepsExceeded("homotopy: path ended at lambda = 0 with residual " +
                               std::to_string(residual_norm()) + " above tolerance " +
                               std::to_string(tol));
      }
      just_removed = just_added = -1;
      if (best.event == Event::kAdd) {
        const double c = corr_(best.index) - g * v(best.index);
        add(best.index, c >= 0.0 ? 1.0 : -1.0);
        just_added = best.index;
      } else {
        just_removed = remove(best.index);
      }
      ++steps_;
      refresh();
      history_.push_back(residual_norm());
    }
  }

  // Increases lambda until the residual grows to tol (used when a warm start
  // lands below the target residual).
  bool ascend(double tol, int budget) {
    Index just_removed = -1;
    Index just_added = -1;
    for (;;) {
      refresh();
      if (active_.empty()) {
        lambda_ = corr_.cwiseAbs().maxCoeff();
        return true;
      }
      if (residual_norm() >= tol) return true;
      const Vector d = solve_gram(sign_vector());
      const Vector u = active_times(d);
      const Vector v = a_.transpose() * u;

      Candidate best;
      best.offer(tolerance_crossing(residual_, u, tol, true), Event::kTolerance, -1);
      const double floor = kStepFloor * std::max(lambda_, 1e-300);
      for (std::size_t p = 0; p < active_.size(); ++p) {
        const Index j = active_[p];
        const double dj = d(static_cast<Index>(p));
        if (j == just_added || dj == 0.0) continue;
        const double g = z_(j) / dj;
        if (g > floor) best.offer(g, Event::kRemove, static_cast<Index>(p));
      }
      for (Index j = 0; j < a_.cols(); ++j) {
        if (is_active_[static_cast<std::size_t>(j)] || j == just_removed) continue;
        const double vj = v(j);
        const double cj = corr_(j);
        if (vj - 1.0 > 0.0) {
          const double g = (lambda_ - cj) / (vj - 1.0);
          if (g > floor) best.offer(g, Event::kAdd, j);
        }
        if (-vj - 1.0 > 0.0) {
          const double g = (lambda_ + cj) / (-vj - 1.0);
          if (g > floor) best.offer(g, Event::kAdd, j);
        }
      }
      if (best.event == Event::kNone) {
        throw DegenerateStep("homotopy: no admissible step while increasing lambda");
      }
      const bool is_breakpoint = best.event == Event::kAdd || best.event == Event::kRemove;
      if (is_breakpoint && steps_ >= budget) return false;
      const double g = best.step;
      for (std::size_t p = 0; p < active_.size(); ++p) {
        z_(active_[p]) -= g * d(static_cast<Index>(p));
      }
      lambda_ += g;
      if (best.event == Event::kTolerance) {
        refresh();
        return true;
      }
      just_removed = just_added = -1;
      if (best.event == Event::kAdd) {
        const double c = corr_(best.index) + g * v(best.index);
        add(best.index, c >= 0.0 ? 1.0 : -1.0);
        just_added = best.index;
      } else {
        just_removed = remove(best.index);
      }
      ++steps_;
      refresh();
      history_.push_back(residual_norm());
    }
  }

  SparseSolution finish(const Vector& target, bool converged_flag) {
    polish();
    SparseSolution out;
    out.z = z_;
    for (Index j : active_) {
      if (z_(j) != 0.0) out.support.push_back(j);
    }
    std::sort(out.support.begin(), out.support.end());
    out.residual_norm = (a_ * z_ - target).norm();
    out.lambda_final = lambda_;
    out.path_steps = steps_;
    out.converged = converged_flag;
    out.data = data_;
    out.active = active_;
    out.active_signs = signs_;
    out.breakpoint_residuals = history_;
    return out;
  }

 private:
  Vector sign_vector() const {
    return Eigen::Map<const Vector>(signs_.data(), static_cast<Index>(signs_.size()));
  }

  Vector active_transpose_times(const Vector& r) const {
    Vector out(static_cast<Index>(active_.size()));
    for (std::size_t p = 0; p < active_.size(); ++p) {
      out(static_cast<Index>(p)) = a_.col(active_[p]).dot(r);
    }
    return out;
  }

  Vector active_times(const Vector& d) const {
    Vector out = Vector::Zero(a_.rows());
    for (std::size_t p = 0; p < active_.size(); ++p) {
      out.noalias() += d(static_cast<Index>(p)) * a_.col(active_[p]);
    }
    return out;
  }

  Vector solve_gram(const Vector& rhs) const {
    const auto lower = chol_.triangularView<Eigen::Lower>();
    Vector w = lower.solve(rhs);
    return chol_.transpose().triangularView<Eigen::Upper>().solve(w);
  }

  void add(Index j, double sign) {
    const Index k = static_cast<Index>(active_.size());
    const double col_sq = a_.col(j).squaredNorm();
    bool need_refactor = false;
    Matrix grown = Matrix::Zero(k + 1, k + 1);
    if (k > 0) {
      const Vector w =
          chol_.triangularView<Eigen::Lower>().solve(active_transpose_times(a_.col(j)));
      const double pivot_sq = col_sq - w.squaredNorm();
      grown.topLeftCorner(k, k) = chol_;
      grown.block(k, 0, 1, k) = w.transpose();
      if (pivot_sq > kPivotFloor * kPivotFloor * col_sq) {
        grown(k, k) = std::sqrt(pivot_sq);
      } else {
        need_refactor = true;
      }
    } else {
      grown(0, 0) = std::sqrt(col_sq);
      need_refactor = !(grown(0, 0) > 0.0);
    }
    active_.push_back(j);
    signs_.push_back(sign);
    is_active_[static_cast<std::size_t>(j)] = 1;
    chol_ = std::move(grown);
    if (need_refactor) refactor();
  }

  // Removes the column at active position p and returns its index.
  Index remove(Index p) {
    const Index k = static_cast<Index>(active_.size());
    const Index j = active_[static_cast<std::size_t>(p)];
    // Drop row p; the rows below it become upper Hessenberg in columns p..k-1.
    Matrix m(k - 1, k);
    m.topRows(p) = chol_.topRows(p);
    m.bottomRows(k - 1 - p) = chol_.bottomRows(k - 1 - p);
    for (Index i = p; i < k - 1; ++i) {
      const double x = m(i, i);
      const double y = m(i, i + 1);
      const double r = std::hypot(x, y);
      if (r == 0.0) continue;
      const double c = x / r;
      const double s = y / r;
      for (Index l = i; l < k - 1; ++l) {
        const double a = m(l, i);
        const double b = m(l, i + 1);
        m(l, i) = c * a + s * b;
        m(l, i + 1) = -s * a + c * b;
      }
    }
    chol_ = m.leftCols(k - 1);
    active_.erase(active_.begin() + p);
    signs_.erase(signs_.begin() + p);
    is_active_[static_cast<std::size_t>(j)] = 0;
    z_(j) = 0.0;
    return j;
  }

  void refactor() {
    const Index k = static_cast<Index>(active_.size());
    Matrix gram(k, k);
    for (Index r = 0; r < k; ++r) {
      for (Index c = 0; c <= r; ++c) {
        gram(r, c) = gram(c, r) =
            a_.col(active_[static_cast<std::size_t>(r)]).dot(a_.col(active_[static_cast<std::size_t>(c)]));
      }
    }
    Eigen::LLT<Matrix> llt(gram);
    if (llt.info() != Eigen::Success) {
      throw DegenerateStep("homotopy: active Gram matrix is not positive definite");
    }
    Matrix lower = llt.matrixL();
    for (Index i = 0; i < k; ++i) {
      if (!(lower(i, i) > kPivotFloor * std::sqrt(gram(i, i)))) {
        throw DegenerateStep("homotopy: active columns are numerically dependent");
      }
    }
    chol_ = std::move(lower);
  }

  // Re-solves the active coefficients from the normal equations at the final
  // lambda to remove drift accumulated along the path.
  void polish() {
    if (active_.empty()) return;
    const Vector rhs = active_transpose_times(data_) - lambda_ * sign_vector();
    const Vector zs = solve_gram(rhs);
    for (std::size_t p = 0; p < active_.size(); ++p) {
      const double v = zs(static_cast<Index>(p));
      if (v * signs_[p] <= 0.0) return;
    }
    for (std::size_t p = 0; p < active_.size(); ++p) {
      z_(active_[p]) = zs(static_cast<Index>(p));
    }
  }

  const Matrix& a_;
  Vector data_;
  Vector z_;
  std::vector<Index> active_;
  std::vector<double> signs_;
  std::vector<char> is_active_;
  Matrix chol_;
  double lambda_ = 0.0;
  Vector residual_;
  Vector corr_;
  int steps_ = 0;
  std::vector<double> history_;
};

void validate(const Matrix& a, const Vector& y, const SolverOptions& options) {
  if (y.size() != a.rows()) {
    throw DimensionMismatch("homotopy: data length " + std::to_string(y.size()) +
                            " does not match row count " + std::to_string(a.rows()));
  }
  if (!(options.residual_tol > 0.0)) {
    throw InvalidArgument("homotopy: residual tolerance must be positive");
  }
  if (!y.allFinite()) throw InvalidArgument("homotopy: data contains non-finite values");
}

int step_budget(const Matrix& a, const SolverOptions& options) {
  return options.max_steps > 0 ? options.max_steps : static_cast<int>(4 * a.rows());
}

SparseSolution run_path(const Matrix& a, const Vector& y, const SparseSolution* start,
                        int budget, const SolverOptions& options) {
  const double tol = options.residual_tol;
  const bool warm = start != nullptr && (!start->active.empty() || !start->support.empty());
  if (!warm) {
    PathState state(a, y);
    state.refresh();
    const bool done = state.descend(tol, budget);
    return state.finish(y, done);
  }
  if (start->data.size() != a.rows()) {
    throw InvalidArgument("solve_bpdn_warm: start solution carries no data vector");
  }
  if (!(start->lambda_final > 0.0)) {
    throw InvalidArgument("solve_bpdn_warm: start is not an interior path point");
  }
  PathState state(a, start->data);
  state.load(*start);
  if (!state.move_data(y, budget)) return state.finish(y, false);
  state.refresh();
  // Below target: walk back up the path so the result matches a cold solve.
  if (state.residual_norm() < tol * (1.0 - 1e-9)) {
    if (!state.ascend(tol, budget)) return state.finish(y, false);
    return state.finish(y, true);
  }
  const bool done = state.descend(tol, budget);
  return state.finish(y, done);
}

}  // namespace

SparseSolution zero_solution(const Matrix& a, const Vector& y) {
  SparseSolution out;
  out.z = Vector::Zero(a.cols());
  out.residual_norm = y.norm();
  out.lambda_final = y.size() == a.rows() && a.size() > 0 ? (a.transpose() * y).cwiseAbs().maxCoeff() : 0.0;
  out.data = y;
  return out;
}

SparseSolution solve_bpdn(const Matrix& a, const Vector& y, const SolverOptions& options) {
  validate(a, y, options);
  const int budget = step_budget(a, options);
  SparseSolution out = run_path(a, y, nullptr, budget, options);
  if (!out.converged) {
    throw MaxStepsExceeded("homotopy: no point with residual <= " +
                           std::to_string(options.residual_tol) + " within " +
                           std::to_string(budget) + " breakpoints");
  }
  return out;
}

SparseSolution solve_bpdn_warm(const Matrix& a, const Vector& y, const SparseSolution& start,
                               int inner_steps, const SolverOptions& options) {
  validate(a, y, options);
  if (start.z.size() != a.cols()) {
    throw DimensionMismatch("solve_bpdn_warm: start has wrong length");
  }
  if (inner_steps < 0) throw InvalidArgument("solve_bpdn_warm: inner_steps must be >= 0");
  return run_path(a, y, &start, inner_steps, options);
}

bool kkt_check(const Matrix& a, const Vector& y, const Vector& z, double lambda, double tol) {
  if (a.rows() != y.size() || a.cols() != z.size()) {
    throw DimensionMismatch("kkt_check: inconsistent dimensions");
  }
  const Vector corr = a.transpose() * (y - a * z);
  for (Index j = 0; j < z.size(); ++j) {
    if (z(j) != 0.0) {
      const double s = z(j) > 0.0 ? 1.0 : -1.0;
      if (std::abs(corr(j) - lambda * s) > tol) return false;
    } else if (std::abs(corr(j)) > lambda + tol) {
      return false;
    }
  }
  return true;
}

}  // namespace sparsegrad
