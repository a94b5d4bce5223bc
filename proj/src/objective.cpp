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

#include "sparsegrad/objective.hpp"

#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cmath>
#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <cstring>

#include "sparsegrad/errors.hpp"

namespace sparsegrad {

Objective::Objective(Index dimension, Function f, NoiseModel noise, bool reentrant)
    : dimension_(dimension),
      f_(std::move(f)),
      noise_(noise),
      reentrant_(reentrant),
      count_(std::make_unique<std::atomic<std::int64_t>>(0)) {
  if (dimension <= 0) throw InvalidArgument("Objective: dimension must be positive");
  if (!f_) throw InvalidArgument("Objective: empty evaluator");
  if (!(noise.sigma >= 0.0)) throw InvalidArgument("Objective: noise sigma must be >= 0");
}

double Objective::evaluate(const Vector& x) const {
  if (x.size() != dimension_) {
    throw DimensionMismatch("Objective: point has length " + std::to_string(x.size()) +
                            ", expected " + std::to_string(dimension_));
  }
  const std::int64_t index = count_->fetch_add(1, std::memory_order_relaxed);
  double value = f_(x);
  if (noise_.sigma > 0.0) {
    Rng rng(derive_seed(noise_.seed, static_cast<std::uint64_t>(index)));
    value += noise_.sigma * rng.normal();
  }
  if (!std::isfinite(value)) {
    throw EvaluationFailed("Objective: non-finite value at evaluation " + std::to_string(index));
  }
  return value;
}

double Objective::peek(const Vector& x) const {
  if (x.size() != dimension_) throw DimensionMismatch("Objective: point has wrong length");
  return f_(x);
}

namespace {

void write_all(int fd, const std::string& text) {
  std::size_t done = 0;
  while (done < text.size()) {
    const ssize_t n = ::write(fd, text.data() + done, text.size() - done);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw EvaluationFailed(std::string("external objective: write failed: ") +
                             std::strerror(errno));
    }
    done += static_cast<std::size_t>(n);
  }
}

std::string read_all(int fd) {
  std::string out;
  char buffer[4096];
  for (;;) {
    const ssize_t n = ::read(fd, buffer, sizeof buffer);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw EvaluationFailed(std::string("external objective: read failed: ") +
                             std::strerror(errno));
    }
    if (n == 0) break;
    out.append(buffer, static_cast<std::size_t>(n));
  }
  return out;
}

}  // namespace

double evaluate_external(const std::vector<std::string>& argv, const Vector& x) {
  if (argv.empty()) throw InvalidArgument("external objective: empty command");
  int to_child[2];
  int from_child[2];
  if (::pipe(to_child) != 0) throw EvaluationFailed("external objective: pipe failed");
  if (::pipe(from_child) != 0) {
    ::close(to_child[0]);
    ::close(to_child[1]);
    throw EvaluationFailed("external objective: pipe failed");
  }
  std::vector<char*> args;
  for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
  args.push_back(nullptr);

  const pid_t pid = ::fork();
  if (pid < 0) throw EvaluationFailed("external objective: fork failed");
  if (pid == 0) {
    ::dup2(to_child[0], STDIN_FILENO);
    ::dup2(from_child[1], STDOUT_FILENO);
    ::close(to_child[0]);
    ::close(to_child[1]);
    ::close(from_child[0]);
    ::close(from_child[1]);
    ::execvp(args[0], args.data());
    std::_Exit(127);
  }
  ::close(to_child[0]);
  ::close(from_child[1]);

  std::string payload;
  char line[64];
  for (Index i = 0; i < x.size(); ++i) {
    std::snprintf(line, sizeof line, "%.17g\n", x(i));
    payload += line;
  }
  // A child that exits without reading stdin must not kill us with SIGPIPE.
  struct sigaction ignore {};
  struct sigaction previous {};
  ignore.sa_handler = SIG_IGN;
  ::sigaction(SIGPIPE, &ignore, &previous);
  std::string output;
  try {
    write_all(to_child[1], payload);
  } catch (const EvaluationFailed&) {
    // fall through; exit status decides
  }
  ::close(to_child[1]);
  try {
    output = read_all(from_child[0]);
  } catch (...) {
    ::close(from_child[0]);
    ::sigaction(SIGPIPE, &previous, nullptr);
    ::waitpid(pid, nullptr, 0);
    throw;
  }
  ::close(from_child[0]);
  ::sigaction(SIGPIPE, &previous, nullptr);

  int status = 0;
  while (::waitpid(pid, &status, 0) < 0) {
    if (errno != EINTR) throw EvaluationFailed("external objective: waitpid failed");
  }
  if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
    throw EvaluationFailed("external objective: '" + argv.front() + "' exited with status " +
                           std::to_string(WIFEXITED(status) ? WEXITSTATUS(status) : -1));
  }
  const char* begin = output.c_str();
  char* end = nullptr;
  errno = 0;
  const double value = std::strtod(begin, &end);
  if (end == begin || errno == ERANGE) {
    throw EvaluationFailed("external objective: could not parse output '" + output + "'");
  }
  return value;
}

Objective make_external_objective(std::vector<std::string> argv, Index dimension,
                                  NoiseModel noise) {
  if (argv.empty()) throw InvalidArgument("external objective: empty command");
  auto command = std::make_shared<const std::vector<std::string>>(std::move(argv));
  return Objective(
      dimension, [command](const Vector& x) { return evaluate_external(*command, x); }, noise,
      /*reentrant=*/true);
}

}  // namespace sparsegrad
