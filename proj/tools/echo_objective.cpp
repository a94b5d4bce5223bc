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

// Reference child-process objective: reads x from stdin and prints x_1 back
// with full precision. Any extra argument makes it exit with that status,
// which lets tests exercise the failure path.

#include <cstdio>
#include <cstdlib>

int main(int argc, char** argv) {
  if (argc > 1) return std::atoi(argv[1]);
  double first = 0.0;
  double value = 0.0;
  bool seen = false;
  while (std::scanf("%lf", &value) == 1) {
    if (!seen) first = value;
    seen = true;
  }
  if (!seen) return 2;
  std::printf("%.17g\n", first);
  return 0;
}
