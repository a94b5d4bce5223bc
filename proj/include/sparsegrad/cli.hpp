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

#ifndef SPARSEGRAD_CLI_HPP_
#define SPARSEGRAD_CLI_HPP_

#include <ostream>
#include <string>
#include <vector>

namespace sparsegrad {

/// Command-line entry point. `args` excludes the program name. Returns 0 on
/// success, 1 on usage or configuration errors and 2 when a computation
/// fails (for example an external objective that exits nonzero).
int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int cli_main(int argc, char** argv);

}  // namespace sparsegrad

#endif  // SPARSEGRAD_CLI_HPP_
