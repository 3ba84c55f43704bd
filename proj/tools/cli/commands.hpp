// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace spitfilter::cli {

/// Process exit codes.
enum ExitCode : int {
  kExitOk = 0,
  kExitInputError = 2,     ///< bad flags, unreadable or malformed input, invalid parameters
  kExitInternalError = 3,  ///< anything else
};

struct Streams {
  std::istream& in;
  std::ostream& out;
  std::ostream& err;
};

/// Runs the command line `args` (without the program name) against the
/// given streams and returns the exit code. Subcommands: fit, plan,
/// simulate, filter.
int run(const std::vector<std::string>& args, Streams io);

}  // namespace spitfilter::cli
