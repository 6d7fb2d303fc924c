#pragma once

#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace leda::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kDataError = 2, kNonConvergence = 3 };

/// Runs one `leda` subcommand. `args` excludes the program name.
int cli_dispatch(std::span<const std::string> args, std::ostream& out, std::ostream& err);

inline int cli_dispatch(std::initializer_list<std::string> args, std::ostream& out, std::ostream& err) {
  const std::vector<std::string> v(args);
  return cli_dispatch(std::span<const std::string>(v), out, err);
}

}  // namespace leda::cli
