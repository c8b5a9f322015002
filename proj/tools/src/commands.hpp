#pragma once

#include <iosfwd>

namespace synergraph::cli {

/// Parses argv, runs one subcommand and returns the process exit code:
/// 0 success, 1 runtime error, 2 usage error.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace synergraph::cli
