#pragma once

#include <ostream>

namespace kst {

/// Entry point of the kst tool. Returns the process exit code:
/// 0 success, 2 user or config error, 3 budget guard, 4 internal check failure.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace kst
