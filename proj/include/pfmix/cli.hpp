#pragma once

#include <iosfwd>

namespace pfmix {

/// Entry point of the pfmix command line. Returns the process exit code:
/// 0 success, 2 usage, 3 data or I/O, 4 numeric failure.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace pfmix
