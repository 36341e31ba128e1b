#pragma once

#include <ostream>

namespace obstinate {

/// Exit codes: 0 ok, 2 usage/validation, 3 compatibility, 4 I/O, 5 remote oracle.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace obstinate
