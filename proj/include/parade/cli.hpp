#pragma once

namespace parade {

// Full command-line dispatch. Exit codes: 0 success, 1 usage error, 2 data
// error, 3 numeric failure.
int run_cli(int argc, const char* const* argv);

}  // namespace parade
