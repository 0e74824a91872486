#pragma once

#include <string>
#include <vector>

namespace c2g {

/// Entry point behind the c2g executable; args excludes the program name.
/// Exit codes: 0 success, 2 usage error, 3 data error, 4 internal error.
/// Errors are reported as one-line JSON on stderr.
int run_cli(const std::vector<std::string>& args);

}  // namespace c2g
