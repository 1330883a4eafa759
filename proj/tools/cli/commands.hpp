#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "recall/errors.hpp"

namespace recall::cli {

enum ExitCode : int { kOk = 0, kUsage = 2, kData = 3, kNumerical = 4 };

int exit_code_for(const Error& e) noexcept;

/// Runs one command. `args` excludes the program name, e.g.
/// {"estimate", "--input", "data.csv", "--method", "prop", ...}. Results go
/// to `out` unless --output names a file; diagnostics go to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace recall::cli
