#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace scatdeg {

// Exit codes of the command-line frontend.
inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitDynamics = 3;

// Runs one subcommand (args excludes the program name). Results go to `out`
// unless --out names a file; diagnostics go to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace scatdeg
