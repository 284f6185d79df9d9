#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace dexw {

enum ExitCode : int { kExitOk = 0, kExitValidation = 1, kExitRuntime = 2 };

/// Entry point of the command-line tool; args excludes the program name.
int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int cli_main(int argc, char** argv);

}  // namespace dexw
