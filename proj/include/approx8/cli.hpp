#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace approx8 {

enum ExitCode : int { kExitOk = 0, kExitInput = 1, kExitConfig = 2 };

/// Entry point behind the approx8 executable. args excludes the program name.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace approx8
