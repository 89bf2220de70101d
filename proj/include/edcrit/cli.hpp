#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace edcrit {

/// Runs one command line (without the program name). Returns the exit status:
/// 0 success, 2 configuration error, 3 numeric failure.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace edcrit
