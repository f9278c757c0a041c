#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace can {

inline constexpr const char* kToolVersion = "0.1.0";

// Exit codes: 0 success, 1 runtime failure, 2 usage error.
// args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace can
