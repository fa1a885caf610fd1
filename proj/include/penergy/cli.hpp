#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace penergy {

// Exit codes: 0 success, 2 input error, 3 solver failure, 4 guard exceeded.
int run_command(const std::vector<std::string>& args, std::ostream& out,
                std::ostream& err);

}  // namespace penergy
