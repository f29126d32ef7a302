#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace drive {

// Exit codes: 0 success, 1 domain error (one JSON object on `err`), 2 usage.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv);

}  // namespace drive
