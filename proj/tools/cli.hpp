#pragma once

#include <string>
#include <vector>

namespace eim::cli {

// Entry point shared by the binary and the in-process CLI tests.
// Exit codes: 0 success, 1 usage error, 2 domain error.
int run(const std::vector<std::string>& args);
int run(int argc, const char* const* argv);

}  // namespace eim::cli
