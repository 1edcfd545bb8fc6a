#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace pdp::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitBackend = 2;

/// Entry point of the `pdp` tool. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace pdp::cli
