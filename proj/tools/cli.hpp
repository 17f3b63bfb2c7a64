#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace bell::cli {

// Exit codes shared by every subcommand.
inline constexpr int kOk = 0;
inline constexpr int kInternal = 1;
inline constexpr int kInputError = 2;
inline constexpr int kRuntimeError = 3;

// `args` excludes the program name. Never throws.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace bell::cli
