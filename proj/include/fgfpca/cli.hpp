#pragma once

#include <string>
#include <vector>

namespace fgfpca::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitNumerical = 4;

/// Runs `fgfpca <args...>`; args exclude the program name.
int run(const std::vector<std::string>& args);

} // namespace fgfpca::cli
