#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace qk::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitPending = 3;
inline constexpr int kExitBackendRejected = 4;

/// Runs the `qkernel` command line. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, const char* const* argv);

/// "lo,hi" where each bound is a number or a multiple/fraction of pi: "0,2pi", "-pi/2,pi/2".
std::pair<double, double> parse_angle_range(const std::string& text);

}  // namespace qk::cli
