#pragma once

#include <iosfwd>

namespace ggq::cli {

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kPropertyFailure = 1;
inline constexpr int kConfigError = 2;
inline constexpr int kDivergence = 3;

// Output directory override; takes precedence over the config, not over --out.
inline constexpr const char* kOutputEnv = "GGQ_OUTPUT_DIR";

int main(int argc, char** argv);
int main(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace ggq::cli
