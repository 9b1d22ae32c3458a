#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace dmrfem::cli {

inline constexpr const char* kVersion = "0.1.0";

enum ExitCode : int {
  kOk = 0,
  kRuntimeError = 1,
  kCheckFailed = 2,
  kUsage = 64,
};

/// Entry point of the `dmrfem` tool. `args` excludes the program name.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int dispatch(int argc, char** argv);

}  // namespace dmrfem::cli
