#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace multisql::cli {

enum ExitCode : int { kOk = 0, kPipelineFailure = 1, kUsage = 2 };

// Runs one command line. args[0] is the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace multisql::cli
