#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace hopmp::cli {

enum ExitCode : int {
    kOk = 0,
    kUsage = 1,
    kValidation = 2,
    kNumeric = 3,
};

/// Runs `hopmp <command> <spec> [options]`; args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace hopmp::cli
