#pragma once

#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace smf::cli {

enum ExitCode : int { kOk = 0, kUsage = 2, kInput = 3, kNumeric = 4 };

/// Bad invocation or incomplete configuration.
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Runs one subcommand. args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace smf::cli
