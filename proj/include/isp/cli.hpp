#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace isp {

enum ExitCode : int {
    kExitOk = 0,
    kExitUsage = 1,
    kExitValidation = 2,
    kExitIo = 3,
    kExitDivergence = 4,
};

/// Entry point of the `isp` tool. args[0] is the program name.
int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace isp
