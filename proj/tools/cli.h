#ifndef FLOWPOSE_TOOLS_CLI_H_
#define FLOWPOSE_TOOLS_CLI_H_

#include <ostream>

namespace flowpose {

// Entry point of the flowpose command line. Returns 0 on success, 1 on a
// runtime failure and 2 on a usage error; diagnostics go to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out,
            std::ostream& err);

}  // namespace flowpose

#endif  // FLOWPOSE_TOOLS_CLI_H_
