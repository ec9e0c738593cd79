#pragma once

#include <iosfwd>

namespace fastpt {

/// Entry point of the fastpt tool. Returns 0 on success, 1 on a usage
/// error and 2 when a command fails at run time.
int run_cli(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace fastpt
