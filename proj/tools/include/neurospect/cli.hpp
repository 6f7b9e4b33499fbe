#pragma once

#include <ostream>

namespace neurospect::cli {

/// Entry point of the `neurospect` tool. Returns the process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace neurospect::cli
