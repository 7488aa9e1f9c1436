#pragma once

#include <iosfwd>

namespace synaudit::cli {

/// Entry point of the `synaudit` tool. Returns the process exit code:
/// 0 success, 2 validation error, 3 runtime error.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace synaudit::cli
