#pragma once

#include <iosfwd>

namespace migractl::cli {

/// Entry point of the `migractl` tool. Returns 0 on success, 2 on bad
/// arguments or unreadable input, 1 on domain errors (the error name is
/// written to `err`).
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace migractl::cli
