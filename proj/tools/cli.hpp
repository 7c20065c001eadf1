#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace crcvote::cli {

/// Runs one `crcvote` invocation. `args` excludes the program name.
/// Returns the process exit code: 0 on success, 2 for usage errors, 1 otherwise.
/// Errors are written to `err` as a single `error:<category>:<message>` line.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Set when CRCVOTE_ENABLE_TEST_HOOKS=1; unlocks the coin_flip learner.
bool test_hooks_enabled();

}  // namespace crcvote::cli
