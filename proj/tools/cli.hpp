#pragma once

#include <atomic>
#include <iosfwd>
#include <string>
#include <vector>

namespace ifqa::cli {

/// Version banner printed by `--version`.
std::string version_string();

/// Parses argv and runs one subcommand. Returns 0 on success, 1 on invalid
/// input (bad flags, unknown subcommand, validation errors) and 2 on runtime
/// failure. `stop` is polled by long-running subcommands.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
        const std::atomic<bool>* stop = nullptr);

}  // namespace ifqa::cli
