#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace pgki::cli {

/// Runs `pgki-cli <subcommand> [flags]`. `args` excludes the program name.
/// Structured events and errors go to `log` as NDJSON; human-readable output
/// (the eval table) goes to `out`. Returns the process exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& log);

}  // namespace pgki::cli
