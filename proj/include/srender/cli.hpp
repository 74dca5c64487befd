#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace srender {

/// Exit codes of the command-line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Runs one subcommand. `args` excludes the program name. Usage errors and
/// unknown commands return kExitUsage with the usage text on `err`; runtime
/// failures return kExitFailure with a one-line diagnostic.
///
/// Subcommands: build-pairs, extract-patches, train-stroke-net, train, infer,
/// eval, ablate, make-synthetic. Each writes run_manifest_<command>.json into
/// its output directory before doing any work.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int dispatch(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace srender
