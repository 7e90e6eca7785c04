#pragma once

#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace tmn::cli {

/// Exit codes of run().
inline constexpr int kOk = 0;
inline constexpr int kFailure = 1;
inline constexpr int kConfigError = 2;
inline constexpr int kFormatError = 3;
inline constexpr int kNumericError = 4;

/// Runs one subcommand: synth, train, eval, inspect or retrieve. `args`
/// excludes the program name. Diagnostics go to `err` as a single line.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Flat `key = value` lines; blank lines and lines starting with '#' are
/// skipped. Throws ConfigError on malformed or repeated keys.
std::map<std::string, std::string> parse_config(std::string_view text, std::string_view source);

}  // namespace tmn::cli
