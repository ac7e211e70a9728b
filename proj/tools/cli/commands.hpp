#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace coopseg::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 1,
  kDataError = 2,
  kNumericalFailure = 3,
};

/// Runs one command. argv[0] is the program name. Output goes to `out`,
/// diagnostics and usage text to `err`.
int run(const std::vector<std::string>& argv, std::ostream& out, std::ostream& err);

/// Reads a flat `key = value` file. Blank lines and `#` comments are skipped;
/// surrounding double quotes on values are dropped.
std::vector<std::pair<std::string, std::string>> read_config_file(const std::string& path);

/// Expands `--config FILE` into flags for every key not already given on the
/// command line. Keys that only describe a run (version, hashes, the command
/// line itself) are ignored.
std::vector<std::string> merge_config(const std::vector<std::string>& argv);

/// Default seed: $COOPSEG_SEED when set, else `fallback`.
std::uint64_t default_seed(std::uint64_t fallback = 1);

/// FNV-1a of a file's bytes, as 16 hex digits.
std::string file_hash(const std::string& path);

}  // namespace coopseg::cli
