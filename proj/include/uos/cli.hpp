#pragma once

// The `uos` command line. Lives in the library so tests can run commands
// in-process.

#include <filesystem>
#include <map>
#include <ostream>
#include <set>
#include <string>
#include <vector>

namespace uos {

// Flat key=value file mirroring long flag names. '#' starts a comment.
struct RunConfig {
  std::map<std::string, std::string> values;
  std::map<std::string, int> lines;  // key -> line number, for messages

  static RunConfig parse(const std::string& text, const std::string& source = "config");
  static RunConfig load(const std::filesystem::path& path);

  // Relative values of `path_keys` are resolved against `base`.
  void resolve_paths(const std::filesystem::path& base, const std::set<std::string>& path_keys);
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitIo = 2;

// args excludes the program name. Results go to `out`, diagnostics to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace uos
