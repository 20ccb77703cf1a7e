#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace maskexplain::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Bad command-line usage detected after parsing (exit code 2).
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Resolved configuration of one run: the command name plus ordered
/// key=value pairs whose keys are the command's long option names.
struct RunConfig {
  std::string command;
  std::vector<std::pair<std::string, std::string>> entries;

  void set(const std::string& key, const std::string& value);
  std::optional<std::string> get(const std::string& key) const;

  /// "command=<name>" followed by one "key=value" line per entry.
  std::string to_text() const;
  static RunConfig parse(const std::string& text);
  static RunConfig load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  /// "--key=value" tokens that replay this configuration.
  std::vector<std::string> to_arguments() const;

  bool operator==(const RunConfig&) const = default;
};

/// Runs the tool on argv-style arguments (without the program name).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv);

}  // namespace maskexplain::cli
