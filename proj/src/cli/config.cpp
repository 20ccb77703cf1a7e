#include <sstream>

#include "maskexplain/cli.hpp"
#include "maskexplain/error.hpp"
#include "maskexplain/tensor_io.hpp"

namespace maskexplain::cli {

void RunConfig::set(const std::string& key, const std::string& value) {
  if (key.empty() || key.find('=') != std::string::npos || key.find('\n') != std::string::npos)
    throw InvalidParameter("invalid config key '" + key + "'");
  if (value.find('\n') != std::string::npos) throw InvalidParameter("config value for '" + key + "' spans lines");
  for (auto& [k, v] : entries)
    if (k == key) {
      v = value;
      return;
    }
  entries.emplace_back(key, value);
}

std::optional<std::string> RunConfig::get(const std::string& key) const {
  for (const auto& [k, v] : entries)
    if (k == key) return v;
  return std::nullopt;
}

std::string RunConfig::to_text() const {
  std::ostringstream os;
  os << "command=" << command << '\n';
  for (const auto& [k, v] : entries) os << k << '=' << v << '\n';
  return os.str();
}

RunConfig RunConfig::parse(const std::string& text) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos || eq == 0)
      throw UsageError("config line " + std::to_string(lineno) + " is not key=value: " + line);
    const std::string key = line.substr(0, eq), value = line.substr(eq + 1);
    if (key == "command") {
      cfg.command = value;
    } else {
      cfg.set(key, value);
    }
  }
  if (cfg.command.empty()) throw UsageError("config has no command line");
  return cfg;
}

RunConfig RunConfig::load(const std::filesystem::path& path) { return parse(read_text(path)); }

void RunConfig::save(const std::filesystem::path& path) const { write_text(path, to_text()); }

std::vector<std::string> RunConfig::to_arguments() const {
  std::vector<std::string> args;
  args.reserve(2 * entries.size());
  for (const auto& [k, v] : entries) {
    if (v.empty()) {
      // "--key=" would make the parser consume the next token as the value
      args.push_back("--" + k);
      args.emplace_back();
    } else {
      args.push_back("--" + k + "=" + v);
    }
  }
  return args;
}

}  // namespace maskexplain::cli
