#ifndef LSTMVIZ_TOOLS_RUN_CONFIG_HPP
#define LSTMVIZ_TOOLS_RUN_CONFIG_HPP

#include <cstdint>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace lstmviz::cli {

/// Bad command line, bad config file or unreadable input: exit code 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SettingInfo {
  const char* key;
  const char* default_value;
  const char* help;
};

/// Every recognised setting with its built-in default.
const std::vector<SettingInfo>& setting_table();

/// Resolved settings. Precedence: command-line flag > config file > default.
class RunConfig {
 public:
  enum class Source { builtin, file, flag };

  RunConfig();

  /// Applies `key=value` lines ('#' comments, blank lines ignored). Unknown
  /// keys and malformed lines raise UsageError naming the line.
  void apply_file_text(const std::string& text, const std::string& origin);
  void apply_file(const std::string& path);
  void set_flag(const std::string& key, const std::string& value);

  const std::string& str(const std::string& key) const;
  double real(const std::string& key) const;
  long long integer(const std::string& key) const;
  std::uint64_t seed() const;
  std::vector<double> reals(const std::string& key) const;
  std::vector<std::string> words(const std::string& key) const;
  Source source(const std::string& key) const;

  /// One `key = value (source)` line per setting.
  void print(std::ostream& out) const;

 private:
  struct Entry {
    std::string value;
    Source source = Source::builtin;
  };
  Entry& entry(const std::string& key);
  const Entry& entry(const std::string& key) const;

  std::map<std::string, Entry> values_;
};

}  // namespace lstmviz::cli

#endif  // LSTMVIZ_TOOLS_RUN_CONFIG_HPP
