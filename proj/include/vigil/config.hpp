#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace vigil {

// Error raised on malformed config input. Carries the file and line so CLI
// users can find the offending entry.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& file, int line, const std::string& msg)
      : std::runtime_error(file + ":" + std::to_string(line) + ": " + msg),
        file_(file),
        line_(line) {}
  explicit ConfigError(const std::string& msg)
      : std::runtime_error(msg), file_(), line_(0) {}

  const std::string& file() const { return file_; }
  int line() const { return line_; }

 private:
  std::string file_;
  int line_;
};

// Flat key-value configuration with [section] headers.
//
//   [wind]
//   mu = 0 0 0          # inline comments allowed
//   sigma = 6 8 0
//
// Keys are addressed as "section.key"; keys before any header live in the ""
// section and are addressed by bare name.
class Config {
 public:
  Config() = default;

  static Config from_file(const std::string& path);
  static Config from_string(const std::string& text,
                            const std::string& name = "<string>");

  bool has(const std::string& key) const;

  std::string get_string(const std::string& key) const;
  std::string get_string(const std::string& key,
                         const std::string& fallback) const;
  double get_double(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key) const;
  int get_int(const std::string& key, int fallback) const;
  bool get_bool(const std::string& key) const;
  bool get_bool(const std::string& key, bool fallback) const;
  // Whitespace-separated list of doubles.
  std::vector<double> get_doubles(const std::string& key) const;
  std::vector<double> get_doubles(const std::string& key,
                                  const std::vector<double>& fallback) const;

  void set(const std::string& key, const std::string& value);

  // All keys under "section." (bare key part), in file order.
  std::vector<std::string> keys_in_section(const std::string& section) const;

  // Directory of the source file, for resolving relative paths in values.
  const std::string& base_dir() const { return base_dir_; }
  std::string resolve_path(const std::string& relative) const;

 private:
  struct Entry {
    std::string value;
    int line = 0;
  };

  const Entry& require(const std::string& key) const;

  std::string name_ = "<empty>";
  std::string base_dir_;
  std::map<std::string, Entry> entries_;
  std::vector<std::string> order_;
};

}  // namespace vigil
