#include "vigil/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace vigil {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::string dirname_of(const std::string& path) {
  size_t slash = path.find_last_of('/');
  if (slash == std::string::npos) return ".";
  if (slash == 0) return "/";
  return path.substr(0, slash);
}

}  // namespace

Config Config::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  Config cfg = from_string(buf.str(), path);
  cfg.base_dir_ = dirname_of(path);
  return cfg;
}

Config Config::from_string(const std::string& text, const std::string& name) {
  Config cfg;
  cfg.name_ = name;
  cfg.base_dir_ = ".";

  std::istringstream in(text);
  std::string line;
  std::string section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    // Strip comments outside of values first; '#' always starts a comment.
    size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;

    if (line.front() == '[') {
      if (line.back() != ']')
        throw ConfigError(name, lineno, "unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty())
        throw ConfigError(name, lineno, "empty section name");
      continue;
    }

    size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(name, lineno, "expected 'key = value'");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError(name, lineno, "empty key");
    std::string full = section.empty() ? key : section + "." + key;
    if (cfg.entries_.count(full))
      throw ConfigError(name, lineno, "duplicate key '" + full + "'");
    cfg.entries_[full] = Entry{value, lineno};
    cfg.order_.push_back(full);
  }
  return cfg;
}

bool Config::has(const std::string& key) const {
  return entries_.count(key) != 0;
}

const Config::Entry& Config::require(const std::string& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end())
    throw ConfigError(name_ + ": missing required key '" + key + "'");
  return it->second;
}

std::string Config::get_string(const std::string& key) const {
  return require(key).value;
}

std::string Config::get_string(const std::string& key,
                               const std::string& fallback) const {
  auto it = entries_.find(key);
  return it == entries_.end() ? fallback : it->second.value;
}

double Config::get_double(const std::string& key) const {
  const Entry& e = require(key);
  char* end = nullptr;
  double v = std::strtod(e.value.c_str(), &end);
  if (end == e.value.c_str() || *end != '\0')
    throw ConfigError(name_, e.line, "key '" + key + "' is not a number");
  return v;
}

double Config::get_double(const std::string& key, double fallback) const {
  return has(key) ? get_double(key) : fallback;
}

int Config::get_int(const std::string& key) const {
  double v = get_double(key);
  int i = static_cast<int>(v);
  if (static_cast<double>(i) != v)
    throw ConfigError(name_, require(key).line,
                      "key '" + key + "' is not an integer");
  return i;
}

int Config::get_int(const std::string& key, int fallback) const {
  return has(key) ? get_int(key) : fallback;
}

bool Config::get_bool(const std::string& key) const {
  const Entry& e = require(key);
  std::string v = e.value;
  std::transform(v.begin(), v.end(), v.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError(name_, e.line, "key '" + key + "' is not a boolean");
}

bool Config::get_bool(const std::string& key, bool fallback) const {
  return has(key) ? get_bool(key) : fallback;
}

std::vector<double> Config::get_doubles(const std::string& key) const {
  const Entry& e = require(key);
  std::vector<double> out;
  std::istringstream in(e.value);
  std::string tok;
  while (in >> tok) {
    char* end = nullptr;
    double v = std::strtod(tok.c_str(), &end);
    if (end == tok.c_str() || *end != '\0')
      throw ConfigError(name_, e.line,
                        "key '" + key + "' has non-numeric element '" + tok +
                            "'");
    out.push_back(v);
  }
  if (out.empty())
    throw ConfigError(name_, e.line, "key '" + key + "' has no elements");
  return out;
}

std::vector<double> Config::get_doubles(
    const std::string& key, const std::vector<double>& fallback) const {
  return has(key) ? get_doubles(key) : fallback;
}

void Config::set(const std::string& key, const std::string& value) {
  if (!entries_.count(key)) order_.push_back(key);
  entries_[key] = Entry{value, 0};
}

std::vector<std::string> Config::keys_in_section(
    const std::string& section) const {
  std::vector<std::string> out;
  std::string prefix = section + ".";
  for (const auto& key : order_) {
    if (key.rfind(prefix, 0) == 0) out.push_back(key.substr(prefix.size()));
  }
  return out;
}

std::string Config::resolve_path(const std::string& relative) const {
  if (relative.empty() || relative.front() == '/') return relative;
  return base_dir_ + "/" + relative;
}

}  // namespace vigil
