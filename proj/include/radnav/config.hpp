#pragma once

#include <cctype>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>

namespace radnav {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Minimal INI-style configuration: [section] headers, key = value
/// lines, '#' or ';' comments. Values keep their raw text; typed
/// accessors convert on demand. Keys ending in "_db" are accepted
/// wherever the linear quantity is requested.
class Config {
 public:
  Config() = default;

  static Config from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return from_string(ss.str(), path);
  }

  static Config from_string(const std::string& text,
                            const std::string& origin = "<string>") {
    Config cfg;
    std::string section;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const auto hash = line.find_first_of("#;");
      if (hash != std::string::npos) line.erase(hash);
      line = trim(line);
      if (line.empty()) continue;
      if (line.front() == '[') {
        if (line.back() != ']')
          throw ConfigError(origin + ":" + std::to_string(lineno) +
                            ": malformed section header");
        section = trim(line.substr(1, line.size() - 2));
        continue;
      }
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw ConfigError(origin + ":" + std::to_string(lineno) +
                          ": expected key = value");
      const std::string key = trim(line.substr(0, eq));
      const std::string value = trim(line.substr(eq + 1));
      if (key.empty())
        throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
      cfg.values_[section + "." + key] = value;
    }
    return cfg;
  }

  bool has(const std::string& section, const std::string& key) const {
    return values_.count(section + "." + key) > 0;
  }

  std::string get_string(const std::string& section, const std::string& key,
                         const std::string& fallback) const {
    const auto it = values_.find(section + "." + key);
    return it == values_.end() ? fallback : it->second;
  }

  double get_double(const std::string& section, const std::string& key,
                    double fallback) const {
    const auto it = values_.find(section + "." + key);
    if (it == values_.end()) return fallback;
    return parse_double(it->second, section + "." + key);
  }

  /// Linear quantity that may be specified in decibels with a "_db"
  /// key suffix; the dB form wins if both are present.
  double get_linear_or_db(const std::string& section, const std::string& key,
                          double fallback_linear) const {
    if (has(section, key + "_db"))
      return std::pow(10.0, get_double(section, key + "_db", 0.0) / 10.0);
    return get_double(section, key, fallback_linear);
  }

  int get_int(const std::string& section, const std::string& key,
              int fallback) const {
    const double v = get_double(section, key, fallback);
    return static_cast<int>(v);
  }

  bool get_bool(const std::string& section, const std::string& key,
                bool fallback) const {
    const auto it = values_.find(section + "." + key);
    if (it == values_.end()) return fallback;
    const std::string& v = it->second;
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError("not a boolean: " + section + "." + key + " = " + v);
  }

 private:
  static std::string trim(const std::string& s) {
    size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
  }

  static double parse_double(const std::string& s, const std::string& where) {
    try {
      size_t pos = 0;
      const double v = std::stod(s, &pos);
      if (pos != s.size()) throw std::invalid_argument("trailing characters");
      return v;
    } catch (const std::exception&) {
      throw ConfigError("not a number: " + where + " = " + s);
    }
  }

  std::map<std::string, std::string> values_;
};

}  // namespace radnav
