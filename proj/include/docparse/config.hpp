#pragma once

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "docparse/error.hpp"
#include "docparse/idtp.hpp"
#include "docparse/reward.hpp"
#include "docparse/table_merge.hpp"
#include "docparse/text.hpp"

// Pipeline configuration. The file format is a flat TOML subset:
//
//   # comment
//   near_threshold = 0.8
//   include_headers_footers = false
//   continuation_scorer = "exec:python3 scorer.py"
//
// Section headers are accepted and ignored. Precedence, lowest first:
// defaults, file, DOCPARSE_<KEY> environment variables, --set key=value.
namespace docparse {

struct Config {
  double near_threshold = 0.8;
  double continuation_threshold = 0.5;
  double min_confidence = 0.3;
  double overlap_tolerance = 0.2;
  double w_rule = 0.5;
  double rule_weight_well_formed = 0.25;
  double rule_weight_rectangular = 0.25;
  double rule_weight_placeholder = 0.25;
  double rule_weight_non_empty = 0.25;
  double eps = 1e-6;
  bool include_headers_footers = false;
  std::string fill_color = "#D3D3D3";
  std::string placeholder_mode = "positional";  // or "strict"
  std::string image_ref_template = "images/p{page}_e{index}_{id}.ppm";
  std::string continuation_scorer;  // "", "exec:<command>" or "http://..."
  std::string reward_scorer;

  MergeConfig merge() const { return MergeConfig{near_threshold, continuation_threshold}; }
  RuleWeights rule_weights() const {
    return RuleWeights{rule_weight_well_formed, rule_weight_rectangular, rule_weight_placeholder,
                       rule_weight_non_empty};
  }
  IdtpConfig idtp() const { return IdtpConfig{min_confidence, overlap_tolerance, parse_color(fill_color)}; }
  RestoreMode restore_mode() const {
    return placeholder_mode == "strict" ? RestoreMode::Strict : RestoreMode::Positional;
  }

  /// "#RRGGBB" or "r,g,b".
  static Rgb parse_color(std::string_view s) {
    s = text::trim(s);
    unsigned r = 0, g = 0, b = 0;
    const std::string str(s);
    if (str.size() == 7 && str[0] == '#' && std::sscanf(str.c_str() + 1, "%2x%2x%2x", &r, &g, &b) == 3)
      return Rgb{static_cast<std::uint8_t>(r), static_cast<std::uint8_t>(g), static_cast<std::uint8_t>(b)};
    char tail = 0;
    if (std::sscanf(str.c_str(), "%u,%u,%u%c", &r, &g, &b, &tail) == 3 && r < 256 && g < 256 && b < 256)
      return Rgb{static_cast<std::uint8_t>(r), static_cast<std::uint8_t>(g), static_cast<std::uint8_t>(b)};
    throw Error(ErrorCode::ConfigError, "bad color \"" + str + "\"");
  }

  void validate() const {
    const auto unit = [](const char* name, double v) {
      if (!(v >= 0.0 && v <= 1.0)) throw Error(ErrorCode::ConfigError, std::string(name) + " must lie in [0,1]");
    };
    unit("near_threshold", near_threshold);
    unit("continuation_threshold", continuation_threshold);
    unit("min_confidence", min_confidence);
    unit("overlap_tolerance", overlap_tolerance);
    unit("w_rule", w_rule);
    unit("rule_weight_well_formed", rule_weight_well_formed);
    unit("rule_weight_rectangular", rule_weight_rectangular);
    unit("rule_weight_placeholder", rule_weight_placeholder);
    unit("rule_weight_non_empty", rule_weight_non_empty);
    if (std::abs(rule_weights().sum() - 1.0) > 1e-9) throw Error(ErrorCode::ConfigError, "rule weights must sum to 1");
    if (!(eps >= 0.0)) throw Error(ErrorCode::ConfigError, "eps must be non-negative");
    if (placeholder_mode != "positional" && placeholder_mode != "strict")
      throw Error(ErrorCode::ConfigError, "placeholder_mode must be positional or strict");
    parse_color(fill_color);
  }

  friend bool operator==(const Config&, const Config&) = default;
};

namespace detail {

struct ConfigField {
  enum Kind { Number, Flag, String } kind;
  std::function<void(Config&, const std::string&)> set;
  std::function<std::string(const Config&)> get;
};

inline std::string format_number(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

inline double parse_number(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw Error(ErrorCode::ConfigError, key + ": \"" + v + "\" is not a number");
  }
}

inline bool parse_flag(const std::string& key, const std::string& v) {
  const std::string l = text::to_lower_ascii(v);
  if (l == "true" || l == "1" || l == "yes" || l == "on") return true;
  if (l == "false" || l == "0" || l == "no" || l == "off") return false;
  throw Error(ErrorCode::ConfigError, key + ": \"" + v + "\" is not a boolean");
}

inline std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  return out + "\"";
}

inline std::string unquote(std::string_view v) {
  if (v.size() >= 2 && (v.front() == '"' || v.front() == '\'') && v.back() == v.front()) {
    const bool basic = v.front() == '"';
    v = v.substr(1, v.size() - 2);
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (basic && v[i] == '\\' && i + 1 < v.size()) {
        const char n = v[++i];
        out.push_back(n == 'n' ? '\n' : n == 't' ? '\t' : n);
      } else {
        out.push_back(v[i]);
      }
    }
    return out;
  }
  return std::string(v);
}

inline const std::map<std::string, ConfigField>& config_fields() {
  using F = ConfigField;
  static const std::map<std::string, ConfigField> fields = [] {
    std::map<std::string, ConfigField> m;
    const auto number = [&m](const char* key, double Config::*member) {
      m[key] = F{F::Number, [member, key](Config& c, const std::string& v) { c.*member = parse_number(key, v); },
                 [member](const Config& c) { return format_number(c.*member); }};
    };
    const auto string = [&m](const char* key, std::string Config::*member) {
      m[key] = F{F::String, [member](Config& c, const std::string& v) { c.*member = v; },
                 [member](const Config& c) { return c.*member; }};
    };
    number("near_threshold", &Config::near_threshold);
    number("continuation_threshold", &Config::continuation_threshold);
    number("min_confidence", &Config::min_confidence);
    number("overlap_tolerance", &Config::overlap_tolerance);
    number("w_rule", &Config::w_rule);
    number("rule_weight_well_formed", &Config::rule_weight_well_formed);
    number("rule_weight_rectangular", &Config::rule_weight_rectangular);
    number("rule_weight_placeholder", &Config::rule_weight_placeholder);
    number("rule_weight_non_empty", &Config::rule_weight_non_empty);
    number("eps", &Config::eps);
    m["include_headers_footers"] =
        F{F::Flag,
          [](Config& c, const std::string& v) { c.include_headers_footers = parse_flag("include_headers_footers", v); },
          [](const Config& c) { return std::string(c.include_headers_footers ? "true" : "false"); }};
    string("fill_color", &Config::fill_color);
    string("placeholder_mode", &Config::placeholder_mode);
    string("image_ref_template", &Config::image_ref_template);
    string("continuation_scorer", &Config::continuation_scorer);
    string("reward_scorer", &Config::reward_scorer);
    return m;
  }();
  return fields;
}

}  // namespace detail

/// Sets one key from its textual value (quotes optional for strings).
inline void set_config_value(Config& cfg, const std::string& key, std::string_view value) {
  const auto& fields = detail::config_fields();
  const auto it = fields.find(key);
  if (it == fields.end()) throw Error(ErrorCode::ConfigError, "unknown key \"" + key + "\"");
  it->second.set(cfg, detail::unquote(text::trim(value)));
}

namespace detail {

/// Strips a trailing comment that is not inside a quoted string.
inline std::string_view strip_comment(std::string_view line) {
  char quote = 0;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quote) {
      if (c == '\\' && quote == '"') ++i;
      else if (c == quote) quote = 0;
    } else if (c == '"' || c == '\'') {
      quote = c;
    } else if (c == '#') {
      return line.substr(0, i);
    }
  }
  return line;
}

}  // namespace detail

/// Applies a config document on top of `base`.
inline Config parse_config(std::string_view document, Config base = {}) {
  std::istringstream in{std::string(document)};
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const std::string_view line = text::trim(detail::strip_comment(raw));
    if (line.empty() || line.front() == '[') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw Error(ErrorCode::ConfigError, "line " + std::to_string(line_no) + ": expected key = value");
    const std::string key(text::trim(line.substr(0, eq)));
    try {
      set_config_value(base, key, line.substr(eq + 1));
    } catch (const Error& e) {
      throw Error(ErrorCode::ConfigError, "line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return base;
}

inline Config load_config_file(const std::string& path, Config base = {}) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open config " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), std::move(base));
}

/// Reads DOCPARSE_<UPPER_KEY> overrides through `getenv`.
inline Config apply_env_overrides(Config cfg, const std::function<const char*(const char*)>& getenv_fn =
                                                  [](const char* name) { return std::getenv(name); }) {
  for (const auto& [key, field] : detail::config_fields()) {
    std::string name = "DOCPARSE_";
    for (char c : key) name.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
    if (const char* v = getenv_fn(name.c_str())) set_config_value(cfg, key, v);
  }
  return cfg;
}

inline std::string write_config(const Config& cfg) {
  std::string out = "# docparse configuration\n";
  for (const auto& [key, field] : detail::config_fields()) {
    const std::string value = field.get(cfg);
    out += key + " = " + (field.kind == detail::ConfigField::String ? detail::quote(value) : value) + "\n";
  }
  return out;
}

}  // namespace docparse
