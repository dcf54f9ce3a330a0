#include "btlab_cli/config.hpp"

#include <algorithm>
#include <cctype>
#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <istream>
#include <sstream>

#include "btlab/error.hpp"

namespace btlab::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool valid_name(const std::string& s) {
  if (s.empty()) return false;
  return std::all_of(s.begin(), s.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.';
  });
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(text);
  while (std::getline(is, item, ',')) out.push_back(trim(item));
  return out;
}

std::optional<double> parse_plain(const std::string& s) {
  if (s.empty()) return std::nullopt;
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || errno == ERANGE) return std::nullopt;
  return v;
}

std::optional<long> parse_long(const std::string& s) {
  if (s.empty()) return std::nullopt;
  errno = 0;
  char* end = nullptr;
  const long v = std::strtol(s.c_str(), &end, 10);
  if (end != s.c_str() + s.size() || errno == ERANGE) return std::nullopt;
  return v;
}

}  // namespace

std::optional<double> parse_real(const std::string& text) {
  const std::string s = trim(text);
  const auto slash = s.find('/');
  if (slash == std::string::npos) {
    auto v = parse_plain(s);
    if (v && !std::isfinite(*v)) return std::nullopt;
    return v;
  }
  const auto a = parse_plain(trim(s.substr(0, slash)));
  const auto b = parse_plain(trim(s.substr(slash + 1)));
  if (!a || !b || *b == 0.0) return std::nullopt;
  const double v = *a / *b;
  if (!std::isfinite(v)) return std::nullopt;
  return v;
}

Config Config::parse(std::istream& is, const std::string& source) {
  Config c;
  c.source_ = source;
  std::string raw;
  std::string current;
  int line = 0;
  auto error = [&](const std::string& msg) {
    throw Error(ErrorCode::parse, source + ":" + std::to_string(line) + ": " + msg);
  };
  while (std::getline(is, raw)) {
    ++line;
    std::string s = raw;
    const auto hash = s.find_first_of("#;");
    if (hash != std::string::npos) s = s.substr(0, hash);
    s = trim(s);
    if (s.empty()) continue;
    if (s.front() == '[') {
      if (s.back() != ']') error("unterminated section header");
      const std::string name = trim(s.substr(1, s.size() - 2));
      if (!valid_name(name)) error("invalid section name '" + name + "'");
      if (c.sections_.count(name)) {
        error("duplicate section [" + name + "] (first at line " + std::to_string(c.sections_[name].line) + ")");
      }
      c.sections_[name].line = line;
      c.order_.push_back(name);
      current = name;
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) error("expected 'key = value'");
    const std::string key = trim(s.substr(0, eq));
    const std::string value = trim(s.substr(eq + 1));
    if (!valid_name(key)) error("invalid key '" + key + "'");
    if (current.empty()) error("key '" + key + "' outside any section");
    if (value.empty()) error("empty value for '" + key + "'");
    auto& entries = c.sections_[current].entries;
    if (entries.count(key)) {
      error("duplicate key '" + key + "' in [" + current + "] (first at line " + std::to_string(entries[key].line) +
            ")");
    }
    entries[key] = Entry{value, line};
  }
  return c;
}

Config Config::load(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorCode::io, "cannot open config file '" + path + "'");
  Config c = parse(is, path);
  c.base_dir_ = std::filesystem::path(path).parent_path().string();
  return c;
}

bool Config::has_section(const std::string& section) const { return sections_.count(section) > 0; }

bool Config::has(const std::string& section, const std::string& key) const { return find(section, key) != nullptr; }

const Config::Entry* Config::find(const std::string& section, const std::string& key) const {
  const auto s = sections_.find(section);
  if (s == sections_.end()) return nullptr;
  const auto e = s->second.entries.find(key);
  return e == s->second.entries.end() ? nullptr : &e->second;
}

std::vector<std::string> Config::sections() const { return order_; }

int Config::section_line(const std::string& section) const {
  const auto s = sections_.find(section);
  return s == sections_.end() ? 0 : s->second.line;
}

std::vector<std::string> Config::keys(const std::string& section) const {
  std::vector<std::pair<int, std::string>> lines;
  const auto s = sections_.find(section);
  if (s != sections_.end()) {
    for (const auto& [key, entry] : s->second.entries) lines.emplace_back(entry.line, key);
  }
  std::sort(lines.begin(), lines.end());
  std::vector<std::string> out;
  for (auto& [line, key] : lines) out.push_back(std::move(key));
  return out;
}

std::string Config::where(const std::string& section, const std::string& key) const {
  const Entry* e = find(section, key);
  const int line = e ? e->line : section_line(section);
  return source_ + ":" + std::to_string(line) + ": ";
}

void Config::fail(const std::string& section, const std::string& key, const std::string& message) const {
  throw Error(ErrorCode::parse, where(section, key) + "[" + section + "] " + key + ": " + message);
}

std::string Config::get_string(const std::string& section, const std::string& key, const std::string& fallback) const {
  const Entry* e = find(section, key);
  return e ? e->value : fallback;
}

std::string Config::require_string(const std::string& section, const std::string& key) const {
  const Entry* e = find(section, key);
  if (!e) fail(section, key, "required key is missing");
  return e->value;
}

double Config::get_double(const std::string& section, const std::string& key, double fallback) const {
  const Entry* e = find(section, key);
  if (!e) return fallback;
  const auto v = parse_real(e->value);
  if (!v) fail(section, key, "expected a real number, got '" + e->value + "'");
  return *v;
}

double Config::require_double(const std::string& section, const std::string& key) const {
  if (!has(section, key)) fail(section, key, "required key is missing");
  return get_double(section, key, 0.0);
}

long Config::get_int(const std::string& section, const std::string& key, long fallback) const {
  const Entry* e = find(section, key);
  if (!e) return fallback;
  const auto v = parse_long(e->value);
  if (!v) fail(section, key, "expected an integer, got '" + e->value + "'");
  return *v;
}

long Config::require_int(const std::string& section, const std::string& key) const {
  if (!has(section, key)) fail(section, key, "required key is missing");
  return get_int(section, key, 0);
}

bool Config::get_bool(const std::string& section, const std::string& key, bool fallback) const {
  const Entry* e = find(section, key);
  if (!e) return fallback;
  std::string v = e->value;
  std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return std::tolower(c); });
  if (v == "true" || v == "yes" || v == "on" || v == "1") return true;
  if (v == "false" || v == "no" || v == "off" || v == "0") return false;
  fail(section, key, "expected a boolean, got '" + e->value + "'");
}

std::vector<double> Config::get_doubles(const std::string& section, const std::string& key,
                                        const std::vector<double>& fallback) const {
  const Entry* e = find(section, key);
  if (!e) return fallback;
  std::vector<double> out;
  for (const std::string& item : split_list(e->value)) {
    const auto v = parse_real(item);
    if (!v) fail(section, key, "expected a list of real numbers, got '" + item + "'");
    out.push_back(*v);
  }
  return out;
}

std::vector<double> Config::require_doubles(const std::string& section, const std::string& key) const {
  if (!has(section, key)) fail(section, key, "required key is missing");
  return get_doubles(section, key, {});
}

std::vector<int> Config::require_ints(const std::string& section, const std::string& key) const {
  const Entry* e = find(section, key);
  if (!e) fail(section, key, "required key is missing");
  std::vector<int> out;
  const auto dots = e->value.find("..");
  if (dots != std::string::npos) {
    const auto a = parse_long(trim(e->value.substr(0, dots)));
    const auto b = parse_long(trim(e->value.substr(dots + 2)));
    if (!a || !b) fail(section, key, "expected a range 'a..b', got '" + e->value + "'");
    if (*b < *a) fail(section, key, "empty range '" + e->value + "'");
    for (long k = *a; k <= *b; ++k) out.push_back(static_cast<int>(k));
    return out;
  }
  for (const std::string& item : split_list(e->value)) {
    const auto v = parse_long(item);
    if (!v) fail(section, key, "expected a list of integers, got '" + item + "'");
    out.push_back(static_cast<int>(*v));
  }
  if (out.empty()) fail(section, key, "empty list");
  return out;
}

std::vector<std::string> Config::get_strings(const std::string& section, const std::string& key) const {
  const Entry* e = find(section, key);
  return e ? split_list(e->value) : std::vector<std::string>{};
}

double Config::get_positive(const std::string& section, const std::string& key, double fallback) const {
  if (!has(section, key)) return fallback;
  const double v = get_double(section, key, fallback);
  if (!(v > 0.0)) fail(section, key, "must be positive");
  return v;
}

void check_schema(const Config& config, const Schema& schema) {
  for (const std::string& name : config.sections()) {
    const std::vector<std::string>* keys = nullptr;
    const auto exact = schema.find(name);
    if (exact != schema.end()) {
      keys = &exact->second;
    } else {
      for (const auto& [pattern, allowed] : schema) {
        if (pattern.empty() || pattern.back() != '#') continue;
        const std::string prefix = pattern.substr(0, pattern.size() - 1);
        if (name.size() <= prefix.size() || name.compare(0, prefix.size(), prefix) != 0) continue;
        const std::string tail = name.substr(prefix.size());
        if (std::all_of(tail.begin(), tail.end(), [](unsigned char c) { return std::isdigit(c); })) {
          keys = &allowed;
          break;
        }
      }
    }
    if (!keys) {
      throw Error(ErrorCode::parse, config.source() + ":" + std::to_string(config.section_line(name)) +
                                        ": unknown section [" + name + "]");
    }
    for (const std::string& key : config.keys(name)) {
      if (std::find(keys->begin(), keys->end(), key) == keys->end()) {
        throw Error(ErrorCode::parse, config.where(name, key) + "unknown key '" + key + "' in [" + name + "]");
      }
    }
  }
}

}  // namespace btlab::cli
