#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace btlab::cli {

// Flat key-value text with [section] headers:
//
//   # comment
//   [grid]
//   n = 2
//   h = 1/64
//
// Keys must be unique within a section and sections unique within a file.
// Every diagnostic carries "source:line: ".
class Config {
 public:
  struct Entry {
    std::string value;
    int line = 0;
  };

  static Config parse(std::istream& is, const std::string& source = "<config>");
  static Config load(const std::string& path);

  const std::string& source() const { return source_; }
  // Directory of the source file, for resolving relative paths ("" for streams).
  const std::string& base_dir() const { return base_dir_; }

  bool has_section(const std::string& section) const;
  bool has(const std::string& section, const std::string& key) const;
  const Entry* find(const std::string& section, const std::string& key) const;
  // Sections in file order.
  std::vector<std::string> sections() const;
  int section_line(const std::string& section) const;
  // Keys of a section ordered by line.
  std::vector<std::string> keys(const std::string& section) const;

  // Typed access. The `get_*` forms return the fallback when the key is
  // absent; `require_*` throw when it is missing. Malformed values throw with
  // the line number of the entry.
  std::string get_string(const std::string& section, const std::string& key, const std::string& fallback) const;
  std::string require_string(const std::string& section, const std::string& key) const;
  double get_double(const std::string& section, const std::string& key, double fallback) const;
  double require_double(const std::string& section, const std::string& key) const;
  long get_int(const std::string& section, const std::string& key, long fallback) const;
  long require_int(const std::string& section, const std::string& key) const;
  bool get_bool(const std::string& section, const std::string& key, bool fallback) const;
  std::vector<double> get_doubles(const std::string& section, const std::string& key,
                                  const std::vector<double>& fallback) const;
  std::vector<double> require_doubles(const std::string& section, const std::string& key) const;
  // "3..7" or "3, 4, 6".
  std::vector<int> require_ints(const std::string& section, const std::string& key) const;
  std::vector<std::string> get_strings(const std::string& section, const std::string& key) const;

  // Positive when present (thresholds, tolerances); returns the fallback when
  // absent.
  double get_positive(const std::string& section, const std::string& key, double fallback) const;

  // "source:line: message" for a key (line of the section header when the key
  // is absent, 0 when neither exists).
  std::string where(const std::string& section, const std::string& key) const;
  [[noreturn]] void fail(const std::string& section, const std::string& key, const std::string& message) const;

 private:
  struct Section {
    int line = 0;
    std::map<std::string, Entry> entries;
  };
  std::string source_;
  std::string base_dir_;
  std::vector<std::string> order_;
  std::map<std::string, Section> sections_;
};

// Allowed sections and keys. A section name ending in '#' matches that prefix
// followed by one or more digits ("bubble#" matches [bubble1], [bubble2]).
using Schema = std::map<std::string, std::vector<std::string>>;

// Rejects unknown sections and keys, naming the offending line.
void check_schema(const Config& config, const Schema& schema);

// Parses a real, accepting a simple fraction "a/b".
std::optional<double> parse_real(const std::string& text);

}  // namespace btlab::cli
