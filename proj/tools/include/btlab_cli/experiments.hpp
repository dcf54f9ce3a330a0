#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "btlab_cli/config.hpp"

namespace btlab::cli {

// Command-line values that take precedence over [experiment] and [output].
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
  std::optional<std::string> out_dir;
};

struct Outcome {
  int exit_code = 0;  // 0 done, 2 extraction INCOMPLETE
  std::string report;  // contents of report.json
  std::vector<std::string> files;
};

// solve, mobius-sweep, extract, verify-identity, gap-test, degree, neck.
const std::vector<std::string>& experiment_kinds();

// Sections and keys accepted for one experiment kind.
Schema schema_for(const std::string& kind);

// Runs one experiment and writes report.json plus its CSV files into the
// output directory. An empty `kind` takes [experiment] kind; a kind that
// disagrees with the file is an error. Throws btlab::Error.
Outcome run_experiment(const Config& config, const std::string& kind, const Overrides& overrides);

// Loads, runs and maps failures to exit code 1 with an "error: " line on
// `err`. Written files are listed on `out`.
int run(const std::string& kind, const std::string& config_path, const Overrides& overrides, std::ostream& out,
        std::ostream& err);

}  // namespace btlab::cli
