#include <unistd.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "btlab/bubbletree.hpp"
#include "btlab/error.hpp"
#include "btlab/map_io.hpp"
#include "btlab_cli/config.hpp"
#include "btlab_cli/experiments.hpp"
#include "btlab_cli/pool.hpp"
#include "doctest.h"

using namespace btlab;
using namespace btlab::cli;
namespace fs = std::filesystem;
using Json = nlohmann::json;

namespace {

Config parse(const std::string& text) {
  std::istringstream is(text);
  return Config::parse(is, "t.ini");
}

// Message of the parse error raised by `f`, or "" when none is raised.
template <class F>
std::string parse_error(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::parse);
    return e.what();
  }
  return "";
}

bool contains(const std::string& s, const std::string& part) { return s.find(part) != std::string::npos; }

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("btlab_cli_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name, const std::string& text) const {
    std::ofstream(path / name) << text;
    return (path / name).string();
  }
  std::string read(const std::string& name) const {
    std::ifstream is(path / name);
    return {std::istreambuf_iterator<char>(is), {}};
  }
};

Overrides out_to(const fs::path& dir) {
  Overrides o;
  o.out_dir = dir.string();
  return o;
}

const char* kGap = R"(
[experiment]
kind = gap-test
seed = 3
[grid]
n = 2
r = 1
h = 1/8
[solver]
residual_tol = 1e-9
[gap]
trials = 3
)";

}  // namespace

// ------------------------------------------------------------------- parser

TEST_CASE("config: sections, comments and typed values") {
  const Config c = parse(
      "# leading comment\n"
      "[grid]\n"
      "n = 3   ; trailing comment\n"
      "h = 1/64\n"
      "half = no\n"
      "\n"
      "[sequence]\n"
      "k = 3..7\n"
      "alpha = 0.5, 1/4 , 1e-3\n"
      "name = hello world\n");
  CHECK(c.sections() == std::vector<std::string>{"grid", "sequence"});
  CHECK(c.get_int("grid", "n", 0) == 3);
  CHECK(c.get_double("grid", "h", 0.0) == 1.0 / 64);
  CHECK_FALSE(c.get_bool("grid", "half", true));
  CHECK(c.get_double("grid", "r", 0.75) == 0.75);
  CHECK(c.require_ints("sequence", "k") == std::vector<int>{3, 4, 5, 6, 7});
  CHECK(c.get_doubles("sequence", "alpha", {}) == std::vector<double>{0.5, 0.25, 1e-3});
  CHECK(c.get_string("sequence", "name", "") == "hello world");
  CHECK(c.keys("grid") == std::vector<std::string>{"n", "h", "half"});
}

TEST_CASE("config: malformed input is reported with its line") {
  CHECK(contains(parse_error([] { parse("[grid]\nn = 2\nn = 3\n"); }), "t.ini:3: duplicate key 'n'"));
  CHECK(contains(parse_error([] { parse("[grid]\n[solver]\n[grid]\n"); }), "t.ini:3: duplicate section [grid]"));
  CHECK(contains(parse_error([] { parse("# c\nn = 2\n"); }), "t.ini:2: key 'n' outside any section"));
  CHECK(contains(parse_error([] { parse("[grid]\n\nn 2\n"); }), "t.ini:3: expected 'key = value'"));
  CHECK(contains(parse_error([] { parse("[grid\n"); }), "t.ini:1: unterminated section header"));
  CHECK(contains(parse_error([] { parse("[grid]\nn =\n"); }), "t.ini:2: empty value"));
  CHECK(contains(parse_error([] { parse("[a b]\n"); }), "t.ini:1: invalid section name"));
}

TEST_CASE("config: bad values name the entry's line") {
  const Config c = parse("[grid]\n\nh = 1/0\nn = two\nhalf = maybe\nr = -1\n[sequence]\nk = 7..3\n");
  CHECK(contains(parse_error([&] { c.get_double("grid", "h", 0.0); }), "t.ini:3:"));
  CHECK(contains(parse_error([&] { c.get_int("grid", "n", 0); }), "t.ini:4:"));
  CHECK(contains(parse_error([&] { c.get_bool("grid", "half", true); }), "t.ini:5:"));
  CHECK(contains(parse_error([&] { c.get_positive("grid", "r", 1.0); }), "t.ini:6:"));
  CHECK(contains(parse_error([&] { c.require_ints("sequence", "k"); }), "t.ini:8: [sequence] k: empty range"));
  CHECK(contains(parse_error([&] { c.require_string("grid", "missing"); }), "t.ini:1: [grid] missing: required"));
}

TEST_CASE("config: fractions") {
  CHECK(parse_real("1/64") == 1.0 / 64);
  CHECK(parse_real(" -3 / 4 ") == -0.75);
  CHECK(parse_real("2.5e-1") == 0.25);
  CHECK_FALSE(parse_real("1/0").has_value());
  CHECK_FALSE(parse_real("inf").has_value());
  CHECK_FALSE(parse_real("1//2").has_value());
  CHECK_FALSE(parse_real("").has_value());
}

TEST_CASE("schema: unknown keys and sections are rejected") {
  const Schema s{{"grid", {"n", "h"}}, {"bubble#", {"center"}}};
  CHECK_NOTHROW(check_schema(parse("[grid]\nn = 2\n[bubble1]\ncenter = 0\n[bubble12]\ncenter = 1\n"), s));
  CHECK(contains(parse_error([&] { check_schema(parse("[grid]\nn = 2\nnn = 3\n"), s); }),
                 "t.ini:3: unknown key 'nn' in [grid]"));
  CHECK(contains(parse_error([&] { check_schema(parse("[grid]\n[solver]\n"), s); }), "t.ini:2: unknown section [solver]"));
  CHECK(contains(parse_error([&] { check_schema(parse("[bubble]\n"), s); }), "unknown section [bubble]"));
  CHECK(contains(parse_error([&] { check_schema(parse("[bubblex]\n"), s); }), "unknown section [bubblex]"));
}

TEST_CASE("schema: sections belong to their experiment") {
  // [gap] is valid for gap-test only
  const Config c = parse("[experiment]\nkind = solve\n[gap]\ntrials = 2\n");
  CHECK(contains(parse_error([&] { run_experiment(c, "", {}); }), "t.ini:3: unknown section [gap]"));
}

TEST_CASE("shipped example configs pass their schema") {
  int count = 0;
  for (const auto& entry : fs::directory_iterator(BTLAB_CONFIG_DIR)) {
    if (entry.path().extension() != ".ini") continue;
    const Config c = Config::load(entry.path().string());
    const std::string kind = c.require_string("experiment", "kind");
    CHECK_NOTHROW(check_schema(c, schema_for(kind)));
    ++count;
  }
  CHECK(count >= static_cast<int>(experiment_kinds().size()));
}

// ------------------------------------------------------------------- runner

TEST_CASE("run: malformed config exits 1 with a line-numbered diagnostic") {
  TempDir t("bad");
  const std::string path = t.file("bad.ini", "[grid]\nn = 2\nh = 1/16\nbogus\n");
  std::ostringstream out, err;
  CHECK(run("solve", path, out_to(t.path / "o"), out, err) == 1);
  CHECK(contains(err.str(), "error: "));
  CHECK(contains(err.str(), path + ":4: expected 'key = value'"));
  CHECK_FALSE(fs::exists(t.path / "o" / "report.json"));
}

TEST_CASE("run: unknown key exits 1") {
  TempDir t("unknown");
  const std::string path = t.file("u.ini", "[grid]\nn = 2\nsize = 3\n[init]\nkind = constant\nvalue = 0, 1\n");
  std::ostringstream out, err;
  CHECK(run("solve", path, out_to(t.path), out, err) == 1);
  CHECK(contains(err.str(), path + ":3: unknown key 'size' in [grid]"));
}

TEST_CASE("run: missing file and kind mismatch exit 1") {
  TempDir t("mismatch");
  std::ostringstream out, err;
  CHECK(run("solve", (t.path / "nope.ini").string(), {}, out, err) == 1);
  CHECK(contains(err.str(), "cannot open config file"));
  const std::string path = t.file("g.ini", kGap);
  std::ostringstream err2;
  CHECK(run("solve", path, out_to(t.path), out, err2) == 1);
  CHECK(contains(err2.str(), "config is for 'gap-test' but 'solve' was requested"));
}

TEST_CASE("gap-test: small energy relaxes to constants") {
  TempDir t("gap");
  const Outcome o = run_experiment(parse(kGap), "gap-test", out_to(t.path));
  CHECK(o.exit_code == 0);
  const Json r = Json::parse(o.report);
  CHECK(r["constant"] == true);
  REQUIRE(r["trials"].size() == 3);
  // ε_b default 0.5·E_2(M_0)^{1/2} with E_2(M_0) ≈ 2π
  const double bound = std::pow(0.5 * std::sqrt(2.0 * std::numbers::pi) / 2.0, 2);
  CHECK(r["energy_bound"].get<double>() == doctest::Approx(bound).epsilon(0.01));
  for (const Json& row : r["trials"]) {
    CHECK(row["energy_init"].get<double>() < r["energy_bound"].get<double>());
    CHECK(row["oscillation"].get<double>() <= 1e-3);
  }
  CHECK(t.read("report.json") == o.report);
  CHECK(contains(t.read("trials.csv"), "trial,amplitude,energy_init,energy,residual,oscillation,iterations,constant\n"));
}

TEST_CASE("identical config and seed give byte-identical reports") {
  TempDir t("determinism");
  const Config c = parse(kGap);
  Overrides a = out_to(t.path / "a");
  Overrides b = out_to(t.path / "b");
  b.jobs = 3;
  const Outcome ra = run_experiment(c, "", a);
  const Outcome rb = run_experiment(c, "", b);
  CHECK(ra.report == rb.report);
  Overrides other = out_to(t.path / "c");
  other.seed = 4;
  const Outcome rc = run_experiment(c, "", other);
  CHECK(rc.report != ra.report);
  CHECK(Json::parse(rc.report)["seed"] == 4);
}

TEST_CASE("mobius-sweep: four rows and their spread") {
  TempDir t("sweep");
  const Config c = parse("[grid]\nn = 2\nr = 1\nh = 1/32\nhalf = false\n[sweep]\na = 0, 0.3, 0.6, 0.9\n");
  const Outcome o = run_experiment(c, "mobius-sweep", out_to(t.path));
  const Json r = Json::parse(o.report);
  REQUIRE(r["rows"].size() == 4);
  double lo = INFINITY, hi = 0.0, sum = 0.0;
  for (const Json& row : r["rows"]) {
    const double e = row["energy"].get<double>();
    // M_a maps the disc onto itself conformally: E_2 = 2·area = 2π
    CHECK(e == doctest::Approx(2.0 * std::numbers::pi).epsilon(0.05));
    lo = std::min(lo, e);
    hi = std::max(hi, e);
    sum += e;
  }
  CHECK(r["max_relative_spread"].get<double>() == doctest::Approx((hi - lo) / (sum / 4)).epsilon(1e-12));
  CHECK(r["rows"][3]["a"].get<double>() == 0.9);
  const std::string csv = t.read("mobius.csv");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
}

TEST_CASE("solve: converged output with re-assembled residual") {
  TempDir t("solve");
  const Config c = parse(
      "[grid]\nn = 2\nr = 1\nh = 1/16\n[init]\nkind = chart\nscale = 1/2\n[solver]\nresidual_tol = 1e-7\n");
  const Outcome o = run_experiment(c, "solve", out_to(t.path));
  const Json r = Json::parse(o.report);
  CHECK(r["converged"] == true);
  CHECK(r["residual_reassembled"].get<double>() <= 1e-7);
  CHECK(r["monotone_descent"] == true);
  CHECK(r["max_principle"]["ok"] == true);
  CHECK(r["energy"].get<double>() <= r["energy_initial"].get<double>());
  const DiscreteMap u = read_map((t.path / "solution.map").string());
  CHECK(u.grid()->spacing() == 1.0 / 16);
}

TEST_CASE("degree: chart bubble has face degree 1") {
  TempDir t("degree");
  const Config c = parse("[grid]\nn = 2\nh = 1/32\n[init]\nkind = chart\nscale = 1/32\n");
  const Json r = Json::parse(run_experiment(c, "degree", out_to(t.path)).report);
  CHECK(r["value"] == 1);
  // in n = 2 the flipped bubble reverses both the trace and its closure
  const Config flipped = parse("[grid]\nn = 2\nh = 1/32\n[init]\nkind = chart\nscale = 1/32\nflipped = true\n");
  CHECK(Json::parse(run_experiment(flipped, "degree", out_to(t.path)).report)["value"] == 1);
}

namespace {

const char* kSingle = R"(
[sequence]
k = 4..5
[synthetic]
superposition = complex_product
[bubble1]
center = 1/8, 0
[thresholds]
eps_b_factor = 0.9
)";

}  // namespace

TEST_CASE("extract: one record, CSV files and exit 0") {
  TempDir t("extract");
  const Outcome o = run_experiment(parse(kSingle), "extract", out_to(t.path));
  CHECK(o.exit_code == 0);
  const Json r = Json::parse(o.report);
  CHECK(r["incomplete"] == false);
  CHECK(r["extraction"]["generations"].size() == 1);
  CHECK(contains(t.read("defect.csv"), "k,defect\n"));
  CHECK(contains(t.read("profile.csv"), "k,t,Q\n"));
}

TEST_CASE("extract: INCOMPLETE extraction exits 2") {
  // With ε_b = 0.5·E(M₀)^{1/2} the detection radius falls below 4h on these grids.
  std::string text = kSingle;
  text.replace(text.find("eps_b_factor = 0.9"), 18, "eps_b_factor = 0.5");
  TempDir t("incomplete");
  const Outcome o = run_experiment(parse(text), "extract", out_to(t.path));
  CHECK(o.exit_code == 2);
  CHECK(Json::parse(o.report)["incomplete"] == true);
  std::ostringstream out, err;
  CHECK(run("extract", t.file("i.ini", text), out_to(t.path), out, err) == 2);
}

TEST_CASE("verify-identity: all checks pass on a single bubble") {
  TempDir t("verify");
  const Json r = Json::parse(run_experiment(parse(kSingle), "verify-identity", out_to(t.path)).report);
  CHECK(r["pass"] == true);
  std::vector<std::string> names;
  for (const Json& c : r["checks"]) names.push_back(c["name"]);
  CHECK(names == std::vector<std::string>{"energy_identity", "superadditivity", "lambda_star_range",
                                          "energy_quantization", "separation", "degree_additivity"});
}

TEST_CASE("neck: one row per detected index") {
  TempDir t("neck");
  const Json r = Json::parse(run_experiment(parse(kSingle), "neck", out_to(t.path)).report);
  REQUIRE(r["rows"].size() == 2);
  for (const Json& row : r["rows"]) {
    CHECK(row["neck_energy"].get<double>() >= 0.0);
    if (!row["relative"].is_null()) CHECK(row["relative"].get<double>() <= 0.05);
  }
}

TEST_CASE("sequence from map files matches the synthetic source") {
  TempDir t("files");
  const Config synth = parse(kSingle);
  const Json a = Json::parse(run_experiment(synth, "extract", out_to(t.path / "a")).report);
  // the same maps written to disk and read back through source = files
  SyntheticSpec s;
  s.n = 2;
  s.d = 2;
  s.r = 0.5;
  s.k = {4, 5};
  s.alpha = {1.0 / 16, 1.0 / 32};
  s.spacing = {1.0 / 128, 1.0 / 256};
  s.superposition = Superposition::complex_product;
  s.background = [](const double*, double* v) {
    v[0] = 0.0;
    v[1] = 1.0;
  };
  s.bubbles.push_back({chart_bubble(2), {{0.125, 0.0}, {0.125, 0.0}}, {1.0 / 16, 1.0 / 32}});
  const SequenceSpec spec = make_synthetic_sequence(s);
  write_map((t.path / "u_4.map").string(), spec.maps[0]);
  write_map((t.path / "u_5.map").string(), spec.maps[1]);
  write_map((t.path / "limit.map").string(), *spec.limit);
  const std::string path = t.file("f.ini",
                                  "[sequence]\nsource = files\nk = 4, 5\nmaps = u_{k}.map\nlimit = limit.map\n"
                                  "[thresholds]\neps_b_factor = 0.9\n");
  const Json b = Json::parse(run_experiment(Config::load(path), "extract", out_to(t.path / "b")).report);
  REQUIRE(b["extraction"]["generations"].size() == 1);
  CHECK(b["extraction"]["generations"] == a["extraction"]["generations"]);
  CHECK(b["extraction"]["E_total"] == a["extraction"]["E_total"]);
}

TEST_CASE("pool: every index runs once and the first error wins") {
  std::vector<int> hits(100, 0);
  parallel_for(hits.size(), 4, [&](std::size_t i) { hits[i] += 1; });
  CHECK(std::count(hits.begin(), hits.end(), 1) == 100);
  try {
    parallel_for(10, 3, [](std::size_t i) {
      if (i == 7 || i == 4) throw std::runtime_error("at " + std::to_string(i));
    });
    FAIL("expected an exception");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()) == "at 4");
  }
}
