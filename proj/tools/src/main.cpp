#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "btlab_cli/experiments.hpp"

int main(int argc, char** argv) {
  CLI::App app{"btlab: bubble-tree experiment runner"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  int jobs = 1;

  auto add_flags = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "experiment config file")->required();
    sub->add_option("--out", out_dir, "output directory (default: [output] dir, else .)");
    sub->add_option("--seed", seed, "seed for randomized inits (default: [experiment] seed)");
    sub->add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);
  };
  for (const std::string& kind : btlab::cli::experiment_kinds()) add_flags(app.add_subcommand(kind, "run the " + kind + " experiment"));
  add_flags(app.add_subcommand("run", "run the experiment named by [experiment] kind"));

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }

  CLI::App* sub = app.get_subcommands().front();
  btlab::cli::Overrides o;
  if (sub->count("--seed")) o.seed = seed;
  if (sub->count("--jobs")) o.jobs = jobs;
  if (sub->count("--out")) o.out_dir = out_dir;
  const std::string kind = sub->get_name() == "run" ? std::string() : sub->get_name();
  return btlab::cli::run(kind, config_path, o, std::cout, std::cerr);
}
