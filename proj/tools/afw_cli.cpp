#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "afw/experiment.hpp"
#include "afw/selftest.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Frank-Wolfe / accelerated Frank-Wolfe experiment runner"};
  app.require_subcommand(1);

  bool quiet = false;
  app.add_flag("--quiet,-q", quiet, "suppress progress output")->configurable(false);

  auto* run = app.add_subcommand("run", "run the algorithms of an experiment config");
  std::string config_path;
  std::optional<std::string> output_dir;
  std::optional<std::uint64_t> seed;
  run->add_option("--config,-c", config_path, "experiment config (JSON)")->required();
  run->add_option("--output,-o", output_dir, "output directory (overrides the config)");
  run->add_option("--seed", seed, "seed (overrides the config)");
  run->add_flag("--quiet,-q", quiet, "suppress progress output");

  auto* compare = app.add_subcommand("compare", "compare two or more trace files");
  std::vector<std::string> traces;
  std::optional<double> f_star;
  std::optional<std::string> summary;
  std::optional<std::string> json_out;
  double tolerance = 1e-4;
  compare->add_option("traces", traces, "trace CSV files")->required()->expected(2, -1);
  compare->add_option("--fstar", f_star, "optimal value");
  compare->add_option("--summary", summary, "read the optimal value from a run summary");
  compare->add_option("--tol", tolerance, "gap tolerance for iterations-to-tolerance");
  compare->add_option("--json", json_out, "also write the comparison as JSON");
  compare->add_flag("--quiet,-q", quiet, "suppress the text table");

  auto* selftest = app.add_subcommand("selftest", "run the built-in invariant suite");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : afw::exit_code::kConfig;
  }

  if (*run) {
    afw::RunOverrides overrides;
    overrides.seed = seed;
    overrides.output_dir = output_dir;
    overrides.quiet = quiet;
    return afw::cmd_run(std::filesystem::path(config_path), overrides, std::cout, std::cerr);
  }
  if (*compare) {
    afw::CompareOptions opts;
    for (const auto& t : traces) opts.traces.emplace_back(t);
    opts.f_star = f_star;
    if (summary) opts.summary = *summary;
    if (json_out) opts.json_out = *json_out;
    opts.tolerance = tolerance;
    opts.quiet = quiet;
    return afw::cmd_compare(opts, std::cout, std::cerr);
  }
  if (*selftest) return afw::cmd_selftest(std::cout);
  return afw::exit_code::kFailure;
}
