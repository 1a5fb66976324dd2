#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "unideal/config.hpp"
#include "unideal/errors.hpp"
#include "unideal/log.hpp"
#include "unideal/runner.hpp"

namespace {

// "a..b" (inclusive) -> [a, ..., b].
std::vector<std::uint64_t> parse_seed_range(const std::string& spec) {
  const auto at = spec.find("..");
  if (at == std::string::npos) {
    throw unideal::ConfigError("--seeds expects a range like 0..9");
  }
  const std::uint64_t lo = std::stoull(spec.substr(0, at));
  const std::uint64_t hi = std::stoull(spec.substr(at + 2));
  if (hi < lo) {
    throw unideal::ConfigError("--seeds range is empty");
  }
  std::vector<std::uint64_t> seeds;
  for (std::uint64_t s = lo; s <= hi; ++s) seeds.push_back(s);
  return seeds;
}

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto comma = s.find(',', start);
    if (comma == std::string::npos) {
      out.push_back(s.substr(start));
      break;
    }
    out.push_back(s.substr(start, comma - start));
    start = comma + 1;
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"unideal: head-only federated learning simulator"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "run the experiment suite from a config file");
  std::string config_path;
  std::string out_dir;
  std::string seeds_spec;
  std::string methods_spec;
  run->add_option("config", config_path, "JSON experiment config")->required();
  run->add_option("--out", out_dir, "output directory (overrides the config)");
  run->add_option("--seeds", seeds_spec, "inclusive seed range a..b (overrides the config)");
  run->add_option("--methods", methods_spec, "comma-separated methods (overrides the config)");

  CLI11_PARSE(app, argc, argv);

  try {
    auto cfg = unideal::parse_config(config_path);
    if (!out_dir.empty()) cfg.output_dir = out_dir;
    if (!seeds_spec.empty()) cfg.seeds = parse_seed_range(seeds_spec);
    if (!methods_spec.empty()) cfg.methods = split_commas(methods_spec);
    // Overrides go through the same validation as the file.
    cfg = unideal::parse_config_text(unideal::serialize_config(cfg));

    unideal::log::info("running " + std::to_string(cfg.methods.size()) + " method(s) x " +
                       std::to_string(cfg.seeds.size()) + " seed(s) -> " + cfg.output_dir);
    const auto report = unideal::run_suite(cfg);
    std::cout << unideal::render_summary_table(report);
    if (!report.all_ok) {
      std::cerr << "some cells failed; see summary.csv\n";
      return 1;
    }
    return 0;
  } catch (const unideal::ConfigError& e) {
    std::cerr << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
