#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "slfv/config.hpp"
#include "slfv/errors.hpp"
#include "slfv/runner.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kInvalid = 1;
constexpr int kRuntime = 2;

std::optional<unsigned long long> env_number(const char* name) {
  const char* v = std::getenv(name);
  if (!v || !*v) return std::nullopt;
  char* end = nullptr;
  const unsigned long long x = std::strtoull(v, &end, 10);
  if (*end != '\0') throw std::invalid_argument(std::string(name) + " is not a non-negative integer");
  return x;
}

void print_errors(const slfv::ConfigError& e) {
  std::cerr << "config invalid:\n";
  for (const auto& m : e.messages()) std::cerr << "  " << m << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spatial Lambda-Fleming-Viot simulator and experiment runner"};
  app.set_version_flag("--version", std::string(slfv::kVersion));
  app.require_subcommand(1);

  std::string config_path, out_dir, view;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  bool resume = false;
  std::optional<std::size_t> stop_after;
  std::size_t chunk = 64;

  auto* validate = app.add_subcommand("validate", "Parse and validate a config");
  validate->add_option("--config", config_path, "Experiment config file")->required();

  auto* run = app.add_subcommand("run", "Run an experiment into an artifact directory");
  run->add_option("--config", config_path, "Experiment config file")->required();
  run->add_option("--seed", seed, "Root seed (overrides SLFV_SEED and the config)");
  run->add_option("--threads", threads, "Worker threads, 0 for all cores (overrides SLFV_THREADS)");
  run->add_option("--out", out_dir, "Artifact directory (default: config 'out' or slfv-out)");
  run->add_flag("--resume", resume, "Continue an interrupted run in the same directory");
  run->add_option("--chunk", chunk, "Work units per flushed chunk")->check(CLI::PositiveNumber);
  run->add_option("--stop-after", stop_after)->group("");

  auto* plot = app.add_subcommand("plotdata", "Emit long-format CSV for plotting");
  plot->add_option("--out", out_dir, "Artifact directory")->required();
  plot->add_option("--view", view, "survival | ks-trend | block-count | merger-hist")->required();
  std::string plot_file;
  plot->add_option("--file", plot_file, "Write to this file instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kInvalid;
  }

  try {
    if (validate->parsed()) {
      const auto cfg = slfv::load_config(config_path);
      std::cout << "ok: " << slfv::to_string(cfg.kind);
      if (cfg.classification) std::cout << " (" << slfv::to_string(cfg.classification->kind) << ")";
      std::cout << '\n';
      return kOk;
    }
    if (run->parsed()) {
      const auto cfg = slfv::load_config(config_path);
      slfv::RunOptions opt;
      if (seed) {
        opt.seed = seed;
      } else if (auto s = env_number("SLFV_SEED")) {
        opt.seed = static_cast<std::uint64_t>(*s);
      }
      if (threads) {
        opt.threads = threads;
      } else if (auto t = env_number("SLFV_THREADS")) {
        opt.threads = static_cast<unsigned>(*t);
      }
      opt.out = !out_dir.empty() ? out_dir : cfg.out.value_or("slfv-out");
      opt.resume = resume;
      opt.chunk = chunk;
      opt.stop_after = stop_after;
      const auto outcome = slfv::run_experiment(cfg, opt);
      if (!outcome.complete) {
        std::cout << "stopped after " << outcome.units_done << " of " << outcome.units
                  << " units; rerun with --resume\n";
        return kOk;
      }
      std::cout << "wrote " << outcome.dir.string() << " (" << outcome.units << " units, "
                << outcome.timeouts << " timeouts)\n";
      return kOk;
    }
    if (plot->parsed()) {
      if (plot_file.empty()) {
        slfv::emit_plotdata(out_dir, view, std::cout);
      } else {
        std::ofstream f(plot_file);
        slfv::emit_plotdata(out_dir, view, f);
        if (!f) throw std::runtime_error("cannot write " + plot_file);
      }
      return kOk;
    }
  } catch (const slfv::ConfigError& e) {
    print_errors(e);
    return kInvalid;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kInvalid;
  } catch (const std::exception& e) {
    std::cerr << "runtime failure: " << e.what() << '\n';
    return kRuntime;
  }
  return kOk;
}
