#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>

#include "CLI11.hpp"
#include "nmc/config.hpp"
#include "nmc/runner.hpp"

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw nmc::InvalidInput("cannot open config file: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

constexpr std::pair<const char*, const char*> kCommands[] = {
    {"simulate-forward", "sample constrained forward paths and dump them as CSV"},
    {"solve-bsde", "regress the backward equation along simulated paths"},
    {"evaluate-field", "estimate the solution field at configured points"},
    {"study-forward-convergence", "penalized-to-reflected pathwise convergence study"},
    {"study-field-convergence", "field convergence study across penalization levels"},
    {"study-moment-uniformity", "uniform-in-n moment bound study"},
    {"study-initial-continuity", "continuity of the field in the initial data"},
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Monte Carlo solver for diffusions confined to convex domains and the "
      "boundary-coupled backward equations giving their solution fields"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  std::uint64_t seed = 0;
  int workers = 0;
  for (const auto& [name, help] : kCommands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "JSON run description")->required();
    sub->add_option("--seed", seed, "override the ensemble seed");
    sub->add_option("--workers", workers, "worker threads (default: all cores)");
    sub->add_option("--out", out_dir,
                    "output directory (default: $NEUMANN_MC_OUT, then the current directory)");
  }
  CLI11_PARSE(app, argc, argv);

  try {
    CLI::App* sub = app.get_subcommands().front();
    nmc::RunConfig cfg = nmc::parse_config(read_file(config_path));
    const nmc::Command cmd = nmc::command_from_name(sub->get_name());
    if (cfg.command_explicit && cfg.command != cmd) {
      std::fprintf(stderr, "error: config names command %s but %s was invoked\n",
                   nmc::command_name(cfg.command).c_str(), sub->get_name().c_str());
      return 2;
    }
    cfg.command = cmd;
    if (sub->count("--seed") > 0) cfg.ensemble.seed = seed;
    if (sub->count("--workers") > 0) cfg.workers = workers;
    if (sub->count("--out") > 0) cfg.out_dir = out_dir;
    if (cfg.out_dir.empty()) {
      const char* env = std::getenv("NEUMANN_MC_OUT");
      cfg.out_dir = (env != nullptr && *env != '\0') ? env : ".";
    }
    // Re-validate under the final command so its defaults and requirements apply.
    cfg = nmc::parse_config(nmc::serialize_config(cfg));
    return nmc::run(cfg);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}
