#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "pobs_sl/cli/commands.hpp"
#include "pobs_sl/cli/config.hpp"

namespace {

struct Flags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
  std::optional<std::string> out, data, model, truth;
  std::optional<double> tau;
  bool print_config = false;
};

pobs_sl::cli::RunConfig resolve(const Flags& f) {
  using namespace pobs_sl;
  cli::RunConfig c = f.config_path.empty() ? cli::parse_config("{}") : cli::parse_config(io::read_file(f.config_path));
  if (f.seed) {
    c.seed = *f.seed;
    c.simulation.seed = *f.seed;
  }
  if (f.threads) {
    if (*f.threads < 1) throw Error(ErrorCode::Schema, "cli", "--threads must be at least 1");
    c.threads = *f.threads;
    c.audit.threads = *f.threads;
  }
  // Output directory: flag, then environment, then config.
  if (f.out) {
    c.out = *f.out;
  } else if (const char* env = std::getenv("POBS_SL_OUT"); env && *env) {
    c.out = env;
  }
  if (f.data) c.data = f.data;
  if (f.model) c.model = f.model;
  if (f.truth) c.truth = f.truth;
  if (f.tau) {
    if (!(*f.tau > 0.0)) throw Error(ErrorCode::Schema, "cli", "--tau must be positive");
    c.tau = f.tau;
  }
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pseudo-observation super learner for restricted mean survival time"};
  app.require_subcommand(1);
  Flags flags;
  app.add_option("--config", flags.config_path, "JSON run configuration");
  app.add_option("--seed", flags.seed, "Random seed (overrides the config)");
  app.add_option("--threads", flags.threads, "Worker threads; outputs do not depend on it");
  app.add_option("--out", flags.out, "Output directory (overrides POBS_SL_OUT and the config)");
  app.add_option("--data", flags.data, "Input CSV with columns time, event, z1..zd");
  app.add_option("--model", flags.model, "Model JSON written by fit");
  app.add_option("--truth", flags.truth, "truth.json written by simulate (evaluate)");
  app.add_option("--tau", flags.tau, "Time horizon (default: quantile of observed times)");
  app.add_flag("--print-config", flags.print_config, "Print the effective configuration and exit");

  const std::vector<std::pair<std::string, std::string>> commands = {
      {"simulate", "Draw a censored dataset from a simulation scheme"},
      {"pobs", "Compute standard or split pseudo-observations"},
      {"fit", "Fit the super learner"},
      {"predict", "Predict restricted mean survival time from a fitted model"},
      {"evaluate", "Weighted residual sum of squares and latent-truth risks"},
      {"audit", "Monte Carlo audit of the finite-sample oracle bound"},
      {"bench", "Time the pseudo-observation routes and a super-learner fit"},
  };
  for (const auto& [name, help] : commands) app.add_subcommand(name, help)->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    const auto cfg = resolve(flags);
    if (flags.print_config) {
      std::cout << pobs_sl::cli::config_json(cfg).dump(2) << "\n";
      return 0;
    }
    const std::string cmd = app.get_subcommands().front()->get_name();
    if (cmd == "simulate") pobs_sl::cli::cmd_simulate(cfg);
    else if (cmd == "pobs") pobs_sl::cli::cmd_pobs(cfg);
    else if (cmd == "fit") pobs_sl::cli::cmd_fit(cfg);
    else if (cmd == "predict") pobs_sl::cli::cmd_predict(cfg);
    else if (cmd == "evaluate") pobs_sl::cli::cmd_evaluate(cfg);
    else if (cmd == "audit") pobs_sl::cli::cmd_audit(cfg);
    else if (cmd == "bench") pobs_sl::cli::cmd_bench(cfg);
    return 0;
  } catch (const pobs_sl::Error& e) {
    std::cerr << "error " << e.qualified_code() << ": " << e.what() << "\n";
    return pobs_sl::exit_status(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error internal: " << e.what() << "\n";
    return 1;
  }
}
