#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "blab/cli.hpp"

namespace {

struct Flags {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> format;
  std::optional<unsigned> threads;
  bool verify = false;
};

unsigned threads_from_env() {
  const char* env = std::getenv("BLAB_THREADS");
  if (!env || !*env) return 1;
  try {
    std::size_t pos = 0;
    const long v = std::stol(env, &pos);
    if (pos != std::string(env).size() || v < 0) throw std::invalid_argument(env);
    return static_cast<unsigned>(v);
  } catch (const std::exception&) {
    throw blab::ValidationError(std::string("BLAB_THREADS: not a non-negative integer '") + env + "'");
  }
}

blab::cli::RunConfig build_config(blab::cli::Command command, const Flags& f) {
  using namespace blab;
  const io::json j = f.config_path.empty() ? io::json::object()
                                           : io::parse_json(io::read_file(f.config_path), f.config_path);
  auto cfg = cli::parse_config(j, command);
  if (f.seed) cfg.master_seed = *f.seed;
  if (f.out) cfg.output_path = *f.out;
  if (f.format) cfg.format = cli::format_from_string(*f.format, "--format");
  cfg.threads = f.threads ? *f.threads : threads_from_env();
  cfg.verify = f.verify;
  return cfg;
}

int run(blab::cli::Command command, const Flags& flags) {
  using namespace blab;
  const auto cfg = build_config(command, flags);
  const std::string text = cli::render(cfg);
  if (cfg.verify) {
    const std::string again = cli::render(cfg);
    if (again != text) {
      std::cerr << "verify: re-run differs (config_hash " << cli::config_hash(cfg) << ")\n";
      return cli::kVerifyMismatch;
    }
    std::cerr << "verify: ok (config_hash " << cli::config_hash(cfg) << ")\n";
  }
  if (cfg.output_path.empty()) {
    std::cout << text;
  } else {
    std::ofstream out(cfg.output_path, std::ios::binary);
    if (!out) throw ValidationError("cannot write '" + cfg.output_path + "'");
    out << text;
  }
  return cli::kOk;
}

}  // namespace

int main(int argc, char** argv) {
  using blab::cli::Command;
  CLI::App app{"Symmetric information bottleneck solvers, finite-sample bounds and Monte Carlo audits"};
  app.set_version_flag("--version", blab::cli::kVersion);
  app.require_subcommand(1);

  Flags flags;
  const std::pair<Command, const char*> commands[] = {
      {Command::solve, "Solve a bottleneck problem on a joint distribution"},
      {Command::bounds, "Evaluate the closed-form finite-sample bounds"},
      {Command::predict, "Leading-order bias and MSE predictions for fixed encoders"},
      {Command::experiment, "Monte Carlo trials of the plug-in loss terms"},
      {Command::compare, "Symmetric versus two independent bottlenecks: loss bias"},
      {Command::sweep, "Experiment grid over sample sizes and cardinalities (CSV)"},
  };
  std::optional<Command> chosen;
  for (const auto& [cmd, help] : commands) {
    auto* sub = app.add_subcommand(blab::cli::to_string(cmd), help);
    sub->add_option("--config", flags.config_path, "JSON run configuration")->check(CLI::ExistingFile);
    sub->add_option("--seed", flags.seed, "Master seed (overrides the config)");
    sub->add_option("--out", flags.out, "Output file (default stdout)");
    sub->add_option("--format", flags.format, "Output format")->check(CLI::IsMember({"csv", "json"}));
    sub->add_option("--threads", flags.threads, "Worker threads, 0 = auto (fallback: BLAB_THREADS)");
    sub->add_flag("--verify", flags.verify, "Re-run and check the output is byte-identical");
    sub->callback([&chosen, c = cmd] { chosen = c; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : blab::cli::kValidation;
  }

  try {
    return run(*chosen, flags);
  } catch (const blab::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return blab::cli::kValidation;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return blab::cli::kNumerical;
  }
}
