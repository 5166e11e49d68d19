#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "commands.hpp"
#include "stochastica/errors.hpp"
#include "stochastica/parallel.hpp"

namespace {

constexpr int kValidation = 2;
constexpr int kNumerical = 3;

}  // namespace

int main(int argc, char** argv) {
  using namespace stochastica;
  CLI::App app{"Stochastic price models, densities, pricing and hedging"};
  app.require_subcommand(1);

  std::string config_path;
  std::uint64_t seed = 0;
  std::string out_path;
  std::string format;
  std::size_t threads = 0;

  auto add_globals = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON config file");
    sub->add_option("--seed", seed, "random seed (overrides the config)");
    sub->add_option("--out", out_path, "output file");
    sub->add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
    sub->add_option("--threads", threads, "worker threads (default: STOCHASTICA_THREADS or 1)")
        ->check(CLI::PositiveNumber);
  };

  using Command = int (*)(const cli::Options&, std::ostream&);
  const std::pair<const char*, Command> commands[] = {
      {"simulate", cli::cmd_simulate}, {"density", cli::cmd_density}, {"price", cli::cmd_price},
      {"greeks", cli::cmd_greeks},     {"hedge", cli::cmd_hedge},     {"index", cli::cmd_index},
      {"check", cli::cmd_check}};
  const char* help[] = {"simulate paths and summarize terminal moments",
                        "transition density by analytic, fokker-planck and path-integral methods",
                        "present value by analytic, mc, pde, green or all methods",
                        "Black-Scholes price and greeks",
                        "delta hedge of one option or kappa/gamma neutralization",
                        "minimum-variance index weights",
                        "cross-method pricing agreement on a call grid"};
  Command selected = nullptr;
  for (std::size_t i = 0; i < std::size(commands); ++i) {
    CLI::App* sub = app.add_subcommand(commands[i].first, help[i]);
    add_globals(sub);
    sub->callback([&selected, cmd = commands[i].second] { selected = cmd; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kValidation;
  }

  try {
    cli::Options opts;
    if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) throw ValidationError("cannot read config file '" + config_path + "'");
      try {
        opts.config = nlohmann::json::parse(in);
      } catch (const nlohmann::json::exception& e) {
        throw ValidationError("config file '" + config_path + "' is not valid JSON: " + e.what());
      }
    }
    for (const auto* sub : app.get_subcommands()) {
      if (sub->count("--seed")) opts.seed = seed;
    }
    if (!out_path.empty()) opts.out = out_path;
    if (format == "csv") opts.format = cli::Format::csv;
    if (format == "json") opts.format = cli::Format::json;
    opts.threads = threads > 0 ? threads : default_threads();
    return selected(opts, std::cout);
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << '\n';
    return kValidation;
  } catch (const DomainError& e) {
    std::cerr << "validation error: " << e.what() << '\n';
    return kValidation;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kNumerical;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "validation error: " << e.what() << '\n';
    return kValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
