#include "commands.hpp"

#include <emuval/errors.hpp>
#include <emuval/globaltest.hpp>
#include <emuval/parallel.hpp>
#include <emuval/rng.hpp>

#include <iostream>
#include <vector>

namespace {

int fail(int code, const std::string& message) {
  std::cerr << "emuval: " << message << '\n';
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  using namespace emuval;
  CLI::App app{"Validate emulators and approximate likelihoods with regression two-sample tests"};
  app.name("emuval");
  app.require_subcommand(1);
  app.fallthrough();
  app.set_config("--config", "", "TOML-style config file; [subcommand] sections, flags override it");

  std::uint64_t seed = 0;
  std::size_t threads = 0;
  auto* seed_opt = app.add_option("--seed", seed, "Random seed (default: drawn from OS entropy and printed)");
  app.add_option("--threads", threads, "Worker threads (default: $EMUVAL_THREADS or all cores)");

  std::vector<cli::Command> commands{
      cli::add_local(app),    cli::add_global(app), cli::add_mc_gof(app),
      cli::add_diagnose(app), cli::add_fit(app),    cli::add_kl(app),
      cli::add_power(app),    cli::add_experiment(app), cli::add_simulate(app)};

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (threads > 0) set_thread_count(threads);
  cli::Common common;
  if (seed_opt->count() > 0) {
    common.seed = seed;
  } else {
    common.seed = entropy_seed();
    std::cerr << "emuval: seed " << common.seed << '\n';
  }

  for (const auto& command : commands) {
    if (!command.app->parsed()) continue;
    try {
      cli::Json config = cli::Json::object();
      cli::Json result = command.run(common, config);
      cli::Json doc;
      doc["command"] = command.app->get_name();
      doc["config"] = std::move(config);
      doc["result"] = std::move(result);
      std::cout << doc.dump(2) << '\n';
      return 0;
    } catch (const global::GlobalTestFailure& e) {
      std::cerr << report::to_json(e.partial).dump() << '\n';
      return fail(e.invalid_input ? 2 : 1, e.what());
    } catch (const InvalidInput& e) {
      return fail(2, e.what());
    } catch (const std::exception& e) {
      return fail(1, e.what());
    }
  }
  return fail(1, "no subcommand ran");
}
