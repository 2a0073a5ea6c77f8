#pragma once

#include <emuval/report.hpp>

#include <CLI11.hpp>

#include <cstdint>
#include <functional>
#include <string>

namespace emuval::cli {

using report::Json;

/// Values shared by every subcommand.
struct Common {
  std::uint64_t seed = 0;
};

/// A registered subcommand: parse-time state lives in the closure, `run`
/// produces the "config" and "result" members of the output document.
struct Command {
  CLI::App* app = nullptr;
  std::function<Json(const Common&, Json& config)> run;
};

Command add_local(CLI::App& parent);
Command add_global(CLI::App& parent);
Command add_mc_gof(CLI::App& parent);
Command add_diagnose(CLI::App& parent);
Command add_fit(CLI::App& parent);
Command add_kl(CLI::App& parent);
Command add_power(CLI::App& parent);
Command add_experiment(CLI::App& parent);
Command add_simulate(CLI::App& parent);

}  // namespace emuval::cli
