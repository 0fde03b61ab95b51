#pragma once

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "mol/cli/commands.hpp"
#include "mol/cli/config.hpp"
#include "mol/core/errors.hpp"
#include "mol/data/io.hpp"

namespace mol::cli {

enum ExitCode : int { kOk = 0, kFailure = 1, kUsage = 2, kData = 3 };

inline std::shared_ptr<spdlog::logger> logger() {
  if (auto l = spdlog::get("mol")) return l;
  return spdlog::stderr_color_mt("mol");
}

// Writes through a temporary file so a failed run never leaves a partial file.
inline void write_atomically(const std::filesystem::path& path, const std::string& text) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary);
    if (!f) throw DataError("cannot write '" + path.string() + "'");
    f << text;
    if (!f) throw DataError("cannot write '" + path.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

struct Flags {
  std::string config;
  std::string data;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<double> alpha;
  std::string order;
  std::optional<unsigned> workers;
};

inline RunConfig resolve_config(const Flags& f) {
  RunConfig c = f.config.empty() ? RunConfig{} : run_config_from_json(read_json_file(f.config, false));
  if (f.config.empty()) c.rl.config.learner = learner_from_name(c.rl.learner, c.rl.config.regressor);
  if (!f.data.empty()) c.data = f.data;
  if (!f.out.empty()) c.out = f.out;
  if (f.seed) c.seed = *f.seed;
  if (f.alpha) {
    if (!(*f.alpha > 0 && *f.alpha < 1)) throw ConfigError("--alpha must be in (0, 1)");
    c.alpha = *f.alpha;
  }
  if (!f.order.empty()) c.order = OrderRange::parse(f.order);
  if (f.workers) c.workers = *f.workers;
  if (const char* env = std::getenv("MOL_LOG")) c.log = env;
  return c;
}

inline void set_level(const std::string& name) {
  const auto level = spdlog::level::from_str(name);
  if (level == spdlog::level::off && name != "off") throw ConfigError("unknown log level '" + name + "'");
  logger()->set_level(level);
}

// Entry point shared by the executable and the in-process tests. Tables go to
// `out`, diagnostics to the logger on stderr. The JSON report goes to --out
// when given, otherwise to `out` after the table.
inline int run_cli(const std::vector<std::string>& args, std::ostream& out = std::cout,
                   std::ostream& err = std::cerr) {
  CLI::App app{"Markov order testing, fitted-Q policy learning and off-policy evaluation", "mol"};
  app.require_subcommand(1);
  Flags flags;
  const std::vector<std::pair<std::string, std::string>> commands{
      {"simulate", "simulate an environment and write a dataset to --out"},
      {"test-markov", "test the Markov property at each order in --order"},
      {"select-order", "select the smallest order that is not rejected, up to --order"},
      {"fqi", "fitted Q-iteration; the report holds the greedy policy"},
      {"fqe", "fitted Q-evaluation of the configured policy"},
      {"ope-ci", "cross-fitted doubly robust value estimate with a Wald interval"},
      {"bench", "Monte Carlo rejection proportions of the Markov test"}};
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--config", flags.config, "JSON config file");
    sub->add_option("--data", flags.data, "dataset (.csv or .json)");
    sub->add_option("--out", flags.out, "output path");
    sub->add_option("--seed", flags.seed, "root seed");
    sub->add_option("--alpha", flags.alpha, "significance level");
    sub->add_option("--order", flags.order, "order k or range a..b");
    sub->add_option("--workers", flags.workers, "worker threads (0 = all cores)");
  }
  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    std::ostringstream msg, errs;
    const int code = app.exit(e, msg, errs);
    out << msg.str();
    err << errs.str();
    return code == 0 ? kOk : kUsage;
  }
  const std::string command = app.get_subcommands().front()->get_name();
  try {
    const RunConfig config = resolve_config(flags);
    set_level(config.log);
    const auto start = std::chrono::steady_clock::now();
    auto result = run_command(command, config);
    const std::string report = result.report.dump(2) + "\n";
    if (command == "simulate") {
      if (config.out.empty()) throw ConfigError("simulate needs --out");
      const std::filesystem::path path(config.out);
      const auto format = config.simulate.format == "json" ? DataFormat::json : DataFormat::csv;
      write_atomically(path, format == DataFormat::csv ? to_csv(*result.dataset) : to_json(*result.dataset).dump() + "\n");
      write_atomically(path.string() + ".meta.json", report);
      out << result.table;
    } else {
      out << result.table;
      if (config.out.empty()) {
        out << report;
      } else {
        write_atomically(config.out, report);
      }
    }
    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
    logger()->info("{} finished in {:.2f}s (seed {})", command, elapsed.count(), config.seed);
    return kOk;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kUsage;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kData;
  } catch (const std::invalid_argument& e) {
    err << "invalid input: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kFailure;
  }
}

}  // namespace mol::cli
