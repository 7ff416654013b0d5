#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "cli/config.hpp"
#include "cli/report.hpp"
#include "cli/tasks.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Markov random walk first-passage experiments"};
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> reps;
  std::optional<unsigned> workers;
  std::optional<std::string> out, format;
  bool validate_only = false;
  app.add_option("--config", config, "experiment config (YAML)")->required();
  app.add_option("--seed", seed, "override the master seed");
  app.add_option("--reps", reps, "override the replication count")->check(CLI::PositiveNumber);
  app.add_option("--workers", workers, "worker threads")->check(CLI::PositiveNumber);
  app.add_option("--out", out, "report path (default: stdout)");
  app.add_option("--format", format, "report format")->check(CLI::IsMember({"csv", "json"}));
  app.add_flag("--validate-only", validate_only, "check the config and exit");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  auto parsed = mrw::cli::load_config(config);
  if (!parsed.config) {
    for (const auto& d : parsed.diagnostics) std::cerr << mrw::cli::format_diagnostic(d, config) << "\n";
    std::cerr << parsed.diagnostics.size() << " error(s)\n";
    return 1;
  }
  auto cfg = std::move(*parsed.config);
  if (validate_only) {
    std::cout << "ok\n";
    return 0;
  }
  if (seed) cfg.seed = *seed;
  if (reps) cfg.reps = *reps;
  if (workers) cfg.workers = *workers;
  if (out) cfg.out_path = *out;
  if (format) cfg.format = *format == "csv" ? mrw::cli::Format::csv : mrw::cli::Format::json;

  try {
    const auto report = mrw::cli::run_experiment(cfg);
    const auto text = mrw::cli::render(report, cfg.format);
    if (cfg.out_path.empty())
      std::cout << text;
    else
      mrw::cli::write_atomic(cfg.out_path, text);
    for (const auto& w : report.warnings) std::cerr << "warning: " << w << "\n";
    return report.warnings.empty() ? 0 : 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
