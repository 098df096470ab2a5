// dualbound: run bound sweeps, validate configs, emit plot data.
//
// Exit codes: 0 success, 2 invalid input, 3 some rows failed.

#include <cstdio>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "dualbound/experiment.hpp"

namespace ex = dualbound::experiment;

namespace {

constexpr int kOk = 0;
constexpr int kInvalid = 2;
constexpr int kPartial = 3;

int run(const std::string& path, bool force_oracle) {
  ex::ExperimentConfig cfg = ex::load_config(path);
  if (force_oracle) {
    cfg.oracle_check = true;
    ex::validate(cfg);
  }
  const ex::RunSummary s = ex::run_experiment(cfg);
  std::printf("%d rows written to %s (%d failed)\n", s.rows, s.csv_path.c_str(), s.failed_rows);
  return s.failed_rows > 0 ? kPartial : kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Certified lower bounds on noisy circuit output energies"};
  app.require_subcommand(1);

  std::string config_path;
  auto* run_cmd = app.add_subcommand("run", "Run the sweep described by a config file");
  run_cmd->add_option("config", config_path, "YAML config")->required();

  auto* oracle_cmd = app.add_subcommand("oracle-check", "Run a small config and check every bound against exact values");
  oracle_cmd->add_option("config", config_path, "YAML config")->required();

  auto* validate_cmd = app.add_subcommand("validate", "Check a config without running it");
  validate_cmd->add_option("config", config_path, "YAML config")->required();

  std::string csv_path, template_name, out_dir;
  std::optional<double> ground;
  auto* plot_cmd = app.add_subcommand("plot", "Write plot-ready data from a results CSV");
  plot_cmd->add_option("csv", csv_path, "results CSV")->required();
  plot_cmd->add_option("--template", template_name, "bound_vs_depth | bound_vs_p_theta_heatmap | fermion_vs_depth")
      ->required();
  plot_cmd->add_option("--out", out_dir, "output directory (default: <csv>.plot)");
  plot_cmd->add_option("--ground-energy", ground, "flag bounds at or below this energy as trivial");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInvalid;
  }

  try {
    if (*run_cmd) return run(config_path, false);
    if (*oracle_cmd) return run(config_path, true);
    if (*validate_cmd) {
      const auto cfg = ex::load_config(config_path);
      std::printf("ok: %zu grid points, digest %s\n", ex::grid_points(cfg).size(), ex::config_digest(cfg).c_str());
      return kOk;
    }
    if (*plot_cmd) {
      const auto files = ex::emit_plotdata(csv_path, ex::parse_template(template_name),
                                           out_dir.empty() ? csv_path + ".plot" : out_dir, ground);
      std::printf("%zu series written, caption %s\n", files.series.size(), files.caption.c_str());
      return kOk;
    }
  } catch (const ex::ConfigError& e) {
    std::fprintf(stderr, "invalid config at %s\n", e.what());
    return kInvalid;
  } catch (const dualbound::DomainError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kInvalid;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kPartial;
  }
  return kOk;
}
