#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "dualbound/errors.hpp"
#include "dualbound/report.hpp"

namespace dualbound::experiment {

enum class Family { brickwall_1d, brickwall_2d, clifford, single_qubit, ssh_1d, ssh_2d };
enum class NoiseKind { depolarizing, replacement };

std::string family_name(Family f);
std::string noise_kind_name(NoiseKind k);

// A sweep over depth x p x theta. `ansatz` lists bond caps D for the MPO
// methods and interaction ranges r for fermion_dual.
struct ExperimentConfig {
  int schema = 1;
  std::string name;
  std::uint64_t seed = 0;

  Family family = Family::brickwall_1d;
  int n = 0;           // chain length (1-D families)
  int lx = 0, ly = 0;  // 2-D families
  std::vector<int> depths;
  std::vector<double> thetas{0.0};
  double delta = 1.0;  // single_qubit: H = delta Z

  NoiseKind noise = NoiseKind::depolarizing;
  std::vector<double> ps;  // p, or q for replacement noise
  double epsilon = 0.0;    // replacement tau = I/2 + epsilon Z

  std::vector<BoundMethod> methods;
  std::vector<long> ansatz;
  int refine_iters = 0;
  int fermion_iters = 200;
  double lambda_c = 0.0;  // 0 selects the default cutoff

  std::string output;
  bool oracle_check = false;
  bool record_timing = true;

  int n_sites() const;
  bool operator==(const ExperimentConfig&) const = default;
};

// Validation failure located at a dotted field path, e.g. "noise.p[2]".
class ConfigError : public DomainError {
 public:
  ConfigError(std::string field, const std::string& message);
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

// Parses YAML text; throws ConfigError for missing or mistyped fields and
// for anything `validate` rejects.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::string& path);
std::string serialize_config(const ExperimentConfig& config);
void validate(const ExperimentConfig& config);

// 64-bit FNV-1a of the serialized config, as 16 hex digits.
std::string config_digest(const ExperimentConfig& config);

struct GridPoint {
  int index = 0;
  int depth = 0;
  double p = 0.0;
  double theta = 0.0;
  std::uint64_t seed = 0;  // circuit seed, keyed by (master seed, index)
};

std::vector<GridPoint> grid_points(const ExperimentConfig& config);

struct ResultRow {
  BoundReport report;
  double p = 0.0;
  double theta = 0.0;
  bool failed = false;
  std::string error;
};

// All rows of one grid point, in method order then ansatz order. Failures
// are caught per method and returned as failed rows.
std::vector<ResultRow> evaluate_point(const ExperimentConfig& config, const GridPoint& point);

std::string csv_header();
std::string csv_row(const ResultRow& row, bool record_timing = true);
std::string json_record(const ResultRow& row, bool record_timing = true);

struct RunSummary {
  int rows = 0;
  int failed_rows = 0;
  std::string csv_path;
  std::string jsonl_path;
};

// Number of workers from DUALBOUND_WORKERS (default 1).
int worker_count_from_env();

// Writes `config.output` (CSV) and `config.output + ".jsonl"` incrementally
// in grid order. workers <= 0 reads the environment.
RunSummary run_experiment(const ExperimentConfig& config, int workers = 0);

// Throws DomainError when the header differs from csv_header().
std::vector<ResultRow> read_csv(const std::string& path);

enum class PlotTemplate { bound_vs_depth, bound_vs_p_theta_heatmap, fermion_vs_depth };
PlotTemplate parse_template(const std::string& name);
std::string template_name(PlotTemplate t);

struct PlotFiles {
  std::vector<std::string> series;  // data files
  std::string caption;              // JSON sidecar
};

// Writes plot-ready whitespace-delimited files into out_dir. With a ground
// energy, points at or below it are flagged trivial in an extra column and
// in the sidecar; values are never clipped.
PlotFiles emit_plotdata(const std::string& csv_path, PlotTemplate t, const std::string& out_dir,
                        std::optional<double> ground_energy = std::nullopt);

}  // namespace dualbound::experiment
