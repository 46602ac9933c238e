#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "fkrig/analysis.hpp"
#include "fkrig/config.hpp"
#include "fkrig/io.hpp"
#include "fkrig/pipeline.hpp"

namespace fkrig {

// Command implementations behind the fkrig executable. Each writes its files
// under cfg.out_dir (resolved against the config directory) and returns what
// it wrote for programmatic use.

struct GeneratedData {
  FunctionalDataset data;  // truncated profiles
  RegularData truth;       // full grid before truncation
  CorrParams xi;
};

// Samples mean + sigma L_X Z L_t' on a regular grid, then keeps a leading
// fraction U(keep_lo, keep_hi) of each run's grid.
GeneratedData generate_data(const ProjectConfig& cfg);
GeneratedData cmd_generate(const ProjectConfig& cfg);

std::filesystem::path out_path(const ProjectConfig& cfg, const std::string& name);

FunctionalDataset load_dataset(const ProjectConfig& cfg);
PipelineOptions pipeline_options(const ProjectConfig& cfg, const Design& design);

std::string fit_report(const PipelineResult& r, const FunctionalDataset& data);

struct FitOutput {
  PipelineResult result;
  std::string report;
};
FitOutput cmd_fit(const ProjectConfig& cfg);

// rows x 3 matrix of y_hat, lo, hi for query rows (x..., t).
MatrixXd predict_rows(const KrigingModel& model, const MatrixXd& query, double kappa);
MatrixXd cmd_predict(const std::filesystem::path& model, const std::filesystem::path& query,
                     double kappa, const std::filesystem::path& output);

struct ValidateOutput {
  std::vector<Index> probes;  // 0-based
  double mscv_em = 0.0;
  double mscv_common = 0.0;
  std::vector<double> per_probe_em;
  std::vector<double> per_probe_common;
};
// Probes default to six runs spread over the dataset.
std::vector<Index> default_probes(Index n);
ValidateOutput cmd_validate(const ProjectConfig& cfg);

// Box from bound.<name> keys, falling back to each variable's range.
std::pair<VectorXd, VectorXd> optimize_bounds(const ProjectConfig& cfg, const Design& design);
OptimOptions optimize_options(const ProjectConfig& cfg, const Design& design);
OptimResult cmd_optimize(const ProjectConfig& cfg, const std::filesystem::path& model);

std::vector<EffectCurve> cmd_sensitivity(const ProjectConfig& cfg, const std::filesystem::path& model);

struct BenchRow {
  Index n = 0;
  Index m = 0;
  std::string path;  // dense, kronecker, closed_form
  double median_seconds = 0.0;
  double value = 0.0;
};
struct BenchOutput {
  std::vector<BenchRow> rows;  // empty when bench.reps = 0
  double max_disagreement = 0.0;  // largest |value - dense value| over sizes
};
BenchOutput run_benchmark(const ProjectConfig& cfg);
BenchOutput cmd_benchmark(const ProjectConfig& cfg);

}  // namespace fkrig
