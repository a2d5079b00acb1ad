#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mgdl/data.hpp"
#include "mgdl/multigrade.hpp"
#include "mgdl/network.hpp"

namespace mgdl {

inline constexpr int kConfigSchemaVersion = 1;
inline constexpr const char* kOutputDirEnv = "MULTIGRADE_OUT_DIR";

struct BaselineConfig {
  std::vector<LayerSpec> layers;
  TrainParams train;
};

struct ExperimentConfig {
  std::string name = "experiment";
  TargetFunction target = TargetFunction::Sin100;
  bool noisy = false;
  std::uint64_t seed = 1;
  DataOptions data;
  std::vector<GradeConfig> grades;
  StopRule stop;
  std::optional<BaselineConfig> baseline;
  std::string output_dir;
};

/// Parses and validates (including width chaining). Throws ConfigError or
/// ShapeError.
ExperimentConfig parse_experiment_config(const nlohmann::json& j);
ExperimentConfig load_experiment_config(const std::string& path);
nlohmann::json to_json(const ExperimentConfig& config);

/// Width chaining, final activations, schedules. Nothing is trained.
void validate_experiment_config(const ExperimentConfig& config);

struct MethodTotals {
  double train_seconds = 0.0;
  Metrics metrics;
};

struct ExperimentReport {
  std::string name;
  std::uint64_t seed = 0;
  TargetFunction target = TargetFunction::Sin100;
  bool noisy = false;

  std::vector<std::string> architecture;
  std::vector<GradeReport> grades;
  MethodTotals multigrade;
  std::optional<GradeReport> baseline_report;
  std::optional<MethodTotals> baseline;

  MultiGradeModel model{1, 1};
  std::optional<ShallowNet> baseline_net;

  Matrix test_x;
  Matrix test_y;
  /// prefix_predictions[i] = sum of the first i+1 grade contributions.
  std::vector<Matrix> prefix_predictions;
  std::optional<Matrix> baseline_predictions;

  /// max_k |y_k - fbar(x_k) - e_l(x_k)| over the training set.
  double telescoping_violation = 0.0;
  /// ||e_{i+1}|| <= ||e_i|| for every consecutive pair.
  bool monotone_residuals = true;
};

/// Data generation, multi-grade training, optional baseline, metrics. Writes
/// outputs to config.output_dir when it is non-empty.
ExperimentReport run_experiment(const ExperimentConfig& config,
                                const GradeObserver& observer = {});

/// metrics.json document.
nlohmann::json metrics_json(const ExperimentReport& report);

/// Writes metrics.json, loss_curves.csv, predictions.csv, model.json (and
/// baseline_model.json when a baseline ran). On failure an INCOMPLETE marker
/// is left in `dir` and IoError is thrown.
void emit_outputs(const ExperimentReport& report, const std::string& dir);

std::string loss_curves_csv(const ExperimentReport& report);
std::string predictions_csv(const ExperimentReport& report);

struct CompareResult {
  std::string table;
  nlohmann::json sidecar;
};

/// Mean, min and max of every method metric across metrics.json documents.
CompareResult compare_summary(const std::vector<nlohmann::json>& metrics);

}  // namespace mgdl
