#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "mgdl/data.hpp"
#include "mgdl/network.hpp"
#include "mgdl/optim.hpp"

namespace mgdl {

/// Optimizer schedule for one training run (a grade or the baseline).
struct TrainParams {
  double lr0 = 0.01;
  std::size_t epochs = 1;
  double decay = 0.01;
  std::size_t batch_size = 32;
  DecayUnit decay_unit = DecayUnit::PerStep;

  AdamConfig adam() const;
  void validate() const;
};

struct GradeConfig {
  std::vector<LayerSpec> layers;
  TrainParams train;
  /// One entry per layer; empty means no regularization.
  std::vector<double> l1_lambdas;
  /// Whether this grade's output layer is dropped when it joins the stack.
  bool strip_output_layer = true;
};

/// Residuals e_i(x_k), one column per training sample. Grade 0 holds y.
struct ResidualSet {
  std::size_t grade = 0;
  Matrix values;
  /// sum ||y_k||^2 of the original targets, carried along for rse.
  double target_energy = 0.0;

  static ResidualSet from_targets(const Matrix& y);
};

struct GradeReport {
  std::size_t grade = 0;  // 0 for the single-grade baseline
  double learning_rate = 0.0;
  std::size_t epochs = 0;
  std::int64_t steps = 0;
  double train_seconds = 0.0;
  /// Loss of the selected checkpoint (mse, or cross-entropy when classifying).
  double final_loss = 0.0;
  double mse_train = 0.0;
  std::optional<double> rse_train;
  /// Full training-set loss after each epoch; entry 0 is before any step.
  std::vector<double> loss_curve;
  /// Validation loss at the same points (empty if no validation data).
  std::vector<double> validation_curve;
  std::size_t best_epoch = 0;
  /// The epoch-0 checkpoint (zero output layer) was kept.
  bool zero_fallback = false;
  double residual_norm_before = 0.0;
  double residual_norm_after = 0.0;
  /// ||e_i||^2 - ||f_{i+1}||^2 - ||e_{i+1}||^2, logged but never enforced.
  double pythagorean_slack = 0.0;
  /// The selected network is not identically zero on the training inputs.
  bool nontrivial = false;
};

struct StopRule {
  std::size_t max_grades = 1;
  /// Stop once posterior_error(residuals) <= tolerance.
  std::optional<double> tolerance;
};

struct GradeOutcome {
  GradeRecord record;
  ResidualSet residuals;
  GradeReport report;
};

/// Root of the summed squared residuals.
double posterior_error(const ResidualSet& residuals);

/// Hidden layers: uniform on +-sqrt(6/(fan_in+fan_out)), zero bias.
/// Final layer: all zeros.
ShallowNet initialize_grade_net(const std::vector<LayerSpec>& layers,
                                std::uint64_t seed);

/// Checks widths, final identity activation, lambdas and schedule.
void validate_grade_config(const GradeConfig& config, std::size_t in_width,
                           std::size_t out_width, std::size_t grade);

/// Trains one grade on the residuals of the previous one.
///
/// `train_x` are the raw inputs (s x N). The stack output is evaluated once
/// and held fixed. The best full-data checkpoint over epochs 0..E is kept,
/// so the new residual norm never exceeds the incoming one.
GradeOutcome train_grade(const FrozenStack& stack, const Matrix& train_x,
                         const ResidualSet& residuals,
                         const GradeConfig& config, std::uint64_t seed,
                         std::size_t grade = 1);

enum class TrainEvent { BeforeGrade, AfterGrade };

/// Called around each grade with the model as it stands.
using GradeObserver =
    std::function<void(TrainEvent, std::size_t grade, const MultiGradeModel&)>;

struct MultiGradeRun {
  MultiGradeModel model;
  std::vector<GradeReport> reports;
  /// residuals[i] = e_i on the training set; residuals[0] = y.
  std::vector<ResidualSet> residuals;
};

MultiGradeRun run_multigrade(const std::vector<GradeConfig>& grades,
                             const Dataset& data, const StopRule& stop,
                             std::uint64_t seed,
                             const GradeObserver& observer = {});

struct SingleGradeRun {
  ShallowNet net;
  GradeReport report;
};

/// Trains the whole network jointly with the same Adam machinery and
/// initialization scheme as a grade.
SingleGradeRun run_singlegrade(const std::vector<LayerSpec>& arch,
                               const Dataset& data, const TrainParams& params,
                               std::uint64_t seed);

struct LabeledSamples {
  Matrix x;                          // s x N
  std::vector<std::size_t> labels;   // zero-based
  std::size_t classes = 2;
};

struct ClassificationRun {
  MultiGradeModel model;
  std::vector<GradeReport> reports;   // loss = cross-entropy
  std::vector<double> accuracy;       // training accuracy after each grade
};

/// Grade i minimizes the cross-entropy of (sum of earlier contributions +
/// its own output); earlier grades stay frozen. The stop tolerance applies
/// to the cross-entropy.
ClassificationRun run_multigrade_classification(
    const std::vector<GradeConfig>& grades, const LabeledSamples& data,
    const StopRule& stop, std::uint64_t seed);

/// argmax per column.
std::vector<std::size_t> predict_classes(const MultiGradeModel& model,
                                         const Matrix& x);

}  // namespace mgdl
