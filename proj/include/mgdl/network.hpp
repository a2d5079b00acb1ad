#pragma once

#include <nlohmann/json.hpp>

#include <cstddef>
#include <string>
#include <vector>

#include "mgdl/autodiff.hpp"

namespace mgdl {

struct LayerSpec {
  std::size_t in_width = 1;
  std::size_t out_width = 1;
  ActivationKind activation = ActivationKind::Identity;

  bool operator==(const LayerSpec&) const = default;
};

/// A fully connected network trained within one grade:
/// h_j = act_j(W_j h_{j-1} + b_j).
class ShallowNet {
 public:
  /// Rejects empty layer lists, zero widths, broken width chains and
  /// parameter shapes that disagree with the layer specs.
  ShallowNet(std::vector<LayerSpec> layers, std::vector<Matrix> weights,
             std::vector<Vector> biases);

  /// All parameters zero.
  static ShallowNet zeros(std::vector<LayerSpec> layers);

  const std::vector<LayerSpec>& layers() const { return layers_; }
  const std::vector<Matrix>& weights() const { return weights_; }
  const std::vector<Vector>& biases() const { return biases_; }

  std::size_t depth() const { return layers_.size(); }
  std::size_t in_width() const { return layers_.front().in_width; }
  std::size_t out_width() const { return layers_.back().out_width; }
  std::size_t parameter_count() const;

  Vector forward(const Vector& x) const;
  /// Forward on a block of samples (one per column).
  Matrix forward(const Matrix& x) const;

  /// Copy with replaced parameters; shapes must match.
  ShallowNet with_parameters(std::vector<Matrix> weights,
                             std::vector<Vector> biases) const;

  /// Parameters as (W_1, b_1, W_2, b_2, ...) with biases as column matrices.
  std::vector<Matrix> flat_parameters() const;
  static ShallowNet from_flat(std::vector<LayerSpec> layers,
                              const std::vector<Matrix>& flat);

  /// Traces the network onto `tape`, registering 2 * depth() parameters in
  /// (W_1, b_1, ...) order.
  Tape::Var trace(Tape& tape, Tape::Var input) const;

  /// Exact (bitwise) parameter and layout equality.
  bool operator==(const ShallowNet& other) const;

 private:
  std::vector<LayerSpec> layers_;
  std::vector<Matrix> weights_;
  std::vector<Vector> biases_;
};

/// Drops the final layer. Throws UsageError on single-layer nets.
ShallowNet strip_output_layer(const ShallowNet& net);

/// Forward of a single layer list, used for flattened-composition checks.
Matrix forward_layers(const std::vector<LayerSpec>& layers,
                      const std::vector<Matrix>& weights,
                      const std::vector<Vector>& biases, const Matrix& x);

/// Immutable composition of earlier grades: stages are applied in order.
class FrozenStack {
 public:
  explicit FrozenStack(std::size_t input_width) : input_width_(input_width) {}
  FrozenStack(std::size_t input_width, std::vector<ShallowNet> stages);

  /// New stack with `net` appended on top.
  FrozenStack then(const ShallowNet& net) const;

  std::size_t input_width() const { return input_width_; }
  std::size_t output_width() const {
    return stages_.empty() ? input_width_ : stages_.back().out_width();
  }
  const std::vector<ShallowNet>& stages() const { return stages_; }
  bool empty() const { return stages_.empty(); }

  Vector forward(const Vector& x) const;
  Matrix forward(const Matrix& x) const;

  bool operator==(const FrozenStack& other) const = default;

 private:
  std::size_t input_width_;
  std::vector<ShallowNet> stages_;
};

inline Vector forward_shallow(const ShallowNet& net, const Vector& x) {
  return net.forward(x);
}
inline Vector forward_stack(const FrozenStack& stack, const Vector& x) {
  return stack.forward(x);
}

/// One trained grade: its contribution is net(prefix(x)).
struct GradeRecord {
  ShallowNet net;
  FrozenStack prefix;
  bool output_layer_stripped_in_stack = true;

  Vector contribution(const Vector& x) const;
  Matrix contribution(const Matrix& x) const;

  /// Stack seen by the next grade.
  FrozenStack next_stack() const;

  bool operator==(const GradeRecord&) const = default;
};

/// Cumulative predictor: sum of all grade contributions.
class MultiGradeModel {
 public:
  MultiGradeModel(std::size_t input_width, std::size_t output_width)
      : input_width_(input_width), output_width_(output_width) {}

  /// Throws ShapeError if the grade's prefix does not match the stack left
  /// by the current last grade or its output width is not t.
  void append(GradeRecord grade);

  const std::vector<GradeRecord>& grades() const { return grades_; }
  std::size_t size() const { return grades_.size(); }
  bool empty() const { return grades_.empty(); }
  std::size_t input_width() const { return input_width_; }
  std::size_t output_width() const { return output_width_; }

  /// Stack for the next grade to be trained.
  FrozenStack next_stack() const;

  /// Sum of the first `grades` contributions, accumulated left to right.
  Vector predict(const Vector& x) const;
  Matrix predict(const Matrix& x) const;
  Matrix predict_prefix(const Matrix& x, std::size_t grades) const;

  bool operator==(const MultiGradeModel&) const = default;

 private:
  std::size_t input_width_;
  std::size_t output_width_;
  std::vector<GradeRecord> grades_;
};

inline Vector predict(const MultiGradeModel& model, const Vector& x) {
  return model.predict(x);
}

struct GradeSummary {
  std::size_t grade = 0;
  std::vector<std::size_t> widths;  // including the raw input width
  std::vector<bool> frozen;         // per entry of widths
  std::size_t trainable_parameters = 0;
  std::size_t frozen_parameters = 0;
  std::string text;  // "Grade 2: [1]→[256]_F→[256]_F→[128]→[1]"
};

std::vector<GradeSummary> flatten_for_report(const MultiGradeModel& model);

// JSON serialization. Doubles are written in shortest round-trip form so
// reload is bit exact.
nlohmann::json to_json(const ShallowNet& net);
ShallowNet shallow_net_from_json(const nlohmann::json& j);
nlohmann::json to_json(const MultiGradeModel& model);
MultiGradeModel model_from_json(const nlohmann::json& j);

void save_model(const MultiGradeModel& model, const std::string& path);
MultiGradeModel load_model(const std::string& path);

}  // namespace mgdl
