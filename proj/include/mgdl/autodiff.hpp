#pragma once

// Dense batched reverse-mode differentiation.
//
// Values on the tape are Eigen matrices. Batched activations are stored one
// sample per column, so a layer maps an (in x B) block to an (out x B) block.

#include <Eigen/Dense>

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mgdl {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class ActivationKind { Sin, ReLU, Identity };

std::string_view to_string(ActivationKind kind);
ActivationKind activation_from_string(std::string_view name);

/// W x + b. `layer` only feeds the error message.
Vector affine(const Matrix& W, const Vector& x, const Vector& b,
              std::size_t layer = 0);

Vector activate(ActivationKind kind, const Vector& v);
Matrix activate(ActivationKind kind, const Matrix& v);

/// (1/N) sum_k ||pred_k - target_k||^2
double mse_loss(std::span<const Vector> pred, std::span<const Vector> target);

/// Softmax + clamp to [1e-12, 1], then -(1/m) sum ln p_label.
/// Labels are zero-based class indices.
double cross_entropy_loss(std::span<const Vector> logits,
                          std::span<const std::size_t> labels);

/// sum_j lambda_j ||W_j||_1 (entrywise).
double l1_penalty(std::span<const Matrix> weights,
                  std::span<const double> lambdas);

inline constexpr double kProbabilityFloor = 1e-12;

class Tape {
 public:
  /// Handle to a node on one tape.
  struct Var {
    std::size_t id = 0;
  };

  Tape() = default;

  /// Trainable leaf. Every parameter receives a gradient slot.
  Var parameter(Matrix value);
  /// Trainable leaf that reads `value` in place; it must outlive the tape's
  /// next clear().
  Var parameter_view(const Matrix& value);
  /// Non-trainable leaf.
  Var constant(Matrix value);

  Var matmul(Var a, Var b);
  /// z (r x B) + b (r x 1) broadcast over columns.
  Var add_bias(Var z, Var bias);
  Var add(Var a, Var b);
  /// Elementwise product.
  Var mul(Var a, Var b);
  Var scale(Var a, double factor);
  Var activate(ActivationKind kind, Var a);

  /// Mean over columns of the squared column residual norm.
  Var mse(Var pred, Matrix target);
  /// Column-wise softmax cross-entropy, averaged over columns.
  Var cross_entropy(Var logits, std::vector<std::size_t> labels);
  /// lambda * sum |w|; subgradient 0 at w == 0.
  Var l1(Var weight, double lambda);

  /// Reverse sweep from a 1x1 node. Returns the gradients of every
  /// parameter, in registration order.
  std::vector<Matrix> backward(Var loss);

  /// Recomputes every non-leaf node from the stored leaves.
  void replay();

  const Matrix& value(Var v) const;
  const Matrix& grad(Var v) const;
  const std::vector<Var>& parameters() const { return params_; }
  std::size_t size() const { return nodes_.size(); }
  void clear();

 private:
  enum class Op {
    Parameter,
    Constant,
    MatMul,
    AddBias,
    Add,
    Mul,
    Scale,
    Activate,
    Mse,
    CrossEntropy,
    L1
  };

  struct Node {
    explicit Node(Op o, std::size_t lhs = 0, std::size_t rhs = 0)
        : op(o), a(lhs), b(rhs) {}

    Op op;
    std::size_t a = 0;
    std::size_t b = 0;
    double scalar = 0.0;
    ActivationKind activation = ActivationKind::Identity;
    Matrix value;
    const Matrix* external = nullptr;
    Matrix grad;
    Matrix aux;  // target for Mse, cached softmax for CrossEntropy
    std::vector<std::size_t> labels;
  };

  Var push(Node node);
  void evaluate(Node& node);
  const Node& node(Var v) const;
  const Matrix& val(std::size_t id) const {
    return nodes_[id].external ? *nodes_[id].external : nodes_[id].value;
  }

  std::vector<Node> nodes_;
  std::vector<Var> params_;
};

}  // namespace mgdl
