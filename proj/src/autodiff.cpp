#include "mgdl/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mgdl/errors.hpp"

namespace mgdl {

std::string_view to_string(ActivationKind kind) {
  switch (kind) {
    case ActivationKind::Sin:
      return "sin";
    case ActivationKind::ReLU:
      return "relu";
    case ActivationKind::Identity:
      return "identity";
  }
  return "identity";
}

ActivationKind activation_from_string(std::string_view name) {
  if (name == "sin") return ActivationKind::Sin;
  if (name == "relu") return ActivationKind::ReLU;
  if (name == "identity" || name == "linear") return ActivationKind::Identity;
  throw ConfigError("unknown activation '" + std::string(name) + "'");
}

Vector affine(const Matrix& W, const Vector& x, const Vector& b,
              std::size_t layer) {
  if (W.cols() != x.size() || W.rows() != b.size()) {
    throw ShapeError("layer " + std::to_string(layer) + ": weight is " +
                     std::to_string(W.rows()) + "x" +
                     std::to_string(W.cols()) + ", input has " +
                     std::to_string(x.size()) + " entries, bias has " +
                     std::to_string(b.size()));
  }
  return W * x + b;
}

namespace {

template <typename Derived>
auto apply(ActivationKind kind, const Eigen::MatrixBase<Derived>& v) {
  using Plain = typename Derived::PlainObject;
  switch (kind) {
    case ActivationKind::Sin:
      return Plain(v.array().sin().matrix());
    case ActivationKind::ReLU:
      return Plain(v.array().max(0.0).matrix());
    case ActivationKind::Identity:
      break;
  }
  return Plain(v);
}

// d(activation)/d(input), evaluated at the pre-activation.
Matrix derivative(ActivationKind kind, const Matrix& pre) {
  switch (kind) {
    case ActivationKind::Sin:
      return pre.array().cos().matrix();
    case ActivationKind::ReLU:
      return (pre.array() > 0.0).cast<double>().matrix();
    case ActivationKind::Identity:
      break;
  }
  return Matrix::Ones(pre.rows(), pre.cols());
}

void check_batch(std::size_t pred, std::size_t target) {
  if (pred == 0) throw UsageError("loss over an empty batch");
  if (pred != target) {
    throw ShapeError("prediction count " + std::to_string(pred) +
                     " does not match target count " + std::to_string(target));
  }
}

}  // namespace

Vector activate(ActivationKind kind, const Vector& v) { return apply(kind, v); }
Matrix activate(ActivationKind kind, const Matrix& v) { return apply(kind, v); }

double mse_loss(std::span<const Vector> pred, std::span<const Vector> target) {
  check_batch(pred.size(), target.size());
  double total = 0.0;
  for (std::size_t k = 0; k < pred.size(); ++k) {
    if (pred[k].size() != target[k].size()) {
      throw ShapeError("sample " + std::to_string(k) + ": dimension mismatch");
    }
    total += (pred[k] - target[k]).squaredNorm();
  }
  return total / static_cast<double>(pred.size());
}

double cross_entropy_loss(std::span<const Vector> logits,
                          std::span<const std::size_t> labels) {
  check_batch(logits.size(), labels.size());
  double total = 0.0;
  for (std::size_t k = 0; k < logits.size(); ++k) {
    const Vector& z = logits[k];
    if (labels[k] >= static_cast<std::size_t>(z.size())) {
      throw UsageError("label " + std::to_string(labels[k]) +
                       " out of range for " + std::to_string(z.size()) +
                       " classes");
    }
    const double shift = z.maxCoeff();
    const double denom = (z.array() - shift).exp().sum();
    const double p = std::exp(z[labels[k]] - shift) / denom;
    total -= std::log(std::clamp(p, kProbabilityFloor, 1.0));
  }
  return total / static_cast<double>(logits.size());
}

double l1_penalty(std::span<const Matrix> weights,
                  std::span<const double> lambdas) {
  if (weights.size() != lambdas.size()) {
    throw UsageError("l1_penalty: " + std::to_string(weights.size()) +
                     " weights but " + std::to_string(lambdas.size()) +
                     " lambdas");
  }
  double total = 0.0;
  for (std::size_t j = 0; j < weights.size(); ++j) {
    if (lambdas[j] < 0.0) {
      throw ConfigError("l1 lambda for layer " + std::to_string(j + 1) +
                        " is negative");
    }
    total += lambdas[j] * weights[j].lpNorm<1>();
  }
  return total;
}

// ---------------------------------------------------------------------------
// Tape

Tape::Var Tape::push(Node node) {
  evaluate(node);
  nodes_.push_back(std::move(node));
  return Var{nodes_.size() - 1};
}

const Tape::Node& Tape::node(Var v) const {
  if (v.id >= nodes_.size()) throw UsageError("variable is not on this tape");
  return nodes_[v.id];
}

Tape::Var Tape::parameter(Matrix value) {
  Node n{Op::Parameter};
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  params_.push_back(Var{nodes_.size() - 1});
  return params_.back();
}

Tape::Var Tape::parameter_view(const Matrix& value) {
  Node n{Op::Parameter};
  n.external = &value;
  nodes_.push_back(std::move(n));
  params_.push_back(Var{nodes_.size() - 1});
  return params_.back();
}

Tape::Var Tape::constant(Matrix value) {
  Node n{Op::Constant};
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

Tape::Var Tape::matmul(Var a, Var b) {
  node(a);
  node(b);
  if (val(a.id).cols() != val(b.id).rows()) {
    throw ShapeError("matmul: " + std::to_string(val(a.id).rows()) + "x" +
                     std::to_string(val(a.id).cols()) + " by " +
                     std::to_string(val(b.id).rows()) + "x" +
                     std::to_string(val(b.id).cols()));
  }
  return push(Node{Op::MatMul, a.id, b.id});
}

Tape::Var Tape::add_bias(Var z, Var bias) {
  node(z);
  node(bias);
  const Matrix& bv = val(bias.id);
  if (bv.cols() != 1 || bv.rows() != val(z.id).rows()) {
    throw ShapeError("add_bias: bias of length " + std::to_string(bv.rows()) +
                     " for " + std::to_string(val(z.id).rows()) + " rows");
  }
  return push(Node{Op::AddBias, z.id, bias.id});
}

Tape::Var Tape::add(Var a, Var b) {
  node(a);
  node(b);
  const Matrix& av = val(a.id);
  const Matrix& bv = val(b.id);
  if (av.rows() != bv.rows() || av.cols() != bv.cols()) {
    throw ShapeError("add: operand shapes differ");
  }
  return push(Node{Op::Add, a.id, b.id});
}

Tape::Var Tape::mul(Var a, Var b) {
  node(a);
  node(b);
  const Matrix& av = val(a.id);
  const Matrix& bv = val(b.id);
  if (av.rows() != bv.rows() || av.cols() != bv.cols()) {
    throw ShapeError("mul: operand shapes differ");
  }
  return push(Node{Op::Mul, a.id, b.id});
}

Tape::Var Tape::scale(Var a, double factor) {
  node(a);
  Node n{Op::Scale, a.id};
  n.scalar = factor;
  return push(std::move(n));
}

Tape::Var Tape::activate(ActivationKind kind, Var a) {
  node(a);
  Node n{Op::Activate, a.id};
  n.activation = kind;
  return push(std::move(n));
}

Tape::Var Tape::mse(Var pred, Matrix target) {
  node(pred);
  const Matrix& p = val(pred.id);
  check_batch(static_cast<std::size_t>(p.cols()),
              static_cast<std::size_t>(target.cols()));
  if (p.rows() != target.rows()) {
    throw ShapeError("mse: prediction has " + std::to_string(p.rows()) +
                     " outputs, target has " + std::to_string(target.rows()));
  }
  Node n{Op::Mse, pred.id};
  n.aux = std::move(target);
  return push(std::move(n));
}

Tape::Var Tape::cross_entropy(Var logits, std::vector<std::size_t> labels) {
  node(logits);
  const Matrix& z = val(logits.id);
  check_batch(static_cast<std::size_t>(z.cols()), labels.size());
  for (std::size_t label : labels) {
    if (label >= static_cast<std::size_t>(z.rows())) {
      throw UsageError("label " + std::to_string(label) +
                       " out of range for " + std::to_string(z.rows()) +
                       " classes");
    }
  }
  Node n{Op::CrossEntropy, logits.id};
  n.labels = std::move(labels);
  return push(std::move(n));
}

Tape::Var Tape::l1(Var weight, double lambda) {
  node(weight);
  if (lambda < 0.0) throw ConfigError("l1 lambda is negative");
  Node n{Op::L1, weight.id};
  n.scalar = lambda;
  return push(std::move(n));
}

void Tape::evaluate(Node& n) {
  auto in = [this](std::size_t id) -> const Matrix& { return val(id); };
  switch (n.op) {
    case Op::Parameter:
    case Op::Constant:
      return;
    case Op::MatMul:
      n.value.noalias() = in(n.a) * in(n.b);
      return;
    case Op::AddBias:
      n.value = in(n.a).colwise() + in(n.b).col(0);
      return;
    case Op::Add:
      n.value = in(n.a) + in(n.b);
      return;
    case Op::Mul:
      n.value = in(n.a).cwiseProduct(in(n.b));
      return;
    case Op::Scale:
      n.value = n.scalar * in(n.a);
      return;
    case Op::Activate:
      n.value = mgdl::activate(n.activation, in(n.a));
      return;
    case Op::Mse: {
      const Matrix& p = in(n.a);
      n.value.resize(1, 1);
      n.value(0, 0) = (p - n.aux).squaredNorm() / static_cast<double>(p.cols());
      return;
    }
    case Op::CrossEntropy: {
      const Matrix& z = in(n.a);
      n.aux.resize(z.rows(), z.cols());
      double total = 0.0;
      for (Eigen::Index k = 0; k < z.cols(); ++k) {
        const double shift = z.col(k).maxCoeff();
        n.aux.col(k) = (z.col(k).array() - shift).exp().matrix();
        n.aux.col(k) /= n.aux.col(k).sum();
        const double p = n.aux(static_cast<Eigen::Index>(n.labels[k]), k);
        total -= std::log(std::clamp(p, kProbabilityFloor, 1.0));
      }
      n.value.resize(1, 1);
      n.value(0, 0) = total / static_cast<double>(z.cols());
      return;
    }
    case Op::L1:
      n.value.resize(1, 1);
      n.value(0, 0) = n.scalar * in(n.a).lpNorm<1>();
      return;
  }
}

void Tape::replay() {
  for (Node& n : nodes_) evaluate(n);
}

std::vector<Matrix> Tape::backward(Var loss) {
  const Node& out = node(loss);
  if (out.value.rows() != 1 || out.value.cols() != 1) {
    throw UsageError("backward requires a scalar output, got " +
                     std::to_string(out.value.rows()) + "x" +
                     std::to_string(out.value.cols()));
  }

  // A node needs a gradient only if some parameter lies beneath it.
  std::vector<char> needs(loss.id + 1, 0);
  for (std::size_t i = 0; i <= loss.id; ++i) {
    const Node& n = nodes_[i];
    switch (n.op) {
      case Op::Parameter:
        needs[i] = 1;
        break;
      case Op::Constant:
        break;
      case Op::MatMul:
      case Op::AddBias:
      case Op::Add:
      case Op::Mul:
        needs[i] = needs[n.a] || needs[n.b];
        break;
      default:
        needs[i] = needs[n.a];
        break;
    }
  }

  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    Node& n = nodes_[i];
    if (i <= loss.id && needs[i]) {
      n.grad.setZero(val(i).rows(), val(i).cols());
    } else {
      n.grad.resize(0, 0);
    }
  }
  nodes_[loss.id].grad(0, 0) = 1.0;

  for (std::size_t i = loss.id + 1; i-- > 0;) {
    if (!needs[i]) continue;
    Node& n = nodes_[i];
    const Matrix& g = n.grad;
    switch (n.op) {
      case Op::Parameter:
      case Op::Constant:
        break;
      case Op::MatMul:
        if (needs[n.a]) nodes_[n.a].grad.noalias() += g * val(n.b).transpose();
        if (needs[n.b]) nodes_[n.b].grad.noalias() += val(n.a).transpose() * g;
        break;
      case Op::AddBias:
        if (needs[n.a]) nodes_[n.a].grad += g;
        if (needs[n.b]) nodes_[n.b].grad += g.rowwise().sum();
        break;
      case Op::Add:
        if (needs[n.a]) nodes_[n.a].grad += g;
        if (needs[n.b]) nodes_[n.b].grad += g;
        break;
      case Op::Mul:
        if (needs[n.a]) nodes_[n.a].grad += g.cwiseProduct(val(n.b));
        if (needs[n.b]) nodes_[n.b].grad += g.cwiseProduct(val(n.a));
        break;
      case Op::Scale:
        nodes_[n.a].grad += n.scalar * g;
        break;
      case Op::Activate:
        if (n.activation == ActivationKind::Identity) {
          nodes_[n.a].grad += g;
        } else {
          nodes_[n.a].grad +=
              g.cwiseProduct(derivative(n.activation, val(n.a)));
        }
        break;
      case Op::Mse: {
        const Matrix& p = val(n.a);
        const double factor = 2.0 * g(0, 0) / static_cast<double>(p.cols());
        nodes_[n.a].grad += factor * (p - n.aux);
        break;
      }
      case Op::CrossEntropy: {
        const double factor =
            g(0, 0) / static_cast<double>(val(n.a).cols());
        Matrix local = n.aux;
        for (Eigen::Index k = 0; k < local.cols(); ++k) {
          const auto label = static_cast<Eigen::Index>(n.labels[k]);
          if (local(label, k) < kProbabilityFloor) {
            // clamped: -ln(floor) is constant in the logits
            local.col(k).setZero();
          } else {
            local(label, k) -= 1.0;
          }
        }
        nodes_[n.a].grad += factor * local;
        break;
      }
      case Op::L1: {
        const Matrix& w = val(n.a);
        nodes_[n.a].grad +=
            (n.scalar * g(0, 0)) *
            w.unaryExpr([](double x) { return double((x > 0.0) - (x < 0.0)); });
        break;
      }
    }
  }

  std::vector<Matrix> grads;
  grads.reserve(params_.size());
  for (Var p : params_) {
    const Node& n = nodes_[p.id];
    grads.push_back(n.grad.size() ? n.grad
                                  : Matrix::Zero(val(p.id).rows(), val(p.id).cols()));
  }
  return grads;
}

const Matrix& Tape::value(Var v) const {
  node(v);
  return val(v.id);
}

const Matrix& Tape::grad(Var v) const { return node(v).grad; }

void Tape::clear() {
  nodes_.clear();
  params_.clear();
}

}  // namespace mgdl
