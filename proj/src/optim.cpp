#include "mgdl/optim.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "mgdl/errors.hpp"
#include "mgdl/random.hpp"

namespace mgdl {

void AdamConfig::validate() const {
  if (!(lr0 > 0.0)) throw ConfigError("learning rate must be positive");
  if (!(beta1 > 0.0 && beta1 < 1.0)) throw ConfigError("beta1 must lie in (0,1)");
  if (!(beta2 > 0.0 && beta2 < 1.0)) throw ConfigError("beta2 must lie in (0,1)");
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
  if (!(decay >= 0.0)) throw ConfigError("decay must be non-negative");
}

AdamState::AdamState(std::span<const Matrix> params) {
  m_.reserve(params.size());
  v_.reserve(params.size());
  for (const Matrix& p : params) {
    m_.push_back(Matrix::Zero(p.rows(), p.cols()));
    v_.push_back(Matrix::Zero(p.rows(), p.cols()));
  }
}

double learning_rate(const AdamConfig& config, std::int64_t step,
                     std::int64_t epoch) {
  const auto t = static_cast<double>(
      config.decay_unit == DecayUnit::PerStep ? step : epoch);
  return config.lr0 / (1.0 + config.decay * t);
}

void adam_step(AdamState& state, const AdamConfig& config,
               std::span<Matrix> params, std::span<const Matrix> grads) {
  if (params.size() != grads.size() || params.size() != state.m_.size()) {
    throw ShapeError("adam_step: " + std::to_string(params.size()) +
                     " parameters, " + std::to_string(grads.size()) +
                     " gradients, " + std::to_string(state.m_.size()) +
                     " moment slots");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].rows() != grads[i].rows() ||
        params[i].cols() != grads[i].cols() ||
        params[i].rows() != state.m_[i].rows() ||
        params[i].cols() != state.m_[i].cols()) {
      throw ShapeError("adam_step: gradient " + std::to_string(i) +
                       " does not match its parameter shape");
    }
    if (!grads[i].allFinite()) {
      throw TrainingError("non-finite gradient in parameter block " +
                              std::to_string(i),
                          -1, state.step_ + 1);
    }
  }

  const std::int64_t t = ++state.step_;
  const double lr = learning_rate(config, t, state.epoch_);
  const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Matrix& m = state.m_[i];
    Matrix& v = state.v_[i];
    const Matrix& g = grads[i];
    m = config.beta1 * m + (1.0 - config.beta1) * g;
    v = config.beta2 * v + (1.0 - config.beta2) * g.cwiseProduct(g);
    params[i].array() -=
        lr * (m.array() / c1) / ((v.array() / c2).sqrt() + config.epsilon);
  }
}

std::vector<std::vector<std::size_t>> make_batches(std::size_t n,
                                                   const BatchPlan& plan) {
  if (plan.batch_size == 0) throw ConfigError("batch size must be positive");
  if (n == 0) throw UsageError("cannot batch an empty dataset");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(mix64(plan.seed ^ mix64(plan.epoch + 1)));
  rng.shuffle(std::span<std::size_t>(order));

  std::vector<std::vector<std::size_t>> batches;
  batches.reserve((n + plan.batch_size - 1) / plan.batch_size);
  for (std::size_t start = 0; start < n; start += plan.batch_size) {
    const std::size_t end = std::min(n, start + plan.batch_size);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

}  // namespace mgdl
