#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "mgdl/autodiff.hpp"

namespace mgdl {

enum class DecayUnit { PerStep, PerEpoch };

/// Adam with inverse-time decay: lr_t = lr0 / (1 + decay * t), where t counts
/// optimizer steps or completed epochs depending on `decay_unit`.
struct AdamConfig {
  double lr0 = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double decay = 0.0;
  DecayUnit decay_unit = DecayUnit::PerStep;

  /// Throws ConfigError on out-of-range hyperparameters.
  void validate() const;
};

class AdamState {
 public:
  /// Zero moments shaped like `params`.
  explicit AdamState(std::span<const Matrix> params);

  std::int64_t step_count() const { return step_; }
  /// Completed epochs; only read by PerEpoch decay.
  std::int64_t epoch() const { return epoch_; }
  void set_epoch(std::int64_t epoch) { epoch_ = epoch; }

  const std::vector<Matrix>& first_moment() const { return m_; }
  const std::vector<Matrix>& second_moment() const { return v_; }

 private:
  friend void adam_step(AdamState&, const AdamConfig&, std::span<Matrix>,
                        std::span<const Matrix>);
  std::int64_t step_ = 0;
  std::int64_t epoch_ = 0;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
};

/// Learning rate applied by the step with (1-based) index `step`.
double learning_rate(const AdamConfig& config, std::int64_t step,
                     std::int64_t epoch = 0);

/// One bias-corrected Adam update in place. Throws TrainingError (grade -1)
/// on a non-finite gradient and ShapeError on mismatched shapes; on error the
/// parameters and state are left untouched.
void adam_step(AdamState& state, const AdamConfig& config,
               std::span<Matrix> params, std::span<const Matrix> grads);

struct BatchPlan {
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  std::uint64_t epoch = 0;
};

/// Seeded permutation of 0..n-1 cut into consecutive batches; the last batch
/// may be short. Deterministic in (seed, epoch).
std::vector<std::vector<std::size_t>> make_batches(std::size_t n,
                                                   const BatchPlan& plan);

}  // namespace mgdl
