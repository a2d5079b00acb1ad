#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mgdl/autodiff.hpp"

namespace mgdl {

enum class TargetFunction {
  Sin100,    // sin(100x) on [0, 1]
  XSin100,   // x sin(100x) on [0, 1]
  Composed,  // (x + 1) (f4 o f3 o f2 o f1)(x) on [-1, 1]
};

std::string_view to_string(TargetFunction target);
TargetFunction target_from_string(std::string_view name);

struct Interval {
  double lo;
  double hi;
};

Interval domain(TargetFunction target);

/// Throws DomainError outside the target's interval.
double eval_target(TargetFunction target, double x);

/// Inclusive grid of n points; the last point is exactly hi.
std::vector<double> linspace(double lo, double hi, std::size_t n);

/// Samples stored one per column: x is s x N, y is t x N.
struct Samples {
  Matrix x;
  Matrix y;

  std::size_t size() const { return static_cast<std::size_t>(x.cols()); }
};

struct DataOptions {
  std::size_t train_size = 5000;
  std::size_t test_size = 1000;
  double validation_fraction = 0.2;
  double train_noise_sigma = 0.05;  // applied only when noisy
  double validation_noise_sigma = 0.01;
};

struct Dataset {
  TargetFunction target = TargetFunction::Sin100;
  bool noisy = false;
  std::uint64_t seed = 0;
  double noise_sigma = 0.0;
  Samples train;
  Samples test;
  Samples validation;
  /// Training columns the validation samples were copied from.
  std::vector<std::size_t> validation_indices;
};

/// Benchmark dataset. Noise comes from the "data/train-noise",
/// "data/validation-pick" and "data/validation-noise" sub-streams of `seed`.
Dataset generate(TargetFunction target, bool noisy, std::uint64_t seed,
                 const DataOptions& options = {});

struct SplitError {
  double mse = 0.0;
  /// Empty when every target is zero.
  std::optional<double> rse;
};

/// mse = (1/N) sum ||pred - y||^2, rse = sum ||pred - y||^2 / sum ||y||^2.
SplitError split_error(const Matrix& pred, const Matrix& target);

struct Metrics {
  double mse_train = 0.0;
  std::optional<double> rse_train;
  double mse_test = 0.0;
  std::optional<double> rse_test;
};

Metrics compute_metrics(const Matrix& pred_train, const Matrix& pred_test,
                        const Dataset& data);

/// CSV with header `split,x,y`, one row per sample (1-D inputs/targets only).
void write_dataset_csv(const Dataset& data, const std::string& path);
/// Reads the CSV written above; target/seed fields are not recovered.
Dataset read_dataset_csv(const std::string& path);

/// Shortest round-trip decimal form of a double.
std::string format_double(double v);

}  // namespace mgdl
