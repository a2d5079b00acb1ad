#include "mgdl/data.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <sstream>

#include "mgdl/errors.hpp"
#include "mgdl/random.hpp"

namespace mgdl {

std::string_view to_string(TargetFunction target) {
  switch (target) {
    case TargetFunction::Sin100:
      return "sin100";
    case TargetFunction::XSin100:
      return "xsin100";
    case TargetFunction::Composed:
      return "composed";
  }
  return "sin100";
}

TargetFunction target_from_string(std::string_view name) {
  if (name == "sin100") return TargetFunction::Sin100;
  if (name == "xsin100") return TargetFunction::XSin100;
  if (name == "composed") return TargetFunction::Composed;
  throw ConfigError("unknown target function '" + std::string(name) + "'");
}

Interval domain(TargetFunction target) {
  return target == TargetFunction::Composed ? Interval{-1.0, 1.0}
                                            : Interval{0.0, 1.0};
}

double eval_target(TargetFunction target, double x) {
  const Interval d = domain(target);
  if (!(x >= d.lo && x <= d.hi)) {
    throw DomainError(std::string(to_string(target)) + " is defined on [" +
                      format_double(d.lo) + ", " + format_double(d.hi) +
                      "], got " + format_double(x));
  }
  using std::numbers::pi;
  switch (target) {
    case TargetFunction::Sin100:
      return std::sin(100.0 * x);
    case TargetFunction::XSin100:
      return x * std::sin(100.0 * x);
    case TargetFunction::Composed: {
      const double f1 = std::abs(std::cos(pi * (x - 0.3)) - 0.7);
      const double f2 = std::abs(std::cos(2.0 * pi * (f1 - 0.5)) - 0.5);
      const double f3 = -std::abs(f2 - 1.3) + 1.3;
      const double f4 = -std::abs(f3 - 0.9) + 0.9;
      return (x + 1.0) * f4;
    }
  }
  return 0.0;
}

std::vector<double> linspace(double lo, double hi, std::size_t n) {
  std::vector<double> out(n);
  if (n == 1) {
    out[0] = lo;
    return out;
  }
  const double step = (hi - lo) / static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) out[i] = lo + step * static_cast<double>(i);
  if (n > 1) out.back() = hi;
  return out;
}

namespace {

Samples sample_grid(TargetFunction target, std::size_t n) {
  const Interval d = domain(target);
  const std::vector<double> xs = linspace(d.lo, d.hi, n);
  Samples s{Matrix(1, static_cast<Eigen::Index>(n)),
            Matrix(1, static_cast<Eigen::Index>(n))};
  for (std::size_t i = 0; i < n; ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    s.x(0, k) = xs[i];
    s.y(0, k) = eval_target(target, xs[i]);
  }
  return s;
}

}  // namespace

Dataset generate(TargetFunction target, bool noisy, std::uint64_t seed,
                 const DataOptions& options) {
  if (options.train_size < 2 || options.test_size < 2) {
    throw ConfigError("train and test grids need at least two points");
  }
  Dataset data;
  data.target = target;
  data.noisy = noisy;
  data.seed = seed;
  data.noise_sigma = noisy ? options.train_noise_sigma : 0.0;
  data.train = sample_grid(target, options.train_size);
  data.test = sample_grid(target, options.test_size);

  if (noisy) {
    Rng rng(derive_seed(seed, "data/train-noise"));
    for (Eigen::Index k = 0; k < data.train.y.cols(); ++k) {
      data.train.y(0, k) += data.noise_sigma * rng.normal();
    }
  }

  // Partial Fisher-Yates: the first m entries form a uniform subset.
  const auto m = static_cast<std::size_t>(
      std::floor(options.validation_fraction * static_cast<double>(options.train_size)));
  std::vector<std::size_t> order(options.train_size);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng pick(derive_seed(seed, "data/validation-pick"));
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(pick.below(order.size() - i));
    std::swap(order[i], order[j]);
  }
  data.validation_indices.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(m));

  Rng vnoise(derive_seed(seed, "data/validation-noise"));
  data.validation.x.resize(1, static_cast<Eigen::Index>(m));
  data.validation.y.resize(1, static_cast<Eigen::Index>(m));
  for (std::size_t i = 0; i < m; ++i) {
    const auto src = static_cast<Eigen::Index>(data.validation_indices[i]);
    const auto k = static_cast<Eigen::Index>(i);
    data.validation.x(0, k) = data.train.x(0, src);
    data.validation.y(0, k) =
        data.train.y(0, src) + options.validation_noise_sigma * vnoise.normal();
  }
  return data;
}

SplitError split_error(const Matrix& pred, const Matrix& target) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols()) {
    throw ShapeError("prediction block is " + std::to_string(pred.rows()) + "x" +
                     std::to_string(pred.cols()) + ", targets are " +
                     std::to_string(target.rows()) + "x" +
                     std::to_string(target.cols()));
  }
  if (target.cols() == 0) throw UsageError("metrics over an empty split");
  const double residual = (pred - target).squaredNorm();
  const double energy = target.squaredNorm();
  SplitError e;
  e.mse = residual / static_cast<double>(target.cols());
  if (energy > 0.0) e.rse = residual / energy;
  return e;
}

Metrics compute_metrics(const Matrix& pred_train, const Matrix& pred_test,
                        const Dataset& data) {
  const SplitError train = split_error(pred_train, data.train.y);
  const SplitError test = split_error(pred_test, data.test.y);
  return Metrics{train.mse, train.rse, test.mse, test.rse};
}

std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

void write_dataset_csv(const Dataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << "split,x,y\n";
  auto emit = [&](const char* split, const Samples& s) {
    if (s.x.rows() != 1 || s.y.rows() != 1) {
      throw UsageError("CSV export supports 1-D inputs and targets only");
    }
    for (Eigen::Index k = 0; k < s.x.cols(); ++k) {
      out << split << ',' << format_double(s.x(0, k)) << ','
          << format_double(s.y(0, k)) << '\n';
    }
  };
  emit("train", data.train);
  emit("test", data.test);
  emit("validation", data.validation);
  if (!out) throw IoError("write failed for " + path);
}

Dataset read_dataset_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path);
  std::string line;
  if (!std::getline(in, line) || line != "split,x,y") {
    throw ConfigError(path + ": expected header 'split,x,y'");
  }
  std::vector<double> xs[3], ys[3];
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    const auto c1 = line.find(',');
    const auto c2 = line.find(',', c1 == std::string::npos ? c1 : c1 + 1);
    if (c1 == std::string::npos || c2 == std::string::npos) {
      throw ConfigError(path + ":" + std::to_string(row) + ": expected 3 fields");
    }
    const std::string split = line.substr(0, c1);
    int which = split == "train" ? 0 : split == "test" ? 1 : split == "validation" ? 2 : -1;
    if (which < 0) {
      throw ConfigError(path + ":" + std::to_string(row) + ": unknown split '" + split + "'");
    }
    double x = 0.0, y = 0.0;
    const char* begin = line.data();
    auto rx = std::from_chars(begin + c1 + 1, begin + c2, x);
    auto ry = std::from_chars(begin + c2 + 1, begin + line.size(), y);
    if (rx.ec != std::errc() || ry.ec != std::errc()) {
      throw ConfigError(path + ":" + std::to_string(row) + ": malformed number");
    }
    xs[which].push_back(x);
    ys[which].push_back(y);
  }
  auto to_samples = [](const std::vector<double>& x, const std::vector<double>& y) {
    const auto n = static_cast<Eigen::Index>(x.size());
    Samples s{Matrix(1, n), Matrix(1, n)};
    for (Eigen::Index k = 0; k < n; ++k) {
      s.x(0, k) = x[static_cast<std::size_t>(k)];
      s.y(0, k) = y[static_cast<std::size_t>(k)];
    }
    return s;
  };
  Dataset data;
  data.train = to_samples(xs[0], ys[0]);
  data.test = to_samples(xs[1], ys[1]);
  data.validation = to_samples(xs[2], ys[2]);
  return data;
}

}  // namespace mgdl
