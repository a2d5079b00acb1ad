#pragma once

// Test-only helpers: independent oracles and small generators.

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <vector>

#include "mgdl/autodiff.hpp"
#include "mgdl/multigrade.hpp"
#include "mgdl/network.hpp"
#include "mgdl/random.hpp"

namespace mgdl::testutil {

inline std::vector<LayerSpec> chain(const std::vector<std::size_t>& widths,
                                    const std::vector<ActivationKind>& acts) {
  std::vector<LayerSpec> layers;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    layers.push_back({widths[i], widths[i + 1], acts[i]});
  }
  return layers;
}

inline Matrix random_matrix(std::mt19937_64& rng, Eigen::Index rows,
                            Eigen::Index cols, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = u(rng);
  return m;
}

inline ShallowNet random_net(std::mt19937_64& rng, const std::vector<LayerSpec>& layers) {
  std::vector<Matrix> w;
  std::vector<Vector> b;
  for (const LayerSpec& l : layers) {
    w.push_back(random_matrix(rng, static_cast<Eigen::Index>(l.out_width),
                              static_cast<Eigen::Index>(l.in_width)));
    b.push_back(random_matrix(rng, static_cast<Eigen::Index>(l.out_width), 1).col(0));
  }
  return ShallowNet(layers, std::move(w), std::move(b));
}

/// Straight-line re-implementation of h_j = act(W_j h_{j-1} + b_j) with
/// explicit loops.
inline Vector naive_forward(const ShallowNet& net, const Vector& x) {
  std::vector<double> h(x.data(), x.data() + x.size());
  for (std::size_t j = 0; j < net.depth(); ++j) {
    const Matrix& W = net.weights()[j];
    const Vector& b = net.biases()[j];
    std::vector<double> next(static_cast<std::size_t>(W.rows()));
    for (Eigen::Index r = 0; r < W.rows(); ++r) {
      double z = b[r];
      for (Eigen::Index c = 0; c < W.cols(); ++c) z += W(r, c) * h[static_cast<std::size_t>(c)];
      switch (net.layers()[j].activation) {
        case ActivationKind::Sin: z = std::sin(z); break;
        case ActivationKind::ReLU: z = z > 0.0 ? z : 0.0; break;
        case ActivationKind::Identity: break;
      }
      next[static_cast<std::size_t>(r)] = z;
    }
    h = std::move(next);
  }
  return Eigen::Map<Vector>(h.data(), static_cast<Eigen::Index>(h.size()));
}

/// Central differences of `loss` with respect to every entry of every block.
inline std::vector<Matrix> finite_differences(
    std::vector<Matrix> params,
    const std::function<double(const std::vector<Matrix>&)>& loss, double h = 1e-5) {
  std::vector<Matrix> grads;
  for (std::size_t i = 0; i < params.size(); ++i) {
    Matrix g(params[i].rows(), params[i].cols());
    for (Eigen::Index k = 0; k < params[i].size(); ++k) {
      const double saved = params[i](k);
      params[i](k) = saved + h;
      const double up = loss(params);
      params[i](k) = saved - h;
      const double down = loss(params);
      params[i](k) = saved;
      g(k) = (up - down) / (2.0 * h);
    }
    grads.push_back(std::move(g));
  }
  return grads;
}

/// max |a - b| / max(1, |a|, |b|) over all entries.
inline double max_relative_error(const std::vector<Matrix>& a, const std::vector<Matrix>& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (Eigen::Index k = 0; k < a[i].size(); ++k) {
      const double scale = std::max({1.0, std::abs(a[i](k)), std::abs(b[i](k))});
      worst = std::max(worst, std::abs(a[i](k) - b[i](k)) / scale);
    }
  }
  return worst;
}

/// Scalar Adam written out term by term, with the bias corrections kept as
/// running products. Returns theta after each of `steps` steps on f = theta^2.
inline std::vector<double> reference_adam_trace(double theta, int steps, double lr0,
                                                double decay) {
  const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  double m = 0.0, v = 0.0, b1t = 1.0, b2t = 1.0;
  std::vector<double> out;
  for (int t = 1; t <= steps; ++t) {
    const double g = 2.0 * theta;
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g * g;
    b1t *= b1;
    b2t *= b2;
    const double mhat = m / (1.0 - b1t);
    const double vhat = v / (1.0 - b2t);
    theta -= lr0 / (1.0 + decay * t) * mhat / (std::sqrt(vhat) + eps);
    out.push_back(theta);
  }
  return out;
}

/// Two Gaussian blobs in the plane, centred at (-1.5, -1.5) and (1.5, 1.5)
/// with unit spread; labels alternate 0, 1.
inline LabeledSamples two_blobs(std::uint64_t seed, std::size_t n) {
  Rng rng(seed);
  LabeledSamples data;
  data.classes = 2;
  data.x.resize(2, static_cast<Eigen::Index>(n));
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t label = k % 2;
    const double centre = label == 0 ? -1.5 : 1.5;
    const auto c = static_cast<Eigen::Index>(k);
    data.x(0, c) = centre + rng.normal();
    data.x(1, c) = centre + rng.normal();
    data.labels.push_back(label);
  }
  return data;
}

/// Plain full-batch logistic regression; returns its training accuracy.
inline double logistic_regression_accuracy(const LabeledSamples& data, int iterations = 500) {
  double w0 = 0.0, w1 = 0.0, b = 0.0;
  const auto n = static_cast<double>(data.labels.size());
  for (int it = 0; it < iterations; ++it) {
    double g0 = 0.0, g1 = 0.0, gb = 0.0;
    for (Eigen::Index k = 0; k < data.x.cols(); ++k) {
      const double z = w0 * data.x(0, k) + w1 * data.x(1, k) + b;
      const double p = 1.0 / (1.0 + std::exp(-z));
      const double e = p - static_cast<double>(data.labels[static_cast<std::size_t>(k)]);
      g0 += e * data.x(0, k);
      g1 += e * data.x(1, k);
      gb += e;
    }
    w0 -= 0.5 * g0 / n;
    w1 -= 0.5 * g1 / n;
    b -= 0.5 * gb / n;
  }
  std::size_t correct = 0;
  for (Eigen::Index k = 0; k < data.x.cols(); ++k) {
    const double z = w0 * data.x(0, k) + w1 * data.x(1, k) + b;
    correct += static_cast<std::size_t>(z > 0.0) == data.labels[static_cast<std::size_t>(k)];
  }
  return static_cast<double>(correct) / n;
}

}  // namespace mgdl::testutil
