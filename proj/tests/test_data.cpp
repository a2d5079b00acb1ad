#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <numbers>
#include <set>

#include "mgdl/data.hpp"
#include "mgdl/errors.hpp"
#include "mgdl/random.hpp"
#include "test_support.hpp"

using namespace mgdl;

TEST(EvalTarget, Examples) {
  EXPECT_DOUBLE_EQ(eval_target(TargetFunction::Sin100, std::numbers::pi / 200), 1.0);
  EXPECT_EQ(eval_target(TargetFunction::XSin100, 0.0), 0.0);
  EXPECT_EQ(eval_target(TargetFunction::Composed, -1.0), 0.0);
}

TEST(EvalTarget, ComposedByHand) {
  const double f1 = std::abs(std::cos(0.0) - 0.7);                          // 0.3
  const double f2 = std::abs(std::cos(2 * std::numbers::pi * (f1 - 0.5)) - 0.5);
  const double f3 = -std::abs(f2 - 1.3) + 1.3;
  const double f4 = -std::abs(f3 - 0.9) + 0.9;
  EXPECT_NEAR(f4, 0.19098300562505, 1e-12);
  EXPECT_NEAR(eval_target(TargetFunction::Composed, 0.3), 1.3 * f4, 1e-15);
}

TEST(EvalTarget, OutsideDomain) {
  EXPECT_THROW(eval_target(TargetFunction::Sin100, -0.01), DomainError);
  EXPECT_THROW(eval_target(TargetFunction::XSin100, 1.5), DomainError);
  EXPECT_THROW(eval_target(TargetFunction::Composed, -1.01), DomainError);
  EXPECT_NO_THROW(eval_target(TargetFunction::Composed, 1.0));
}

TEST(EvalTarget, NamesRoundTrip) {
  for (auto t : {TargetFunction::Sin100, TargetFunction::XSin100, TargetFunction::Composed}) {
    EXPECT_EQ(target_from_string(to_string(t)), t);
  }
  EXPECT_THROW(target_from_string("cos"), ConfigError);
}

TEST(Linspace, GridProperty) {
  const auto g = linspace(-1.0, 1.0, 5000);
  ASSERT_EQ(g.size(), 5000u);
  EXPECT_EQ(g.front(), -1.0);
  EXPECT_EQ(g.back(), 1.0);
  const double step = 2.0 / 4999.0;
  for (std::size_t i = 1; i < g.size(); ++i) EXPECT_NEAR(g[i] - g[i - 1], step, 1e-12);
  EXPECT_EQ(linspace(0.0, 1.0, 1), std::vector<double>{0.0});
}

TEST(Generate, CleanSin100) {
  const Dataset d = generate(TargetFunction::Sin100, false, 1);
  EXPECT_EQ(d.train.size(), 5000u);
  EXPECT_EQ(d.test.size(), 1000u);
  EXPECT_EQ(d.train.y(0, 0), 0.0);
  const Eigen::Index mid = 2500;
  EXPECT_EQ(d.train.y(0, mid), std::sin(100.0 * d.train.x(0, mid)));
  EXPECT_EQ(d.test.x(0, 999), 1.0);
  for (Eigen::Index k = 0; k < 1000; ++k) {
    EXPECT_EQ(d.test.y(0, k), eval_target(TargetFunction::Sin100, d.test.x(0, k)));
  }
  EXPECT_EQ(d.noise_sigma, 0.0);
}

TEST(Generate, Deterministic) {
  const Dataset a = generate(TargetFunction::XSin100, true, 42);
  const Dataset b = generate(TargetFunction::XSin100, true, 42);
  EXPECT_EQ(a.train.y, b.train.y);
  EXPECT_EQ(a.validation.y, b.validation.y);
  EXPECT_EQ(a.validation_indices, b.validation_indices);
  const Dataset c = generate(TargetFunction::XSin100, true, 43);
  EXPECT_NE(a.train.y, c.train.y);
}

TEST(Generate, NoiseStatistics) {
  for (auto target : {TargetFunction::Sin100, TargetFunction::XSin100, TargetFunction::Composed}) {
    for (std::uint64_t seed : {1, 2, 3}) {
      const Dataset d = generate(target, true, seed);
      EXPECT_EQ(d.noise_sigma, 0.05);
      double sum = 0.0, sq = 0.0;
      const auto n = static_cast<double>(d.train.size());
      for (Eigen::Index k = 0; k < d.train.x.cols(); ++k) {
        const double e = d.train.y(0, k) - eval_target(target, d.train.x(0, k));
        sum += e;
        sq += e * e;
      }
      const double mean = sum / n;
      const double sd = std::sqrt(sq / n - mean * mean);
      EXPECT_LE(std::abs(mean), 0.005);
      EXPECT_GE(sd, 0.045);
      EXPECT_LE(sd, 0.055);
    }
  }
}

TEST(Generate, ValidationSubset) {
  const Dataset d = generate(TargetFunction::Composed, false, 5);
  ASSERT_EQ(d.validation_indices.size(), 1000u);
  EXPECT_EQ(d.validation.size(), 1000u);
  const std::set<std::size_t> unique(d.validation_indices.begin(), d.validation_indices.end());
  EXPECT_EQ(unique.size(), 1000u);
  EXPECT_LT(*unique.rbegin(), 5000u);
  double sq = 0.0;
  for (std::size_t i = 0; i < d.validation_indices.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(d.validation_indices[i]);
    const auto v = static_cast<Eigen::Index>(i);
    EXPECT_EQ(d.validation.x(0, v), d.train.x(0, k));
    const double e = d.validation.y(0, v) - d.train.y(0, k);
    sq += e * e;
  }
  const double sd = std::sqrt(sq / 1000.0);
  EXPECT_GT(sd, 0.008);
  EXPECT_LT(sd, 0.012);

  DataOptions small;
  small.train_size = 7;
  small.test_size = 3;
  EXPECT_EQ(generate(TargetFunction::Sin100, false, 1, small).validation_indices.size(), 1u);
}

TEST(SplitError, Definitions) {
  const Matrix y = (Matrix(1, 4) << 1, -2, 3, 0.5).finished();
  const SplitError perfect = split_error(y, y);
  EXPECT_EQ(perfect.mse, 0.0);
  EXPECT_EQ(perfect.rse, 0.0);
  EXPECT_EQ(split_error(Matrix::Zero(1, 4), y).rse, 1.0);
  const SplitError undefined = split_error(y, Matrix::Zero(1, 4));
  EXPECT_FALSE(undefined.rse.has_value());
  EXPECT_THROW(split_error(Matrix::Zero(1, 3), y), ShapeError);
}

TEST(SplitError, MatchesDirectSums) {
  std::mt19937_64 rng(9);
  const Matrix y = testutil::random_matrix(rng, 2, 300);
  const Matrix p = testutil::random_matrix(rng, 2, 300);
  double num = 0.0, den = 0.0;
  for (Eigen::Index k = 0; k < y.cols(); ++k) {
    for (Eigen::Index r = 0; r < y.rows(); ++r) {
      num += (p(r, k) - y(r, k)) * (p(r, k) - y(r, k));
      den += y(r, k) * y(r, k);
    }
  }
  const SplitError e = split_error(p, y);
  EXPECT_NEAR(e.mse, num / 300.0, 1e-13);
  EXPECT_NEAR(*e.rse, num / den, 1e-13);
  EXPECT_LE(std::abs(e.mse * 300.0 - *e.rse * den) / (e.mse * 300.0), 1e-12);
}

TEST(ComputeMetrics, PerfectAndZero) {
  const Dataset d = generate(TargetFunction::XSin100, true, 3);
  const Metrics perfect = compute_metrics(d.train.y, d.test.y, d);
  EXPECT_EQ(perfect.mse_train, 0.0);
  EXPECT_EQ(perfect.mse_test, 0.0);
  EXPECT_EQ(perfect.rse_train, 0.0);
  EXPECT_EQ(perfect.rse_test, 0.0);
  const Metrics zero = compute_metrics(Matrix::Zero(1, 5000), Matrix::Zero(1, 1000), d);
  EXPECT_EQ(zero.rse_train, 1.0);
  EXPECT_EQ(zero.rse_test, 1.0);
}

TEST(DatasetCsv, RoundTrip) {
  const Dataset d = generate(TargetFunction::Composed, true, 11);
  const auto path = std::filesystem::temp_directory_path() / "mgdl_dataset.csv";
  write_dataset_csv(d, path.string());
  const Dataset back = read_dataset_csv(path.string());
  std::filesystem::remove(path);
  EXPECT_EQ(back.train.x, d.train.x);
  EXPECT_EQ(back.train.y, d.train.y);
  EXPECT_EQ(back.test.y, d.test.y);
  EXPECT_EQ(back.validation.y, d.validation.y);
  EXPECT_THROW(read_dataset_csv(path.string()), IoError);
}

TEST(FormatDouble, ShortestRoundTrip) {
  for (double v : {0.1, 1.0 / 3.0, 5e-324, -2.5e300, 0.0}) {
    EXPECT_EQ(std::strtod(format_double(v).c_str(), nullptr), v);
  }
  EXPECT_EQ(format_double(0.1), "0.1");
}

TEST(Random, PortableStreams) {
  EXPECT_NE(derive_seed(1, "grade/1/init"), derive_seed(1, "grade/2/init"));
  EXPECT_NE(derive_seed(1, "grade/1/init"), derive_seed(2, "grade/1/init"));
  EXPECT_EQ(derive_seed(7, "x"), derive_seed(7, "x"));
  Rng rng(5);
  double sum = 0.0, sq = 0.0;
  for (int i = 0; i < 20000; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    const double z = rng.normal();
    sum += z;
    sq += z * z;
  }
  EXPECT_NEAR(sum / 20000, 0.0, 0.03);
  EXPECT_NEAR(sq / 20000, 1.0, 0.05);
  for (int i = 0; i < 1000; ++i) ASSERT_LT(rng.below(3), 3u);
}
