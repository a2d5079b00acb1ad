#include "mgdl/multigrade.hpp"

#include <chrono>
#include <cmath>
#include <string>

#include "mgdl/errors.hpp"
#include "mgdl/random.hpp"

namespace mgdl {

AdamConfig TrainParams::adam() const {
  AdamConfig c;
  c.lr0 = lr0;
  c.decay = decay;
  c.decay_unit = decay_unit;
  return c;
}

void TrainParams::validate() const {
  adam().validate();
  if (batch_size == 0) throw ConfigError("batch size must be positive");
}

ResidualSet ResidualSet::from_targets(const Matrix& y) {
  return ResidualSet{0, y, y.squaredNorm()};
}

double posterior_error(const ResidualSet& residuals) {
  if (residuals.values.size() == 0) {
    throw UsageError("posterior error of an empty residual set");
  }
  return residuals.values.norm();
}

ShallowNet initialize_grade_net(const std::vector<LayerSpec>& layers,
                                std::uint64_t seed) {
  ShallowNet zero = ShallowNet::zeros(layers);
  std::vector<Matrix> w = zero.weights();
  std::vector<Vector> b = zero.biases();
  Rng rng(seed);
  for (std::size_t j = 0; j + 1 < layers.size(); ++j) {
    const double limit = std::sqrt(
        6.0 / static_cast<double>(layers[j].in_width + layers[j].out_width));
    for (Eigen::Index r = 0; r < w[j].rows(); ++r) {
      for (Eigen::Index c = 0; c < w[j].cols(); ++c) {
        w[j](r, c) = rng.uniform(-limit, limit);
      }
    }
  }
  return ShallowNet(layers, std::move(w), std::move(b));
}

void validate_grade_config(const GradeConfig& config, std::size_t in_width,
                           std::size_t out_width, std::size_t grade) {
  const std::string where = grade == 0 ? std::string("single-grade network")
                                       : "grade " + std::to_string(grade);
  if (config.layers.empty()) throw ConfigError(where + " has no layers");
  try {
    ShallowNet::zeros(config.layers);
  } catch (const ShapeError& e) {
    throw ShapeError(where + ": " + e.what());
  }
  if (config.layers.front().in_width != in_width) {
    throw ShapeError(where + " expects input width " +
                     std::to_string(config.layers.front().in_width) +
                     " but receives " + std::to_string(in_width));
  }
  if (config.layers.back().out_width != out_width) {
    throw ShapeError(where + " outputs width " +
                     std::to_string(config.layers.back().out_width) +
                     " but the target width is " + std::to_string(out_width));
  }
  if (config.layers.back().activation != ActivationKind::Identity) {
    throw ConfigError(where + ": the final layer must use the identity activation");
  }
  if (!config.l1_lambdas.empty()) {
    if (config.l1_lambdas.size() != config.layers.size()) {
      throw ConfigError(where + ": expected one l1 lambda per layer");
    }
    for (double l : config.l1_lambdas) {
      if (!(l >= 0.0)) throw ConfigError(where + ": l1 lambdas must be >= 0");
    }
  }
  config.train.validate();
}

namespace {

using Clock = std::chrono::steady_clock;

enum class LossKind { Mse, CrossEntropy };

// Inputs plus either regression targets (Mse) or logit offsets with labels
// (CrossEntropy).
struct FitSet {
  Matrix inputs;
  Matrix targets;
  std::vector<std::size_t> labels;
};

struct FitResult {
  std::vector<Matrix> params;
  std::vector<double> loss_curve;
  std::vector<double> validation_curve;
  std::size_t best_epoch = 0;
  double best_loss = 0.0;
  double seconds = 0.0;
  std::int64_t steps = 0;
};

Matrix forward_flat(const std::vector<LayerSpec>& layers,
                    const std::vector<Matrix>& params, const Matrix& x) {
  Matrix h = x;
  for (std::size_t j = 0; j < layers.size(); ++j) {
    Matrix z = params[2 * j] * h;
    z.colwise() += params[2 * j + 1].col(0);
    h = activate(layers[j].activation, z);
  }
  return h;
}

double column_cross_entropy(const Matrix& logits,
                            const std::vector<std::size_t>& labels) {
  std::vector<Vector> cols;
  cols.reserve(static_cast<std::size_t>(logits.cols()));
  for (Eigen::Index k = 0; k < logits.cols(); ++k) cols.emplace_back(logits.col(k));
  return cross_entropy_loss(cols, labels);
}

double full_loss(const std::vector<LayerSpec>& layers,
                 const std::vector<Matrix>& params, const FitSet& set,
                 LossKind kind) {
  Matrix out = forward_flat(layers, params, set.inputs);
  if (kind == LossKind::Mse) {
    return (out - set.targets).squaredNorm() / static_cast<double>(out.cols());
  }
  out += set.targets;
  return column_cross_entropy(out, set.labels);
}

FitResult fit(const std::vector<LayerSpec>& layers, std::vector<Matrix> params,
              const FitSet& train, const FitSet* validation, LossKind kind,
              const TrainParams& tp, const std::vector<double>& lambdas,
              std::uint64_t shuffle_seed, int grade) {
  const AdamConfig adam = tp.adam();
  AdamState state(params);
  FitResult r;
  const auto start = Clock::now();

  auto check = [&](double loss, const char* what) {
    if (!std::isfinite(loss)) {
      throw TrainingError(std::string("non-finite ") + what, grade,
                          state.step_count());
    }
  };

  r.best_loss = full_loss(layers, params, train, kind);
  check(r.best_loss, "training loss");
  r.loss_curve.push_back(r.best_loss);
  r.params = params;
  if (validation) {
    r.validation_curve.push_back(full_loss(layers, params, *validation, kind));
  }

  const auto n = static_cast<std::size_t>(train.inputs.cols());
  Tape tape;
  for (std::size_t epoch = 1; epoch <= tp.epochs; ++epoch) {
    state.set_epoch(static_cast<std::int64_t>(epoch - 1));
    const auto batches =
        make_batches(n, BatchPlan{tp.batch_size, shuffle_seed, epoch - 1});
    for (const auto& idx : batches) {
      tape.clear();
      Tape::Var h = tape.constant(train.inputs(Eigen::all, idx));
      std::vector<Tape::Var> weights;
      for (std::size_t j = 0; j < layers.size(); ++j) {
        Tape::Var w = tape.parameter_view(params[2 * j]);
        Tape::Var b = tape.parameter_view(params[2 * j + 1]);
        weights.push_back(w);
        h = tape.add_bias(tape.matmul(w, h), b);
        if (layers[j].activation != ActivationKind::Identity) {
          h = tape.activate(layers[j].activation, h);
        }
      }
      Tape::Var loss;
      if (kind == LossKind::Mse) {
        loss = tape.mse(h, train.targets(Eigen::all, idx));
      } else {
        h = tape.add(h, tape.constant(train.targets(Eigen::all, idx)));
        std::vector<std::size_t> labels;
        labels.reserve(idx.size());
        for (std::size_t k : idx) labels.push_back(train.labels[k]);
        loss = tape.cross_entropy(h, std::move(labels));
      }
      for (std::size_t j = 0; j < lambdas.size(); ++j) {
        if (lambdas[j] > 0.0) loss = tape.add(loss, tape.l1(weights[j], lambdas[j]));
      }
      check(tape.value(loss)(0, 0), "batch loss");
      const std::vector<Matrix> grads = tape.backward(loss);
      try {
        adam_step(state, adam, params, grads);
      } catch (const TrainingError& e) {
        throw TrainingError("non-finite gradient", grade, e.step());
      }
    }
    const double loss = full_loss(layers, params, train, kind);
    check(loss, "training loss");
    r.loss_curve.push_back(loss);
    if (validation) {
      r.validation_curve.push_back(full_loss(layers, params, *validation, kind));
    }
    if (loss < r.best_loss) {
      r.best_loss = loss;
      r.params = params;
      r.best_epoch = epoch;
    }
  }
  r.seconds = std::chrono::duration<double>(Clock::now() - start).count();
  r.steps = state.step_count();
  return r;
}

std::string stream_name(std::size_t grade, const char* what) {
  return "grade/" + std::to_string(grade) + "/" + what;
}

GradeReport base_report(std::size_t grade, const TrainParams& tp,
                        const FitResult& r) {
  GradeReport rep;
  rep.grade = grade;
  rep.learning_rate = tp.lr0;
  rep.epochs = tp.epochs;
  rep.steps = r.steps;
  rep.train_seconds = r.seconds;
  rep.final_loss = r.best_loss;
  rep.loss_curve = r.loss_curve;
  rep.validation_curve = r.validation_curve;
  rep.best_epoch = r.best_epoch;
  rep.zero_fallback = r.best_epoch == 0;
  return rep;
}

// Trains grade `grade` on features already pushed through the frozen stack.
GradeOutcome fit_grade(const FrozenStack& stack, const Matrix& features,
                       const ResidualSet& residuals, const GradeConfig& config,
                       std::uint64_t seed, std::size_t grade,
                       const FitSet* validation) {
  validate_grade_config(config, stack.output_width(),
                        static_cast<std::size_t>(residuals.values.rows()), grade);
  if (features.cols() != residuals.values.cols()) {
    throw ShapeError("grade " + std::to_string(grade) + ": " +
                     std::to_string(features.cols()) + " inputs but " +
                     std::to_string(residuals.values.cols()) + " residuals");
  }
  if (features.cols() == 0) throw UsageError("training set is empty");

  const ShallowNet init =
      initialize_grade_net(config.layers, derive_seed(seed, stream_name(grade, "init")));
  const FitSet train{features, residuals.values, {}};
  FitResult r = fit(config.layers, init.flat_parameters(), train, validation,
                    LossKind::Mse, config.train, config.l1_lambdas,
                    derive_seed(seed, stream_name(grade, "shuffle")),
                    static_cast<int>(grade));

  ShallowNet net = ShallowNet::from_flat(config.layers, r.params);
  const Matrix contribution = net.forward(features);

  GradeOutcome out{GradeRecord{std::move(net), stack, config.strip_output_layer},
                   ResidualSet{grade, residuals.values - contribution,
                               residuals.target_energy},
                   base_report(grade, config.train, r)};
  GradeReport& rep = out.report;
  const double before = residuals.values.squaredNorm();
  const double after = out.residuals.values.squaredNorm();
  const auto n = static_cast<double>(features.cols());
  rep.mse_train = after / n;
  if (residuals.target_energy > 0.0) rep.rse_train = after / residuals.target_energy;
  rep.residual_norm_before = std::sqrt(before);
  rep.residual_norm_after = std::sqrt(after);
  rep.pythagorean_slack = before - contribution.squaredNorm() - after;
  rep.nontrivial = (contribution.array() != 0.0).any();
  return out;
}

}  // namespace

GradeOutcome train_grade(const FrozenStack& stack, const Matrix& train_x,
                         const ResidualSet& residuals, const GradeConfig& config,
                         std::uint64_t seed, std::size_t grade) {
  return fit_grade(stack, stack.forward(train_x), residuals, config, seed, grade,
                   nullptr);
}

MultiGradeRun run_multigrade(const std::vector<GradeConfig>& grades,
                             const Dataset& data, const StopRule& stop,
                             std::uint64_t seed, const GradeObserver& observer) {
  if (grades.empty()) throw ConfigError("at least one grade is required");
  if (stop.max_grades == 0) throw ConfigError("max_grades must be at least 1");
  const auto s = static_cast<std::size_t>(data.train.x.rows());
  const auto t = static_cast<std::size_t>(data.train.y.rows());
  const std::size_t count = std::min(grades.size(), stop.max_grades);

  // Validate every width before any training.
  {
    std::size_t width = s;
    for (std::size_t i = 0; i < count; ++i) {
      validate_grade_config(grades[i], width, t, i + 1);
      if (i + 1 < count) {
        if (grades[i].strip_output_layer && grades[i].layers.size() < 2) {
          throw ConfigError("grade " + std::to_string(i + 1) +
                            " has a single layer; its output layer cannot be stripped");
        }
        width = grades[i].strip_output_layer
                    ? grades[i].layers[grades[i].layers.size() - 2].out_width
                    : t;
      }
    }
  }

  MultiGradeRun run{MultiGradeModel(s, t), {}, {}};
  run.residuals.push_back(ResidualSet::from_targets(data.train.y));

  const bool has_validation = data.validation.x.cols() > 0;
  Matrix features = data.train.x;
  FitSet validation{data.validation.x, data.validation.y, {}};
  FrozenStack stack(s);

  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t grade = i + 1;
    if (observer) observer(TrainEvent::BeforeGrade, grade, run.model);
    GradeOutcome outcome =
        fit_grade(stack, features, run.residuals.back(), grades[i], seed, grade,
                  has_validation ? &validation : nullptr);
    const ShallowNet next = grades[i].strip_output_layer && i + 1 < count
                                ? strip_output_layer(outcome.record.net)
                                : outcome.record.net;
    if (i + 1 < count) {
      if (has_validation) {
        validation.targets -= outcome.record.net.forward(validation.inputs);
        validation.inputs = next.forward(validation.inputs);
      }
      features = next.forward(features);
      stack = stack.then(next);
    }
    run.model.append(std::move(outcome.record));
    run.reports.push_back(std::move(outcome.report));
    run.residuals.push_back(std::move(outcome.residuals));
    if (observer) observer(TrainEvent::AfterGrade, grade, run.model);
    if (stop.tolerance && posterior_error(run.residuals.back()) <= *stop.tolerance) {
      break;
    }
  }
  return run;
}

SingleGradeRun run_singlegrade(const std::vector<LayerSpec>& arch,
                               const Dataset& data, const TrainParams& params,
                               std::uint64_t seed) {
  const auto s = static_cast<std::size_t>(data.train.x.rows());
  const auto t = static_cast<std::size_t>(data.train.y.rows());
  validate_grade_config(GradeConfig{arch, params, {}, false}, s, t, 0);
  if (data.train.x.cols() == 0) throw UsageError("training set is empty");

  const ShallowNet init = initialize_grade_net(arch, derive_seed(seed, "baseline/init"));
  const FitSet train{data.train.x, data.train.y, {}};
  const FitSet validation{data.validation.x, data.validation.y, {}};
  FitResult r = fit(arch, init.flat_parameters(), train,
                    data.validation.x.cols() > 0 ? &validation : nullptr,
                    LossKind::Mse, params, {}, derive_seed(seed, "baseline/shuffle"), 0);

  SingleGradeRun run{ShallowNet::from_flat(arch, r.params), base_report(0, params, r)};
  const Matrix pred = run.net.forward(data.train.x);
  const SplitError e = split_error(pred, data.train.y);
  run.report.mse_train = e.mse;
  run.report.rse_train = e.rse;
  run.report.residual_norm_before = data.train.y.norm();
  run.report.residual_norm_after = (data.train.y - pred).norm();
  run.report.nontrivial = (pred.array() != 0.0).any();
  return run;
}

std::vector<std::size_t> predict_classes(const MultiGradeModel& model,
                                         const Matrix& x) {
  const Matrix logits = model.predict(x);
  std::vector<std::size_t> out(static_cast<std::size_t>(logits.cols()));
  for (Eigen::Index k = 0; k < logits.cols(); ++k) {
    Eigen::Index best = 0;
    logits.col(k).maxCoeff(&best);
    out[static_cast<std::size_t>(k)] = static_cast<std::size_t>(best);
  }
  return out;
}

ClassificationRun run_multigrade_classification(
    const std::vector<GradeConfig>& grades, const LabeledSamples& data,
    const StopRule& stop, std::uint64_t seed) {
  if (grades.empty()) throw ConfigError("at least one grade is required");
  if (stop.max_grades == 0) throw ConfigError("max_grades must be at least 1");
  if (data.classes < 2) throw ConfigError("classification needs at least 2 classes");
  if (data.labels.size() != static_cast<std::size_t>(data.x.cols())) {
    throw ShapeError("label count does not match sample count");
  }
  if (data.labels.empty()) throw UsageError("training set is empty");
  for (std::size_t label : data.labels) {
    if (label >= data.classes) {
      throw UsageError("label " + std::to_string(label) + " out of range for " +
                       std::to_string(data.classes) + " classes");
    }
  }
  const auto s = static_cast<std::size_t>(data.x.rows());
  const std::size_t t = data.classes;
  const std::size_t count = std::min(grades.size(), stop.max_grades);

  ClassificationRun run{MultiGradeModel(s, t), {}, {}};
  FitSet train{data.x, Matrix::Zero(static_cast<Eigen::Index>(t), data.x.cols()),
               data.labels};
  FrozenStack stack(s);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t grade = i + 1;
    const GradeConfig& config = grades[i];
    validate_grade_config(config, stack.output_width(), t, grade);
    const ShallowNet init = initialize_grade_net(
        config.layers, derive_seed(seed, stream_name(grade, "init")));
    FitResult r = fit(config.layers, init.flat_parameters(), train, nullptr,
                      LossKind::CrossEntropy, config.train, config.l1_lambdas,
                      derive_seed(seed, stream_name(grade, "shuffle")),
                      static_cast<int>(grade));
    ShallowNet net = ShallowNet::from_flat(config.layers, r.params);
    const Matrix contribution = net.forward(train.inputs);
    train.targets += contribution;

    GradeReport rep = base_report(grade, config.train, r);
    rep.nontrivial = (contribution.array() != 0.0).any();
    std::size_t correct = 0;
    for (Eigen::Index k = 0; k < train.targets.cols(); ++k) {
      Eigen::Index best = 0;
      train.targets.col(k).maxCoeff(&best);
      correct += static_cast<std::size_t>(best) == data.labels[static_cast<std::size_t>(k)];
    }
    run.accuracy.push_back(static_cast<double>(correct) /
                           static_cast<double>(data.labels.size()));

    if (i + 1 < count) {
      if (config.strip_output_layer && config.layers.size() < 2) {
        throw ConfigError("grade " + std::to_string(grade) +
                          " has a single layer; its output layer cannot be stripped");
      }
      const ShallowNet next =
          config.strip_output_layer ? strip_output_layer(net) : net;
      train.inputs = next.forward(train.inputs);
      run.model.append(GradeRecord{std::move(net), stack, config.strip_output_layer});
      stack = stack.then(next);
    } else {
      run.model.append(GradeRecord{std::move(net), stack, config.strip_output_layer});
    }
    run.reports.push_back(std::move(rep));
    if (stop.tolerance && r.best_loss <= *stop.tolerance) break;
  }
  return run;
}

}  // namespace mgdl
