#include "mgdl/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "mgdl/errors.hpp"

namespace mgdl {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::vector<LayerSpec> parse_layers(const json& j, const std::string& where) {
  const auto widths = j.at("widths").get<std::vector<std::size_t>>();
  const auto acts = j.at("activations").get<std::vector<std::string>>();
  if (widths.size() < 2) throw ConfigError(where + ": widths needs at least 2 entries");
  if (acts.size() + 1 != widths.size()) {
    throw ConfigError(where + ": expected " + std::to_string(widths.size() - 1) +
                      " activations, got " + std::to_string(acts.size()));
  }
  std::vector<LayerSpec> layers;
  for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
    layers.push_back({widths[i], widths[i + 1], activation_from_string(acts[i])});
  }
  return layers;
}

json layers_json(const std::vector<LayerSpec>& layers) {
  std::vector<std::size_t> widths{layers.front().in_width};
  std::vector<std::string> acts;
  for (const LayerSpec& l : layers) {
    widths.push_back(l.out_width);
    acts.emplace_back(to_string(l.activation));
  }
  return {{"widths", widths}, {"activations", acts}};
}

DecayUnit parse_decay_unit(const std::string& s) {
  if (s == "step") return DecayUnit::PerStep;
  if (s == "epoch") return DecayUnit::PerEpoch;
  throw ConfigError("decay_unit must be 'step' or 'epoch', got '" + s + "'");
}

TrainParams parse_train(const json& j, const TrainParams& defaults) {
  TrainParams p = defaults;
  p.lr0 = j.value("lr", p.lr0);
  p.epochs = j.value("epochs", p.epochs);
  p.decay = j.value("decay", p.decay);
  p.batch_size = j.value("batch_size", p.batch_size);
  if (j.contains("decay_unit")) p.decay_unit = parse_decay_unit(j.at("decay_unit"));
  return p;
}

json train_json(const TrainParams& p) {
  return {{"lr", p.lr0},
          {"epochs", p.epochs},
          {"decay", p.decay},
          {"batch_size", p.batch_size},
          {"decay_unit", p.decay_unit == DecayUnit::PerStep ? "step" : "epoch"}};
}

json optional_number(const std::optional<double>& v) {
  return v ? json(*v) : json(nullptr);
}

json metrics_block(const MethodTotals& m) {
  return {{"training_time", m.train_seconds},
          {"mse_train", m.metrics.mse_train},
          {"rse_train", optional_number(m.metrics.rse_train)},
          {"mse_test", m.metrics.mse_test},
          {"rse_test", optional_number(m.metrics.rse_test)}};
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << text;
  out.close();
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace

void validate_experiment_config(const ExperimentConfig& config) {
  if (config.grades.empty()) throw ConfigError("config has no grades");
  if (config.stop.max_grades == 0) throw ConfigError("stop.max_grades must be >= 1");
  const std::size_t count = std::min(config.grades.size(), config.stop.max_grades);
  std::size_t width = 1;
  for (std::size_t i = 0; i < count; ++i) {
    const GradeConfig& g = config.grades[i];
    validate_grade_config(g, width, 1, i + 1);
    if (i + 1 < count) {
      if (g.strip_output_layer) {
        if (g.layers.size() < 2) {
          throw ConfigError("grade " + std::to_string(i + 1) +
                            " has a single layer; its output layer cannot be stripped");
        }
        width = g.layers[g.layers.size() - 2].out_width;
      } else {
        width = 1;
      }
    }
  }
  if (config.baseline) {
    validate_grade_config(GradeConfig{config.baseline->layers, config.baseline->train, {}, false},
                          1, 1, 0);
  }
}

ExperimentConfig parse_experiment_config(const json& j) {
  ExperimentConfig c;
  try {
    const int version = j.at("schema_version").get<int>();
    if (version != kConfigSchemaVersion) {
      throw ConfigError("unsupported schema_version " + std::to_string(version));
    }
    c.name = j.value("name", c.name);
    c.target = target_from_string(j.at("target").get<std::string>());
    c.noisy = j.value("noisy", false);
    c.seed = j.value("seed", c.seed);
    c.output_dir = j.value("output_dir", std::string());
    if (j.contains("data")) {
      const json& d = j.at("data");
      c.data.train_size = d.value("train_size", c.data.train_size);
      c.data.test_size = d.value("test_size", c.data.test_size);
      c.data.validation_fraction = d.value("validation_fraction", c.data.validation_fraction);
      c.data.train_noise_sigma = d.value("train_noise_sigma", c.data.train_noise_sigma);
      c.data.validation_noise_sigma =
          d.value("validation_noise_sigma", c.data.validation_noise_sigma);
    }
    TrainParams defaults;
    if (j.contains("defaults")) defaults = parse_train(j.at("defaults"), defaults);
    const bool strip = j.value("strip_output_layer", true);

    const json& grades = j.at("grades");
    for (std::size_t i = 0; i < grades.size(); ++i) {
      const json& g = grades[i];
      const std::string where = "grade " + std::to_string(i + 1);
      GradeConfig gc;
      gc.layers = parse_layers(g, where);
      gc.train = parse_train(g, defaults);
      gc.l1_lambdas = g.value("l1_lambdas", std::vector<double>{});
      gc.strip_output_layer = g.value("strip_output_layer", strip);
      c.grades.push_back(std::move(gc));
    }
    c.stop.max_grades = c.grades.size();
    if (j.contains("stop")) {
      const json& s = j.at("stop");
      c.stop.max_grades = s.value("max_grades", c.stop.max_grades);
      if (s.contains("tolerance") && !s.at("tolerance").is_null()) {
        c.stop.tolerance = s.at("tolerance").get<double>();
      }
    }
    if (j.contains("baseline") && !j.at("baseline").is_null()) {
      const json& b = j.at("baseline");
      c.baseline = BaselineConfig{parse_layers(b, "baseline"), parse_train(b, defaults)};
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed experiment config: ") + e.what());
  }
  validate_experiment_config(c);
  return c;
}

ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return parse_experiment_config(j);
}

json to_json(const ExperimentConfig& c) {
  json grades = json::array();
  for (const GradeConfig& g : c.grades) {
    json gj = layers_json(g.layers);
    gj.update(train_json(g.train));
    if (!g.l1_lambdas.empty()) gj["l1_lambdas"] = g.l1_lambdas;
    gj["strip_output_layer"] = g.strip_output_layer;
    grades.push_back(std::move(gj));
  }
  json j = {{"schema_version", kConfigSchemaVersion},
            {"name", c.name},
            {"target", std::string(to_string(c.target))},
            {"noisy", c.noisy},
            {"seed", c.seed},
            {"data",
             {{"train_size", c.data.train_size},
              {"test_size", c.data.test_size},
              {"validation_fraction", c.data.validation_fraction},
              {"train_noise_sigma", c.data.train_noise_sigma},
              {"validation_noise_sigma", c.data.validation_noise_sigma}}},
            {"grades", std::move(grades)},
            {"stop",
             {{"max_grades", c.stop.max_grades},
              {"tolerance", optional_number(c.stop.tolerance)}}}};
  if (c.baseline) {
    json b = layers_json(c.baseline->layers);
    b.update(train_json(c.baseline->train));
    j["baseline"] = std::move(b);
  } else {
    j["baseline"] = nullptr;
  }
  if (!c.output_dir.empty()) j["output_dir"] = c.output_dir;
  return j;
}

ExperimentReport run_experiment(const ExperimentConfig& config,
                                const GradeObserver& observer) {
  validate_experiment_config(config);
  const Dataset data = generate(config.target, config.noisy, config.seed, config.data);

  ExperimentReport r;
  r.name = config.name;
  r.seed = config.seed;
  r.target = config.target;
  r.noisy = config.noisy;
  r.test_x = data.test.x;
  r.test_y = data.test.y;

  MultiGradeRun run = run_multigrade(config.grades, data, config.stop, config.seed, observer);
  r.model = std::move(run.model);
  r.grades = std::move(run.reports);
  for (const GradeSummary& s : flatten_for_report(r.model)) r.architecture.push_back(s.text);

  for (const GradeReport& g : r.grades) r.multigrade.train_seconds += g.train_seconds;
  const Matrix train_pred = r.model.predict(data.train.x);
  for (std::size_t i = 1; i <= r.model.size(); ++i) {
    r.prefix_predictions.push_back(r.model.predict_prefix(data.test.x, i));
  }
  r.multigrade.metrics = compute_metrics(train_pred, r.prefix_predictions.back(), data);
  r.telescoping_violation =
      (data.train.y - train_pred - run.residuals.back().values).cwiseAbs().maxCoeff();
  for (std::size_t i = 0; i + 1 < run.residuals.size(); ++i) {
    if (posterior_error(run.residuals[i + 1]) > posterior_error(run.residuals[i])) {
      r.monotone_residuals = false;
    }
  }

  if (config.baseline) {
    SingleGradeRun single =
        run_singlegrade(config.baseline->layers, data, config.baseline->train, config.seed);
    Matrix test_pred = single.net.forward(data.test.x);
    r.baseline = MethodTotals{single.report.train_seconds,
                              compute_metrics(single.net.forward(data.train.x), test_pred, data)};
    r.baseline_predictions = std::move(test_pred);
    r.baseline_report = std::move(single.report);
    r.baseline_net = std::move(single.net);
  }

  if (!config.output_dir.empty()) emit_outputs(r, config.output_dir);
  return r;
}

json metrics_json(const ExperimentReport& r) {
  json grades = json::array();
  for (const GradeReport& g : r.grades) {
    grades.push_back({{"grade", g.grade},
                      {"learning_rate", g.learning_rate},
                      {"epochs", g.epochs},
                      {"training_time", g.train_seconds},
                      {"mse_train", g.mse_train},
                      {"rse_train", optional_number(g.rse_train)},
                      {"best_epoch", g.best_epoch},
                      {"zero_fallback", g.zero_fallback},
                      {"residual_norm", g.residual_norm_after},
                      {"pythagorean_slack", g.pythagorean_slack}});
  }
  json methods = {{"multi-grade", metrics_block(r.multigrade)}};
  if (r.baseline) methods["single-grade"] = metrics_block(*r.baseline);
  json j = {{"schema_version", kConfigSchemaVersion},
            {"name", r.name},
            {"seed", r.seed},
            {"target", std::string(to_string(r.target))},
            {"noisy", r.noisy},
            {"architecture", r.architecture},
            {"grades", std::move(grades)},
            {"methods", std::move(methods)},
            {"checks",
             {{"telescoping_max_violation", r.telescoping_violation},
              {"monotone_residuals", r.monotone_residuals}}}};
  if (r.baseline_report) {
    j["baseline"] = {{"learning_rate", r.baseline_report->learning_rate},
                     {"epochs", r.baseline_report->epochs},
                     {"best_epoch", r.baseline_report->best_epoch},
                     {"final_layer_init", "zero"}};
  }
  return j;
}

std::string loss_curves_csv(const ExperimentReport& r) {
  std::ostringstream out;
  out << "epoch,model,train_loss,validation_loss\n";
  auto emit = [&out](const std::string& model, const GradeReport& g) {
    for (std::size_t e = 0; e < g.loss_curve.size(); ++e) {
      out << e << ',' << model << ',' << format_double(g.loss_curve[e]) << ',';
      if (e < g.validation_curve.size()) out << format_double(g.validation_curve[e]);
      out << '\n';
    }
  };
  for (const GradeReport& g : r.grades) emit("grade" + std::to_string(g.grade), g);
  if (r.baseline_report) emit("single-grade", *r.baseline_report);
  return out.str();
}

std::string predictions_csv(const ExperimentReport& r) {
  if (r.test_x.rows() != 1 || r.test_y.rows() != 1) {
    throw UsageError("predictions.csv supports 1-D inputs and targets only");
  }
  std::ostringstream out;
  out << "x,y_true";
  for (std::size_t i = 1; i <= r.prefix_predictions.size(); ++i) {
    out << ",after_grade_" << i;
  }
  if (r.baseline_predictions) out << ",single_grade";
  out << '\n';
  for (Eigen::Index k = 0; k < r.test_x.cols(); ++k) {
    out << format_double(r.test_x(0, k)) << ',' << format_double(r.test_y(0, k));
    for (const Matrix& p : r.prefix_predictions) out << ',' << format_double(p(0, k));
    if (r.baseline_predictions) out << ',' << format_double((*r.baseline_predictions)(0, k));
    out << '\n';
  }
  return out.str();
}

void emit_outputs(const ExperimentReport& r, const std::string& dir) {
  const fs::path root(dir);
  const fs::path marker = root / "INCOMPLETE";
  try {
    fs::create_directories(root);
    write_text(marker, "outputs are being written\n");
    write_text(root / "metrics.json", metrics_json(r).dump(2) + "\n");
    write_text(root / "loss_curves.csv", loss_curves_csv(r));
    write_text(root / "predictions.csv", predictions_csv(r));
    write_text(root / "model.json", to_json(r.model).dump() + "\n");
    if (r.baseline_net) {
      write_text(root / "baseline_model.json", to_json(*r.baseline_net).dump() + "\n");
    }
    fs::remove(marker);
  } catch (const fs::filesystem_error& e) {
    throw IoError(e.what());
  }
}

CompareResult compare_summary(const std::vector<json>& metrics) {
  if (metrics.empty()) throw UsageError("compare needs at least one report");
  static const char* kFields[] = {"training_time", "mse_train", "rse_train",
                                  "mse_test", "rse_test"};
  // method -> field -> values
  std::map<std::string, std::map<std::string, std::vector<double>>> values;
  json runs = json::array();
  try {
    for (const json& m : metrics) {
      runs.push_back({{"name", m.value("name", std::string())},
                      {"seed", m.value("seed", std::uint64_t{0})},
                      {"methods", m.at("methods")}});
      for (const auto& [method, block] : m.at("methods").items()) {
        for (const char* f : kFields) {
          if (block.contains(f) && block.at(f).is_number()) {
            values[method][f].push_back(block.at(f).get<double>());
          }
        }
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed metrics document: ") + e.what());
  }

  std::ostringstream table;
  table << std::left << std::setw(14) << "method" << std::setw(15) << "metric"
        << std::right << std::setw(14) << "mean" << std::setw(14) << "min"
        << std::setw(14) << "max" << std::setw(4) << "n" << '\n';
  json summary = json::object();
  for (const auto& [method, fields] : values) {
    for (const char* f : kFields) {
      auto it = fields.find(f);
      if (it == fields.end()) continue;
      const std::vector<double>& v = it->second;
      double sum = 0.0;
      for (double x : v) sum += x;
      const double mean = sum / static_cast<double>(v.size());
      const double lo = *std::min_element(v.begin(), v.end());
      const double hi = *std::max_element(v.begin(), v.end());
      summary[method][f] = {{"mean", mean}, {"min", lo}, {"max", hi}, {"n", v.size()}};
      char buf[3][32];
      std::snprintf(buf[0], sizeof buf[0], "%.4e", mean);
      std::snprintf(buf[1], sizeof buf[1], "%.4e", lo);
      std::snprintf(buf[2], sizeof buf[2], "%.4e", hi);
      table << std::left << std::setw(14) << method << std::setw(15) << f << std::right
            << std::setw(14) << buf[0] << std::setw(14) << buf[1] << std::setw(14)
            << buf[2] << std::setw(4) << v.size() << '\n';
    }
  }
  return CompareResult{table.str(), {{"runs", std::move(runs)}, {"summary", std::move(summary)}}};
}

}  // namespace mgdl
