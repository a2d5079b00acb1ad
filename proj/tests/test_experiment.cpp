#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "mgdl/errors.hpp"
#include "mgdl/experiment.hpp"

using namespace mgdl;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const char* kShipped[] = {"example1_clean", "example1_noisy", "example2_clean",
                          "example2_noisy", "example3_clean", "example3_noisy"};

fs::path shipped(const std::string& name) {
  return fs::path(MGDL_SOURCE_DIR) / "configs" / (name + ".json");
}

json tiny_json() {
  return json::parse(R"({
    "schema_version": 1,
    "name": "tiny",
    "target": "composed",
    "noisy": true,
    "seed": 3,
    "data": {"train_size": 200, "test_size": 50},
    "defaults": {"batch_size": 16, "decay": 0.01},
    "grades": [
      {"widths": [1, 16, 16, 1], "activations": ["sin", "sin", "identity"], "lr": 0.05, "epochs": 4},
      {"widths": [16, 8, 1], "activations": ["relu", "identity"], "lr": 0.01, "epochs": 3}
    ],
    "stop": {"max_grades": 2, "tolerance": null},
    "baseline": {"widths": [1, 16, 8, 1], "activations": ["sin", "relu", "identity"],
                 "lr": 0.01, "epochs": 5}
  })");
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t count_lines(const std::string& text, const std::string& needle = "") {
  std::istringstream in(text);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) n += needle.empty() || line.find(needle) != std::string::npos;
  return n;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("mgdl_test_" + name);
  fs::remove_all(p);
  return p;
}

/// metrics.json with timing fields removed.
json without_timing(json m) {
  for (auto& [name, block] : m.at("methods").items()) block.erase("training_time");
  for (auto& g : m.at("grades")) g.erase("training_time");
  return m;
}

}  // namespace

TEST(ExperimentConfig, ShippedConfigsParse) {
  for (const char* name : kShipped) {
    const ExperimentConfig c = load_experiment_config(shipped(name).string());
    EXPECT_EQ(c.name, name);
    EXPECT_EQ(c.grades.size(), 3u);
    ASSERT_TRUE(c.baseline.has_value());
    EXPECT_EQ(c.seed, 1u);
    EXPECT_EQ(c.grades[0].train.lr0, 0.1);
    EXPECT_EQ(c.grades[1].train.lr0, 0.01);
    for (const GradeConfig& g : c.grades) {
      EXPECT_EQ(g.train.batch_size, 32u);
      EXPECT_EQ(g.train.decay, 0.01);
      EXPECT_TRUE(g.strip_output_layer);
    }
    EXPECT_EQ(c.noisy, std::string(name).ends_with("noisy"));
  }
  EXPECT_EQ(load_experiment_config(shipped("example1_clean").string()).baseline->train.epochs,
            550u);
  EXPECT_EQ(load_experiment_config(shipped("example2_noisy").string()).baseline->train.epochs,
            800u);
  EXPECT_EQ(load_experiment_config(shipped("example3_clean").string()).baseline->train.epochs,
            500u);
  EXPECT_EQ(load_experiment_config(shipped("example3_noisy").string()).grades[2].train.epochs,
            25u);
}

TEST(ExperimentConfig, JsonRoundTrip) {
  const ExperimentConfig c = parse_experiment_config(tiny_json());
  const ExperimentConfig back = parse_experiment_config(to_json(c));
  EXPECT_EQ(to_json(back), to_json(c));
  EXPECT_EQ(back.data.train_size, 200u);
  EXPECT_EQ(back.grades[1].layers.front().in_width, 16u);
}

TEST(ExperimentConfig, Rejections) {
  json j = tiny_json();
  j["grades"][1]["widths"] = {8, 8, 1};  // grade 1 leaves width 16
  EXPECT_THROW(parse_experiment_config(j), ShapeError);

  j = tiny_json();
  j["grades"][0]["strip_output_layer"] = false;  // grade 2 must then read width 1
  EXPECT_THROW(parse_experiment_config(j), ShapeError);
  j["grades"][1]["widths"] = {1, 8, 1};
  EXPECT_NO_THROW(parse_experiment_config(j));

  j = tiny_json();
  j["schema_version"] = 2;
  EXPECT_THROW(parse_experiment_config(j), ConfigError);

  j = tiny_json();
  j["grades"][0]["activations"] = {"sin", "identity"};
  EXPECT_THROW(parse_experiment_config(j), ConfigError);

  j = tiny_json();
  j["grades"][0]["activations"][2] = "relu";
  EXPECT_THROW(parse_experiment_config(j), ConfigError);

  j = tiny_json();
  j["target"] = "tanh";
  EXPECT_THROW(parse_experiment_config(j), ConfigError);

  j = tiny_json();
  j["defaults"]["batch_size"] = 0;
  EXPECT_THROW(parse_experiment_config(j), ConfigError);

  j = tiny_json();
  j.erase("grades");
  EXPECT_THROW(parse_experiment_config(j), ConfigError);

  EXPECT_THROW(load_experiment_config("/nonexistent/config.json"), IoError);
}

TEST(RunExperiment, OutputsAndChecks) {
  ExperimentConfig c = parse_experiment_config(tiny_json());
  const fs::path dir = scratch("outputs");
  c.output_dir = dir.string();
  const ExperimentReport r = run_experiment(c);

  EXPECT_EQ(r.grades.size(), 2u);
  EXPECT_TRUE(r.baseline.has_value());
  EXPECT_LE(r.telescoping_violation, 1e-9);
  EXPECT_TRUE(r.monotone_residuals);
  EXPECT_EQ(r.architecture.size(), 2u);
  EXPECT_EQ(r.architecture[1], "Grade 2: [1]→[16]_F→[16]_F→[8]→[1]");

  for (const char* f : {"metrics.json", "loss_curves.csv", "predictions.csv", "model.json",
                        "baseline_model.json"}) {
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  }
  EXPECT_FALSE(fs::exists(dir / "INCOMPLETE"));

  const json m = json::parse(slurp(dir / "metrics.json"));
  for (const char* method : {"multi-grade", "single-grade"}) {
    for (const char* key : {"mse_train", "rse_train", "mse_test", "rse_test", "training_time"}) {
      EXPECT_TRUE(m.at("methods").at(method).contains(key)) << method << " " << key;
    }
  }
  EXPECT_EQ(m.at("methods").at("multi-grade").at("mse_test").get<double>(),
            r.multigrade.metrics.mse_test);
  EXPECT_EQ(m.at("methods").at("single-grade").at("rse_train").get<double>(),
            *r.baseline->metrics.rse_train);

  // metrics equal a fresh compute_metrics on regenerated data
  const Dataset data = generate(c.target, c.noisy, c.seed, c.data);
  const Metrics fresh =
      compute_metrics(r.model.predict(data.train.x), r.model.predict(data.test.x), data);
  EXPECT_EQ(m.at("methods").at("multi-grade").at("mse_train").get<double>(), fresh.mse_train);
  EXPECT_EQ(m.at("methods").at("multi-grade").at("rse_test").get<double>(), *fresh.rse_test);

  const std::string predictions = slurp(dir / "predictions.csv");
  EXPECT_EQ(count_lines(predictions), 51u);
  EXPECT_EQ(predictions.substr(0, predictions.find('\n')),
            "x,y_true,after_grade_1,after_grade_2,single_grade");

  const std::string curves = slurp(dir / "loss_curves.csv");
  EXPECT_EQ(count_lines(curves, ",grade1,"), 5u);
  EXPECT_EQ(count_lines(curves, ",grade2,"), 4u);
  EXPECT_EQ(count_lines(curves, ",single-grade,"), 6u);

  const MultiGradeModel reloaded = load_model((dir / "model.json").string());
  EXPECT_EQ(reloaded, r.model);
  EXPECT_EQ(reloaded.predict(r.test_x), r.prefix_predictions.back());
  fs::remove_all(dir);
}

TEST(RunExperiment, DeterministicMetrics) {
  ExperimentConfig c = parse_experiment_config(tiny_json());
  const json a = without_timing(metrics_json(run_experiment(c)));
  const json b = without_timing(metrics_json(run_experiment(c)));
  EXPECT_EQ(a.dump(), b.dump());
  c.seed = 4;
  EXPECT_NE(without_timing(metrics_json(run_experiment(c))).dump(), a.dump());
}

TEST(RunExperiment, ZeroEpochGradeIsTheZeroModel) {
  json j = tiny_json();
  j["grades"] = json::array({j["grades"][0]});
  j["grades"][0]["epochs"] = 0;
  j["stop"]["max_grades"] = 1;
  j["baseline"] = nullptr;
  const ExperimentReport r = run_experiment(parse_experiment_config(j));
  EXPECT_EQ(r.model.predict(r.test_x).norm(), 0.0);
  EXPECT_EQ(r.multigrade.metrics.rse_train, 1.0);
  EXPECT_EQ(r.multigrade.metrics.rse_test, 1.0);
  EXPECT_FALSE(r.baseline.has_value());
  EXPECT_FALSE(metrics_json(r).at("methods").contains("single-grade"));
}

TEST(EmitOutputs, UnwritableDirectory) {
  json j = tiny_json();
  j["baseline"] = nullptr;
  j["grades"][0]["epochs"] = 1;
  j["grades"][1]["epochs"] = 1;
  const ExperimentReport r = run_experiment(parse_experiment_config(j));
  const fs::path blocker = scratch("blocker");
  std::ofstream(blocker) << "a file, not a directory\n";
  EXPECT_THROW(emit_outputs(r, (blocker / "out").string()), IoError);
  fs::remove(blocker);
}

TEST(CompareSummary, Statistics) {
  auto doc = [](std::uint64_t seed, double mse) {
    return json{{"name", "x"},
                {"seed", seed},
                {"methods",
                 {{"multi-grade",
                   {{"training_time", 1.0}, {"mse_train", mse}, {"rse_train", nullptr},
                    {"mse_test", 2 * mse}, {"rse_test", mse}}}}}};
  };
  const CompareResult one = compare_summary({doc(1, 0.5)});
  const json& s1 = one.sidecar.at("summary").at("multi-grade").at("mse_train");
  EXPECT_EQ(s1.at("mean"), 0.5);
  EXPECT_EQ(s1.at("min"), 0.5);
  EXPECT_EQ(s1.at("max"), 0.5);
  EXPECT_FALSE(one.sidecar.at("summary").at("multi-grade").contains("rse_train"));

  const CompareResult three = compare_summary({doc(1, 0.1), doc(2, 0.4), doc(3, 0.7)});
  EXPECT_EQ(three.sidecar.at("runs").size(), 3u);
  EXPECT_EQ(three.sidecar.at("runs")[2].at("seed"), 3);
  const json& s3 = three.sidecar.at("summary").at("multi-grade").at("mse_test");
  EXPECT_NEAR(s3.at("mean").get<double>(), (0.2 + 0.8 + 1.4) / 3.0, 1e-15);
  EXPECT_EQ(s3.at("min"), 0.2);
  EXPECT_EQ(s3.at("max"), 1.4);
  EXPECT_EQ(s3.at("n"), 3);
  EXPECT_NE(three.table.find("mse_test"), std::string::npos);

  EXPECT_THROW(compare_summary({}), UsageError);
  EXPECT_THROW(compare_summary({json{{"name", "no methods"}}}), ConfigError);
}
