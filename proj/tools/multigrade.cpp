// multigrade: run grade-wise training experiments from JSON configs.
//
//   multigrade run --config <path> [--seed N] [--out DIR] [--no-baseline]
//   multigrade compare <metrics.json>... [--json PATH]
//   multigrade validate-config <path>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "mgdl/errors.hpp"
#include "mgdl/experiment.hpp"

namespace {

int exit_code(const std::string& kind) {
  if (kind == "usage" || kind == "config") return 2;
  if (kind == "shape") return 3;
  if (kind == "training") return 4;
  if (kind == "io") return 5;
  return 1;
}

int fail(const std::string& kind, const std::string& message,
         const std::string& experiment = "") {
  nlohmann::json line{{"kind", kind}, {"message", message}};
  if (!experiment.empty()) line["experiment"] = experiment;
  std::cerr << "error: " << line.dump() << std::endl;
  return exit_code(kind);
}

void print_report(const mgdl::ExperimentReport& r) {
  std::printf("%s (seed %llu)\n", r.name.c_str(), static_cast<unsigned long long>(r.seed));
  for (const std::string& line : r.architecture) std::printf("  %s\n", line.c_str());
  std::printf("\n%-6s %-14s %-7s %-14s %-12s %-12s\n", "grade", "learning rate",
              "epochs", "training time", "mse (train)", "rse (train)");
  for (const mgdl::GradeReport& g : r.grades) {
    std::printf("%-6zu %-14g %-7zu %-14.4f %-12.4e %-12.4e\n", g.grade,
                g.learning_rate, g.epochs, g.train_seconds, g.mse_train,
                g.rse_train.value_or(NAN));
  }
  std::printf("\n%-13s %-14s %-12s %-12s %-12s %-12s\n", "method", "training time",
              "mse (train)", "rse (train)", "mse (test)", "rse (test)");
  auto row = [](const char* name, const mgdl::MethodTotals& m) {
    std::printf("%-13s %-14.4f %-12.4e %-12.4e %-12.4e %-12.4e\n", name,
                m.train_seconds, m.metrics.mse_train, m.metrics.rse_train.value_or(NAN),
                m.metrics.mse_test, m.metrics.rse_test.value_or(NAN));
  };
  row("multi-grade", r.multigrade);
  if (r.baseline) row("single-grade", *r.baseline);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Grade-by-grade training of deep networks"};
  app.require_subcommand(1);

  std::string config_path;
  std::uint64_t seed = 0;
  std::string out_dir;
  bool no_baseline = false;
  auto* run = app.add_subcommand("run", "Run an experiment config");
  run->add_option("--config", config_path, "Experiment config (JSON)")->required();
  auto* seed_opt = run->add_option("--seed", seed, "Override the master seed");
  run->add_option("--out", out_dir, "Output directory (overrides $MULTIGRADE_OUT_DIR)");
  run->add_flag("--no-baseline", no_baseline, "Skip the single-grade baseline");

  std::vector<std::string> reports;
  std::string sidecar_path;
  auto* compare = app.add_subcommand("compare", "Summarize metrics.json files across runs");
  compare->add_option("reports", reports, "metrics.json files")->required();
  compare->add_option("--json", sidecar_path, "Write the JSON sidecar here");

  std::string validate_path;
  auto* validate = app.add_subcommand("validate-config", "Check a config without training");
  validate->add_option("path", validate_path, "Experiment config (JSON)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("usage", e.what());
  }

  std::string experiment;
  try {
    if (*run) {
      mgdl::ExperimentConfig config = mgdl::load_experiment_config(config_path);
      if (*seed_opt) config.seed = seed;
      experiment = config.name + " (seed " + std::to_string(config.seed) + ")";
      if (no_baseline) config.baseline.reset();
      if (!out_dir.empty()) {
        config.output_dir = out_dir;
      } else if (const char* env = std::getenv(mgdl::kOutputDirEnv); env && *env) {
        config.output_dir = env;
      } else if (config.output_dir.empty()) {
        config.output_dir = "runs/" + config.name + "-seed" + std::to_string(config.seed);
      }
      const mgdl::ExperimentReport report = mgdl::run_experiment(config);
      print_report(report);
      std::printf("\noutputs written to %s\n", config.output_dir.c_str());
    } else if (*compare) {
      std::vector<nlohmann::json> docs;
      for (const std::string& path : reports) {
        std::ifstream in(path);
        if (!in) throw mgdl::IoError("cannot read " + path);
        try {
          docs.push_back(nlohmann::json::parse(in));
        } catch (const nlohmann::json::exception& e) {
          throw mgdl::ConfigError(path + ": " + e.what());
        }
      }
      const mgdl::CompareResult result = mgdl::compare_summary(docs);
      std::cout << result.table;
      if (!sidecar_path.empty()) {
        std::ofstream out(sidecar_path);
        if (!out) throw mgdl::IoError("cannot write " + sidecar_path);
        out << result.sidecar.dump(2) << '\n';
      }
    } else if (*validate) {
      const mgdl::ExperimentConfig config = mgdl::load_experiment_config(validate_path);
      std::printf("ok: %s (%zu grades%s)\n", config.name.c_str(), config.grades.size(),
                  config.baseline ? ", with baseline" : "");
    }
  } catch (const mgdl::Error& e) {
    return fail(e.kind(), e.what(), experiment);
  } catch (const std::exception& e) {
    return fail("internal", e.what(), experiment);
  }
  return 0;
}
