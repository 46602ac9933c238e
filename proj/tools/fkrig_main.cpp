#include <CLI11.hpp>
#include <iostream>

#include "fkrig/commands.hpp"
#include "fkrig/errors.hpp"

using namespace fkrig;

int main(int argc, char** argv) {
  CLI::App app{"Kriging for functional responses on regular and irregular grids"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_path;
  std::uint64_t seed = 0;
  std::string out_dir;
  bool verbose = false;
  std::vector<std::string> overrides;
  app.add_option("--config", config_path, "flat key = value config file");
  auto* seed_opt = app.add_option("--seed", seed, "random seed");
  app.add_option("--out-dir", out_dir, "output directory");
  app.add_flag("--verbose", verbose, "progress on stderr");
  app.add_option("--set", overrides, "override a config key (key=value)")->take_all();

  auto* gen = app.add_subcommand("generate", "sample a synthetic dataset");
  auto* fit = app.add_subcommand("fit", "fit a model and write model.txt and report.txt");

  auto* pred = app.add_subcommand("predict", "predict query rows with confidence bounds");
  std::string model_path, query_path, output_path;
  double kappa = -1.0;
  pred->add_option("--model", model_path, "model file (default <out-dir>/model.txt)");
  pred->add_option("--query", query_path, "query CSV with variable columns and t")->required();
  pred->add_option("--kappa", kappa, "interval level is 1 - kappa");
  pred->add_option("--output", output_path, "output CSV (default <out-dir>/predictions.csv)");

  auto* val = app.add_subcommand("validate", "leave-one-out profiles and MSCV comparison");
  auto* opt = app.add_subcommand("optimize", "minimize the maximum predicted response over t");
  opt->add_option("--model", model_path, "model file (default <out-dir>/model.txt)");
  auto* sens = app.add_subcommand("sensitivity", "main-effect curves");
  sens->add_option("--model", model_path, "model file (default <out-dir>/model.txt)");
  auto* bench = app.add_subcommand("benchmark", "time one likelihood evaluation per path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    ProjectConfig cfg = config_path.empty() ? ProjectConfig{} : ProjectConfig::load(config_path);
    for (const auto& kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
      cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (*seed_opt) cfg.seed = seed;
    if (!out_dir.empty()) {
      cfg.out_dir = std::filesystem::absolute(out_dir).string();
    }
    auto log = [&](const std::string& s) {
      if (verbose) std::cerr << s << "\n";
    };
    const std::filesystem::path model = model_path.empty() ? out_path(cfg, "model.txt") : std::filesystem::path(model_path);

    if (*gen) {
      const GeneratedData g = cmd_generate(cfg);
      log("generated " + std::to_string(g.data.runs()) + " runs, " + std::to_string(g.data.total_points()) +
          " points");
    } else if (*fit) {
      const FitOutput f = cmd_fit(cfg);
      log(f.report);
    } else if (*pred) {
      const auto out = output_path.empty() ? out_path(cfg, "predictions.csv") : std::filesystem::path(output_path);
      const MatrixXd r = cmd_predict(model, query_path, kappa > 0 ? kappa : cfg.kappa, out);
      log("predicted " + std::to_string(r.rows()) + " rows");
    } else if (*val) {
      const ValidateOutput v = cmd_validate(cfg);
      std::cout << "mscv em-completed: " << v.mscv_em << "\nmscv common-grid: " << v.mscv_common << "\n";
    } else if (*opt) {
      const OptimResult r = cmd_optimize(cfg, model);
      std::cout << "worst_value: " << r.worst_value << " at t = " << r.worst_t << "\n";
    } else if (*sens) {
      const auto curves = cmd_sensitivity(cfg, model);
      log("wrote " + std::to_string(curves.size()) + " effect curves");
    } else if (*bench) {
      const BenchOutput b = cmd_benchmark(cfg);
      for (const auto& r : b.rows) {
        std::cout << r.n << " " << r.m << " " << r.path << " " << r.median_seconds << " s\n";
      }
      std::cout << "max disagreement: " << b.max_disagreement << "\n";
    }
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
