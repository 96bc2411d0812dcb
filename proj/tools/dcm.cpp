// Command-line runner for dynamic connection masking experiments.

#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dcm/config.hpp"
#include "dcm/errors.hpp"
#include "dcm/plot.hpp"
#include "dcm/trainer.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitDiverged = 3;

struct RunFlags {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out;
  long long seed = -1;
  std::string seeds = "1,2,3";
  std::string ratios = "0.1,0.3,0.5,0.6,0.8";
};

template <typename T>
std::vector<T> parse_list(const std::string& text, const char* what) {
  std::vector<T> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::istringstream is(item);
    T v{};
    if (!(is >> v) || !(is >> std::ws).eof())
      throw dcm::ValidationError(std::string("--") + what + ": bad entry '" + item + "'");
    out.push_back(v);
  }
  if (out.empty()) throw dcm::ValidationError(std::string("--") + what + " is empty");
  return out;
}

dcm::ExperimentConfig build_config(const RunFlags& f, const std::string& default_leaf) {
  dcm::ExperimentConfig cfg;
  if (!f.config_path.empty()) cfg = dcm::load_config(f.config_path, cfg);
  for (const auto& o : f.overrides) dcm::apply_override(cfg, o);
  if (f.seed >= 0) cfg.seed = static_cast<std::uint64_t>(f.seed);
  if (!f.out.empty()) {
    cfg.out_dir = f.out;
  } else if (cfg.out_dir.empty()) {
    const char* env = std::getenv("DCM_OUT");
    cfg.out_dir = std::string(env && *env ? env : "dcm_out") + "/" + default_leaf;
  }
  cfg.validate();
  return cfg;
}

void add_run_flags(CLI::App* cmd, RunFlags& f, bool suite) {
  cmd->add_option("--config", f.config_path, "key = value config file");
  cmd->add_option("--set", f.overrides, "override a config key (key=value), repeatable");
  cmd->add_option("--out", f.out, "output directory (default $DCM_OUT or ./dcm_out)");
  if (suite) {
    cmd->add_option("--seeds", f.seeds, "comma-separated seeds")->capture_default_str();
  } else {
    cmd->add_option("--seed", f.seed, "run seed");
  }
}

void print_suite(const dcm::SuiteResult& r) {
  std::printf("%-20s %12s %12s\n", "arm", "best", "last10");
  for (const auto& arm : r.arms)
    std::printf("%-20s %12.4f %12.4f\n", arm.c_str(), r.mean_best(arm), r.mean_last10(arm));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dcm: dynamic connection masking for noisy-label classifier heads"};
  app.require_subcommand(1);

  RunFlags train_flags, ratio_flags, strategy_flags, stage_flags, interval_flags;
  auto* train = app.add_subcommand("train", "train one model and write metrics.csv");
  add_run_flags(train, train_flags, false);
  auto* sweep = app.add_subcommand("sweep-ratio", "masking-ratio sweep");
  add_run_flags(sweep, ratio_flags, true);
  sweep->add_option("--ratios", ratio_flags.ratios, "comma-separated ratios in (0,1)")
      ->capture_default_str();
  auto* strategy = app.add_subcommand("ablate-strategy", "compare masking strategies");
  add_run_flags(strategy, strategy_flags, true);
  auto* stage = app.add_subcommand("ablate-stage", "train-only vs train-and-test masking");
  add_run_flags(stage, stage_flags, true);
  auto* interval = app.add_subcommand("ablate-interval", "per-iteration vs per-epoch masks");
  add_run_flags(interval, interval_flags, true);

  std::string plot_kind, plot_out;
  std::vector<std::string> plot_inputs;
  auto* plot = app.add_subcommand("plot", "render metrics CSVs or mask dumps as SVG");
  plot->add_option("--kind", plot_kind,
                   "accuracy_curve | grad_err_curve | ratio_sweep | mask_density")
      ->required();
  plot->add_option("--in", plot_inputs, "input files")->required();
  plot->add_option("--out", plot_out, "output SVG path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*train) {
      const auto cfg = build_config(train_flags, "train");
      const auto result = dcm::run_train(cfg);
      std::printf("final test acc %.4f  best %.4f  last-10 mean %.4f  (%s)\n",
                  result.metrics.final_test_acc(), result.metrics.best_test_acc(),
                  result.metrics.last10_test_acc(), cfg.out_dir.c_str());
    } else if (*sweep) {
      const auto cfg = build_config(ratio_flags, "sweep_ratio");
      print_suite(dcm::run_sweep_ratio(cfg, parse_list<double>(ratio_flags.ratios, "ratios"),
                                       parse_list<std::uint64_t>(ratio_flags.seeds, "seeds")));
    } else if (*strategy) {
      const auto cfg = build_config(strategy_flags, "ablate_strategy");
      print_suite(dcm::run_ablation_strategy(
          cfg, parse_list<std::uint64_t>(strategy_flags.seeds, "seeds")));
    } else if (*stage) {
      const auto cfg = build_config(stage_flags, "ablate_stage");
      print_suite(
          dcm::run_ablation_stage(cfg, parse_list<std::uint64_t>(stage_flags.seeds, "seeds")));
    } else if (*interval) {
      const auto cfg = build_config(interval_flags, "ablate_interval");
      print_suite(dcm::run_ablation_interval(
          cfg, parse_list<std::uint64_t>(interval_flags.seeds, "seeds")));
    } else if (*plot) {
      dcm::emit_plot(dcm::parse_plot_kind(plot_kind), plot_inputs, plot_out);
    }
  } catch (const dcm::DivergenceError& e) {
    std::fprintf(stderr, "diverged: %s\n", e.what());
    return kExitDiverged;
  } catch (const dcm::ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitConfig;
  } catch (const dcm::FormatError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
