#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "dcm/config.hpp"
#include "dcm/data.hpp"
#include "dcm/instrument.hpp"
#include "dcm/mask.hpp"
#include "dcm/model.hpp"

namespace dcm {

// Parameter indices of the instrumented layer (the backbone's second affine
// layer, W2 and b2).
inline constexpr std::size_t kDesignatedLayer[] = {2, 3};
inline constexpr const char* kDesignatedLayerTag = "backbone.layer2";

// Everything a run derives from (config, seed) before training starts.
struct Experiment {
  Split data;
  Classifier model;
};
Experiment prepare_experiment(const ExperimentConfig& cfg);

struct StepObserver {
  // Called after each optimizer step with the model state and the mask used.
  std::function<void(std::size_t step, const Classifier&, const MaskMatrix&)> after_step;
  // Stop after this many optimizer steps (0 = run every epoch).
  std::size_t max_steps = 0;
};

struct TrainResult {
  RunMetrics metrics;
  Classifier model;
  MaskMatrix last_mask;
  std::vector<GradientErrorRecord> grad_errors;
  std::size_t steps = 0;
};

// Score -> mask -> masked forward -> loss -> update per batch; evaluation on
// the clean test split after each epoch (full weights unless the stage is
// train_and_test). When cfg.out_dir is set, writes metrics.csv (flushed per
// epoch), checkpoint.bin, config.txt and, for masked runs, final_mask.txt.
// Throws DivergenceError on a non-finite loss.
TrainResult run_train(const ExperimentConfig& cfg, const StepObserver& observer = {});

RunLabels run_labels(const ExperimentConfig& cfg);

// ---------------------------------------------------------------------------
// Suites. Every (arm, seed) run writes <out>/<arm>/seed<N>/ and the suite
// writes <out>/summary.csv with one row per (arm, seed).

struct SuiteRow {
  std::string arm;
  std::uint64_t seed = 0;
  double best_test_acc = 0.0;
  double last10_test_acc = 0.0;
  double mean_grad_err = 0.0;
};

struct SuiteResult {
  std::string suite;
  std::vector<SuiteRow> rows;
  std::vector<std::string> arms;

  // Mean last-10 accuracy across seeds for one arm.
  double mean_last10(const std::string& arm) const;
  double mean_best(const std::string& arm) const;
};

struct SuiteArm {
  std::string name;
  ExperimentConfig config;  // seed and out_dir are filled in per run
};

SuiteResult run_suite(const std::string& suite, const std::vector<SuiteArm>& arms,
                      const std::vector<std::uint64_t>& seeds, const std::string& out_dir);

std::string ratio_arm_name(double ratio);

SuiteResult run_sweep_ratio(const ExperimentConfig& base, const std::vector<double>& ratios,
                            const std::vector<std::uint64_t>& seeds);
SuiteResult run_ablation_strategy(const ExperimentConfig& base,
                                  const std::vector<std::uint64_t>& seeds);
SuiteResult run_ablation_stage(const ExperimentConfig& base,
                               const std::vector<std::uint64_t>& seeds);
SuiteResult run_ablation_interval(const ExperimentConfig& base,
                                  const std::vector<std::uint64_t>& seeds);

inline constexpr const char* kSummaryHeader =
    "suite,arm,seed,head,best_test_acc,last10_test_acc,mean_grad_err";
std::string summary_csv(const SuiteResult& result, const std::string& head);

}  // namespace dcm
