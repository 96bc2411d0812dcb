#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dcm/core_ad.hpp"
#include "dcm/matrix.hpp"
#include "dcm/model.hpp"

namespace dcm {

struct GradientErrorRecord {
  std::size_t epoch = 0;
  std::size_t iteration = 0;
  std::string layer_tag;
  double epsilon_sum = 0.0;
};

// ||noisy - clean||_2 over flattened gradients.
double gradient_error(std::span<const double> clean_grad, std::span<const double> noisy_grad);

// Top-1 accuracy; argmax ties go to the smallest class index.
double accuracy(const Matrix& logits, std::span<const int> labels);

// Mean of the last min(k, size) entries. Throws ValidationError on empty input.
double last_k_mean(std::span<const double> series, std::size_t k = 10);

struct StepResult {
  double loss = 0.0;                  // loss against the observed labels
  std::vector<Matrix> grads;          // gradients used for the update
  std::optional<double> grad_error;   // set when clean labels were supplied
};

// Backpropagates the observed-label loss and, when clean labels are given,
// a second time with the clean-label loss from the same forward pass.
// `designated` lists the parameter indices whose gradients enter the error.
// Only the observed-label gradients are returned for the update.
StepResult dual_backprop_step(ForwardPass& pass, const Matrix& observed_labels,
                              const Matrix* clean_labels, LossKind loss,
                              std::span<const std::size_t> designated);

struct RunMetrics {
  std::vector<double> train_loss;
  std::vector<double> train_acc;
  std::vector<double> test_acc;
  std::vector<double> grad_err;  // NaN when instrumentation is off

  std::size_t epochs() const { return test_acc.size(); }
  double final_test_acc() const;
  double best_test_acc() const;
  double last10_test_acc() const { return last_k_mean(test_acc, 10); }
};

// Constant columns written on every metrics row.
struct RunLabels {
  std::string mask_strategy = "none";
  double mask_ratio = 0.0;
  std::string mask_interval = "per_iteration";
  std::string mask_stage = "train_only";
  std::string head = "mlp";
  std::uint64_t seed = 0;
};

struct MetricsRow {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double train_acc = 0.0;
  double test_acc = 0.0;
  double grad_err = 0.0;
  RunLabels labels;
};

inline constexpr const char* kMetricsHeader =
    "epoch,train_loss,train_acc,test_acc,grad_err,mask_strategy,mask_ratio,mask_interval,"
    "mask_stage,head,seed";

// Floats at 6 significant digits; the header row is always written.
void write_metrics_csv(std::ostream& os, const RunMetrics& metrics, const RunLabels& labels);
std::string format_metrics_row(std::size_t epoch, const RunMetrics& metrics,
                               const RunLabels& labels);
// Throws FormatError naming the offending line.
std::vector<MetricsRow> read_metrics_csv(std::istream& is);

}  // namespace dcm
