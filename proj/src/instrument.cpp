#include "dcm/instrument.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "dcm/errors.hpp"

namespace dcm {

double gradient_error(std::span<const double> clean_grad, std::span<const double> noisy_grad) {
  if (clean_grad.size() != noisy_grad.size())
    throw DimensionError("gradient_error: " + std::to_string(clean_grad.size()) + " vs " +
                         std::to_string(noisy_grad.size()) + " entries");
  double acc = 0.0;
  for (std::size_t i = 0; i < clean_grad.size(); ++i) {
    const double d = noisy_grad[i] - clean_grad[i];
    acc += d * d;
  }
  return std::sqrt(acc);
}

double accuracy(const Matrix& logits, std::span<const int> labels) {
  if (logits.rows() != labels.size())
    throw DimensionError("accuracy: " + logits.shape_str() + " logits for " +
                         std::to_string(labels.size()) + " labels");
  if (labels.empty()) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    auto row = logits.row(i);
    std::size_t best = 0;
    for (std::size_t j = 1; j < row.size(); ++j)
      if (row[j] > row[best]) best = j;
    correct += static_cast<int>(best) == labels[i] ? 1 : 0;
  }
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

double last_k_mean(std::span<const double> series, std::size_t k) {
  if (series.empty()) throw ValidationError("last_k_mean: empty series");
  const std::size_t n = std::min(k, series.size());
  double acc = 0.0;
  for (std::size_t i = series.size() - n; i < series.size(); ++i) acc += series[i];
  return acc / static_cast<double>(n);
}

StepResult dual_backprop_step(ForwardPass& pass, const Matrix& observed_labels,
                              const Matrix* clean_labels, LossKind loss,
                              std::span<const std::size_t> designated) {
  StepResult r;
  auto noisy = logit_loss(pass.logit_values(), observed_labels, loss);
  r.loss = noisy.loss;
  r.grads = backward(pass, noisy.dlogits);
  if (clean_labels == nullptr) return r;

  auto clean = logit_loss(pass.logit_values(), *clean_labels, loss);
  const auto clean_grads = backward(pass, clean.dlogits);
  std::vector<double> flat_noisy, flat_clean;
  for (std::size_t idx : designated) {
    const auto n = r.grads.at(idx).data();
    const auto c = clean_grads.at(idx).data();
    flat_noisy.insert(flat_noisy.end(), n.begin(), n.end());
    flat_clean.insert(flat_clean.end(), c.begin(), c.end());
  }
  r.grad_error = gradient_error(flat_clean, flat_noisy);
  return r;
}

double RunMetrics::final_test_acc() const {
  if (test_acc.empty()) throw ValidationError("no epochs recorded");
  return test_acc.back();
}

double RunMetrics::best_test_acc() const {
  if (test_acc.empty()) throw ValidationError("no epochs recorded");
  return *std::max_element(test_acc.begin(), test_acc.end());
}

namespace {

std::string g6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace

std::string format_metrics_row(std::size_t epoch, const RunMetrics& m, const RunLabels& l) {
  std::string row = std::to_string(epoch + 1);
  for (double v : {m.train_loss.at(epoch), m.train_acc.at(epoch), m.test_acc.at(epoch),
                   m.grad_err.at(epoch)})
    row += ',' + g6(v);
  row += ',' + l.mask_strategy + ',' + g6(l.mask_ratio) + ',' + l.mask_interval + ',' +
         l.mask_stage + ',' + l.head + ',' + std::to_string(l.seed);
  return row;
}

void write_metrics_csv(std::ostream& os, const RunMetrics& metrics, const RunLabels& labels) {
  os << kMetricsHeader << '\n';
  for (std::size_t e = 0; e < metrics.epochs(); ++e)
    os << format_metrics_row(e, metrics, labels) << '\n';
}

std::vector<MetricsRow> read_metrics_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != kMetricsHeader)
    throw FormatError("metrics csv line 1: expected header '" + std::string(kMetricsHeader) + "'");
  std::vector<MetricsRow> rows;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    const std::string where = "metrics csv line " + std::to_string(line_no);
    if (cells.size() != 11) throw FormatError(where + ": expected 11 columns");
    auto num = [&](const std::string& s) {
      char* end = nullptr;
      const double v = std::strtod(s.c_str(), &end);
      if (s.empty() || end != s.c_str() + s.size())
        throw FormatError(where + ": bad number '" + s + "'");
      return v;
    };
    MetricsRow r;
    r.epoch = static_cast<std::size_t>(num(cells[0]));
    r.train_loss = num(cells[1]);
    r.train_acc = num(cells[2]);
    r.test_acc = num(cells[3]);
    r.grad_err = num(cells[4]);
    r.labels = {cells[5], num(cells[6]), cells[7], cells[8], cells[9],
                static_cast<std::uint64_t>(num(cells[10]))};
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace dcm
