#include "dcm/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

#include "dcm/errors.hpp"
#include "dcm/random.hpp"

namespace dcm {

namespace {

// Independent random streams derived from the run seed.
enum Stream : std::uint64_t {
  kDataStream = 1,
  kSplitStream = 2,
  kNoiseStream = 3,
  kBackboneStream = 4,
  kShuffleStream = 5,
  kRandomMaskStream = 6,
  kHeadStream = 7,
};

Matrix gather_rows(const Matrix& x, const std::vector<std::size_t>& idx) {
  Matrix out(idx.size(), x.cols());
  for (std::size_t r = 0; r < idx.size(); ++r) {
    auto src = x.row(idx[r]);
    std::copy(src.begin(), src.end(), out.row(r).begin());
  }
  return out;
}

std::vector<int> gather(const std::vector<int>& v, const std::vector<std::size_t>& idx) {
  std::vector<int> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(v[i]);
  return out;
}

MaskMatrix compute_mask(const MaskingPolicy& policy, const Classifier& model, const Matrix& v,
                        std::uint64_t random_seed) {
  const double p = policy.ratio;
  switch (policy.strategy) {
    case MaskStrategy::random:
      return build_mask_random(model.classes(), model.features(), p, random_seed);
    case MaskStrategy::by_weight:
      return build_mask_by_weight(std::get<MlpHead>(model.head).W, p);
    case MaskStrategy::node_wise:
      return build_mask_node_wise(importance_scores(head_edge_activations(model, v)), p);
    case MaskStrategy::edge_wise:
      return build_mask_edge_wise(importance_scores(head_edge_activations(model, v)), p);
    case MaskStrategy::node_wise_inverted:
      return invert_selection(importance_scores(head_edge_activations(model, v)), p);
  }
  throw ValidationError("unknown mask strategy");
}

double learning_rate_at(const ExperimentConfig& cfg, std::size_t step, std::size_t total) {
  if (cfg.schedule == Schedule::constant || total == 0) return cfg.learning_rate;
  const double t = static_cast<double>(step) / static_cast<double>(total);
  return cfg.learning_rate * 0.5 * (1.0 + std::cos(std::numbers::pi * t));
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

}  // namespace

Experiment prepare_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  BlobsParams blobs{cfg.classes, cfg.n_per_class, cfg.input_dim, cfg.separation, cfg.spread,
                    derive_seed(cfg.seed, kDataStream)};
  Split split = split_train_test(make_blobs(blobs), cfg.test_fraction,
                                 derive_seed(cfg.seed, kSplitStream));
  // Test labels stay clean.
  split.train.apply_noise(cfg.noise_spec(derive_seed(cfg.seed, kNoiseStream)));

  Rng backbone_rng(derive_seed(cfg.seed, kBackboneStream));
  Backbone backbone = Backbone::init(cfg.input_dim, cfg.hidden_dim, cfg.feature_dim,
                                     cfg.activation, backbone_rng);
  Rng head_rng(derive_seed(cfg.seed, kHeadStream));
  Classifier model{std::move(backbone), MlpHead{}};
  if (cfg.head == HeadKind::mlp) {
    model.head = MlpHead::init(cfg.classes, cfg.feature_dim, head_rng);
    for (double& w : std::get<MlpHead>(model.head).W.data()) w *= cfg.head_init_scale;
  } else
    model.head = KanHead::init(cfg.classes, cfg.feature_dim, cfg.kan_grid(), head_rng);
  return {std::move(split), std::move(model)};
}

RunLabels run_labels(const ExperimentConfig& cfg) {
  RunLabels l;
  l.mask_strategy = cfg.masking.enabled ? std::string(to_string(cfg.masking.strategy)) : "none";
  l.mask_ratio = cfg.masking.enabled ? cfg.masking.ratio : 0.0;
  l.mask_interval = std::string(to_string(cfg.masking.interval));
  l.mask_stage = std::string(to_string(cfg.masking.stage));
  l.head = std::string(to_string(cfg.head));
  l.seed = cfg.seed;
  return l;
}

TrainResult run_train(const ExperimentConfig& cfg, const StepObserver& observer) {
  Experiment exp = prepare_experiment(cfg);
  const Dataset& train = exp.data.train;
  const Dataset& test = exp.data.test;
  TrainResult result{{}, std::move(exp.model), {}, {}, 0};
  Classifier& model = result.model;
  const std::size_t C = model.classes(), d = model.features();

  std::ofstream metrics_file;
  std::filesystem::path out_dir;
  const RunLabels labels = run_labels(cfg);
  if (!cfg.out_dir.empty()) {
    out_dir = cfg.out_dir;
    std::filesystem::create_directories(out_dir);
    write_text_file(out_dir / "config.txt", cfg.to_text());
    if (cfg.write_dataset) {
      std::ofstream ds(out_dir / "train_data.csv", std::ios::binary);
      write_dataset_csv(ds, train);
    }
    metrics_file.open(out_dir / "metrics.csv", std::ios::binary);
    if (!metrics_file) throw std::runtime_error("cannot write " + (out_dir / "metrics.csv").string());
    metrics_file << kMetricsHeader << '\n' << std::flush;
  }

  const auto& policy = cfg.masking;
  const bool masking = policy.enabled && masked_count(policy.ratio, C) > 0 &&
                       !(policy.strategy == MaskStrategy::edge_wise &&
                         masked_count(policy.ratio, C * d) == 0);
  if (policy.enabled && !masking)
    std::fprintf(stderr, "warning: mask ratio %g masks no edges for C=%zu; training unmasked\n",
                 policy.ratio, C);

  BatchIterator batches(train.size(), cfg.batch_size, derive_seed(cfg.seed, kShuffleStream));
  const std::size_t steps_per_epoch = (train.size() + cfg.batch_size - 1) / cfg.batch_size;
  const std::size_t total_steps = steps_per_epoch * cfg.epochs;
  const std::uint64_t random_mask_seed = derive_seed(cfg.seed, kRandomMaskStream);
  MaskMatrix current_mask = MaskMatrix::all_ones(d, C);
  auto& metrics = result.metrics;
  auto params = model.parameters();

  // Overflow inside a kernel surfaces as NumericError; report it as divergence.
  try {
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
      double loss_sum = 0.0, acc_sum = 0.0, err_sum = 0.0;
      std::size_t seen = 0, err_batches = 0;
      const auto epoch_batches = batches.next_epoch();
      for (std::size_t b = 0; b < epoch_batches.size(); ++b) {
        const auto& idx = epoch_batches[b];
        const Matrix x = gather_rows(train.x, idx);
        const auto y_obs = gather(train.y_observed, idx);
        const auto y_true = gather(train.y_true, idx);

        ForwardPass pass = forward_features(model, x);
        if (masking) {
          const bool refresh = policy.interval == MaskInterval::per_iteration || b == 0;
          // A single-sample batch has zero scores everywhere; keep the old mask.
          if (refresh && idx.size() >= 2)
            current_mask = compute_mask(policy, model, pass.feature_values(),
                                        derive_seed(random_mask_seed, result.steps));
          forward_head(pass, current_mask);
        } else {
          forward_head(pass, current_mask);
        }

        const Matrix observed = one_hot(y_obs, C);
        const Matrix clean = one_hot(y_true, C);
        auto step = dual_backprop_step(pass, observed, cfg.instrument ? &clean : nullptr, cfg.loss,
                                       kDesignatedLayer);
        if (!std::isfinite(step.loss)) {
          metrics_file.flush();
          throw DivergenceError("non-finite loss at epoch " + std::to_string(epoch + 1) +
                                ", step " + std::to_string(result.steps + 1));
        }

        const double lr = learning_rate_at(cfg, result.steps, total_steps);
        for (std::size_t p = 0; p < params.size(); ++p) {
          auto w = params[p].value->data();
          auto g = step.grads[p].data();
          const double wd = cfg.weight_decay;
          for (std::size_t e = 0; e < w.size(); ++e) w[e] -= lr * (g[e] + wd * w[e]);
        }
        for (const auto& p : params)
          if (!p.value->all_finite()) {
            metrics_file.flush();
            throw DivergenceError("non-finite parameter " + p.name + " at epoch " +
                                  std::to_string(epoch + 1));
          }

        loss_sum += step.loss * static_cast<double>(idx.size());
        acc_sum += accuracy(pass.logit_values(), y_obs) * static_cast<double>(idx.size());
        seen += idx.size();
        if (step.grad_error) {
          err_sum += *step.grad_error;
          ++err_batches;
          result.grad_errors.push_back({epoch + 1, result.steps + 1, kDesignatedLayerTag,
                                        *step.grad_error});
        }
        ++result.steps;
        if (observer.after_step) observer.after_step(result.steps, model, current_mask);
        if (observer.max_steps != 0 && result.steps >= observer.max_steps) break;
      }

      const bool mask_at_test = masking && policy.stage == MaskStage::train_and_test;
      const Matrix test_logits = predict(model, test.x, mask_at_test ? &current_mask : nullptr);
      metrics.train_loss.push_back(loss_sum / static_cast<double>(seen));
      metrics.train_acc.push_back(acc_sum / static_cast<double>(seen));
      metrics.test_acc.push_back(accuracy(test_logits, test.y_true));
      metrics.grad_err.push_back(err_batches > 0 ? err_sum / static_cast<double>(err_batches)
                                                 : std::numeric_limits<double>::quiet_NaN());
      if (metrics_file.is_open())
        metrics_file << format_metrics_row(epoch, metrics, labels) << '\n' << std::flush;
      if (observer.max_steps != 0 && result.steps >= observer.max_steps) break;
    }
  } catch (const NumericError& e) {
    metrics_file.flush();
    throw DivergenceError(std::string("numeric divergence: ") + e.what());
  }

  result.last_mask = current_mask;
  if (!out_dir.empty()) {
    std::ofstream ckpt(out_dir / "checkpoint.bin", std::ios::binary);
    write_checkpoint(ckpt, model);
    if (masking)
      write_text_file(out_dir / "final_mask.txt",
                      mask_to_text(current_mask, policy.ratio, to_string(policy.strategy)));
  }
  return result;
}

// ---------------------------------------------------------------------------

double SuiteResult::mean_last10(const std::string& arm) const {
  double acc = 0.0;
  std::size_t n = 0;
  for (const auto& r : rows)
    if (r.arm == arm) {
      acc += r.last10_test_acc;
      ++n;
    }
  if (n == 0) throw ValidationError("suite has no arm '" + arm + "'");
  return acc / static_cast<double>(n);
}

double SuiteResult::mean_best(const std::string& arm) const {
  double acc = 0.0;
  std::size_t n = 0;
  for (const auto& r : rows)
    if (r.arm == arm) {
      acc += r.best_test_acc;
      ++n;
    }
  if (n == 0) throw ValidationError("suite has no arm '" + arm + "'");
  return acc / static_cast<double>(n);
}

SuiteResult run_suite(const std::string& suite, const std::vector<SuiteArm>& arms,
                      const std::vector<std::uint64_t>& seeds, const std::string& out_dir) {
  if (seeds.empty()) throw ValidationError("suite needs at least one seed");
  SuiteResult result{suite, {}, {}};
  for (const auto& arm : arms) result.arms.push_back(arm.name);
  for (const auto& arm : arms) {
    for (auto seed : seeds) {
      ExperimentConfig cfg = arm.config;
      cfg.seed = seed;
      cfg.out_dir = out_dir.empty() ? std::string{}
                                    : (std::filesystem::path(out_dir) / arm.name /
                                       ("seed" + std::to_string(seed)))
                                          .string();
      const auto run = run_train(cfg);
      double err = 0.0;
      for (double e : run.metrics.grad_err) err += e;
      err /= static_cast<double>(run.metrics.epochs());
      result.rows.push_back({arm.name, seed, run.metrics.best_test_acc(),
                             run.metrics.last10_test_acc(), err});
    }
  }
  if (!out_dir.empty()) {
    std::filesystem::create_directories(out_dir);
    const std::string head(to_string(arms.empty() ? HeadKind::mlp : arms.front().config.head));
    write_text_file(std::filesystem::path(out_dir) / "summary.csv", summary_csv(result, head));
  }
  return result;
}

std::string ratio_arm_name(double ratio) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "p%g", ratio);
  return buf;
}

SuiteResult run_sweep_ratio(const ExperimentConfig& base, const std::vector<double>& ratios,
                            const std::vector<std::uint64_t>& seeds) {
  std::vector<SuiteArm> arms;
  for (double r : ratios) {
    if (!(r > 0.0 && r < 1.0)) throw ValidationError("ratios must lie in (0, 1)");
    ExperimentConfig cfg = base;
    cfg.masking.enabled = true;
    cfg.masking.ratio = r;
    arms.push_back({ratio_arm_name(r), cfg});
  }
  return run_suite("sweep_ratio", arms, seeds, base.out_dir);
}

SuiteResult run_ablation_strategy(const ExperimentConfig& base,
                                  const std::vector<std::uint64_t>& seeds) {
  std::vector<SuiteArm> arms;
  ExperimentConfig none = base;
  none.masking.enabled = false;
  arms.push_back({"none", none});
  for (auto s : {MaskStrategy::random, MaskStrategy::edge_wise, MaskStrategy::node_wise,
                 MaskStrategy::by_weight, MaskStrategy::node_wise_inverted}) {
    if (s == MaskStrategy::by_weight && base.head == HeadKind::kan) continue;
    ExperimentConfig cfg = base;
    cfg.masking.enabled = true;
    cfg.masking.strategy = s;
    arms.push_back({std::string(to_string(s)), cfg});
  }
  return run_suite("ablate_strategy", arms, seeds, base.out_dir);
}

SuiteResult run_ablation_stage(const ExperimentConfig& base,
                               const std::vector<std::uint64_t>& seeds) {
  ExperimentConfig none = base, train_only = base, both = base;
  none.masking.enabled = false;
  train_only.masking.enabled = true;
  train_only.masking.stage = MaskStage::train_only;
  both.masking.enabled = true;
  both.masking.stage = MaskStage::train_and_test;
  return run_suite("ablate_stage",
                   {{"no_mask", none}, {"train_only", train_only}, {"train_and_test", both}},
                   seeds, base.out_dir);
}

SuiteResult run_ablation_interval(const ExperimentConfig& base,
                                  const std::vector<std::uint64_t>& seeds) {
  ExperimentConfig iter = base, epoch = base;
  iter.masking.enabled = epoch.masking.enabled = true;
  iter.masking.interval = MaskInterval::per_iteration;
  epoch.masking.interval = MaskInterval::per_epoch;
  return run_suite("ablate_interval", {{"per_iteration", iter}, {"per_epoch", epoch}}, seeds,
                   base.out_dir);
}

std::string summary_csv(const SuiteResult& result, const std::string& head) {
  std::ostringstream os;
  os << kSummaryHeader << '\n';
  char buf[128];
  for (const auto& r : result.rows) {
    std::snprintf(buf, sizeof buf, "%.6g,%.6g,%.6g", r.best_test_acc, r.last10_test_acc,
                  r.mean_grad_err);
    os << result.suite << ',' << r.arm << ',' << r.seed << ',' << head << ',' << buf << '\n';
  }
  return os.str();
}

}  // namespace dcm
