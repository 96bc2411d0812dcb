// Acceptance runner: prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails. Usage: dcm_acceptance [artifact_dir]
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "dcm/config.hpp"
#include "dcm/core_ad.hpp"
#include "dcm/masking.hpp"
#include "dcm/noise.hpp"
#include "dcm/plot.hpp"
#include "dcm/trainer.hpp"
#include "test_support.hpp"

using namespace dcm;
using namespace dcm::testing;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Runs one criterion, appends its runtime to the detail and enforces the
// time limit when one is given (0 = none).
void criterion(int id, const std::string& name, double limit_s, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double t = seconds_since(t0);
  char timing[96];
  if (limit_s > 0) {
    std::snprintf(timing, sizeof timing, "; %.1fs (limit %.0fs)", t, limit_s);
    if (t >= limit_s) o.pass = false;
  } else {
    std::snprintf(timing, sizeof timing, "; %.1fs", t);
  }
  if (!o.pass) ++failures;
  std::printf("%s %2d %s: %s%s\n", o.pass ? "PASS" : "FAIL", id, name.c_str(), o.detail.c_str(),
              timing);
  std::fflush(stdout);
}

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string pct(double v) { return fmt("%.2f%%", 100.0 * v); }

const std::vector<std::uint64_t> kSeeds{1, 2, 3};

// ---------------------------------------------------------------------------

Outcome softmax_ce_fidelity() {
  Rng rng(101);
  double worst = 0.0;
  bool exact = true;
  for (int t = 0; t < 100; ++t) {
    const std::size_t B = 1 + rng.below(8), C = 2 + rng.below(15);
    const Matrix z = random_matrix(B, C, rng, 3.0);
    const Matrix y = one_hot(random_labels(B, C, rng), C);
    const auto fwd = softmax_ce_forward(z, y);
    const Matrix g = softmax_ce_backward(fwd.p, y);
    const double inv_b = 1.0 / static_cast<double>(B);
    for (std::size_t i = 0; i < B; ++i)
      for (std::size_t j = 0; j < C; ++j) exact &= g(i, j) == (fwd.p(i, j) - y(i, j)) * inv_b;
    auto f = [&](std::span<const double> p) {
      Matrix zz(B, C);
      std::copy(p.begin(), p.end(), zz.data().begin());
      return softmax_ce_forward(zz, y).loss;
    };
    worst = std::max(worst, finite_difference_check(f, z.data(), g.data()));
  }
  return {exact && worst < 1e-6,
          "grad == (p - y) * (1/B) exactly: " + std::string(exact ? "yes" : "no") + ", max FD rel err " +
              fmt("%.2e", worst) + " (tol 1e-6)"};
}

Outcome head_fidelity() {
  Rng rng(202);
  double worst_mlp = 0.0, worst_kan = 0.0;
  for (int t = 0; t < 20; ++t)
    for (HeadKind kind : {HeadKind::mlp, HeadKind::kan}) {
      const std::size_t d_in = 2 + rng.below(3), h = 3 + rng.below(4), d = 2 + rng.below(3),
                        C = 2 + rng.below(3), B = 3 + rng.below(3);
      const Activation act = t % 2 ? Activation::silu : Activation::relu;
      const Classifier model = random_classifier(kind, d_in, h, d, C, act, rng);
      const Matrix x = random_matrix(B, d_in, rng);
      const Matrix y = one_hot(random_labels(B, C, rng), C);
      double& worst = kind == HeadKind::mlp ? worst_mlp : worst_kan;
      worst = std::max(worst, model_fd_error(model, x, y, MaskMatrix::all_ones(d, C)));
      MaskMatrix m = random_mask(d, C, 0.5, rng);
      worst = std::max(worst, model_fd_error(model, x, y, m));
    }
  return {worst_mlp < 1e-6 && worst_kan < 1e-4,
          "max FD rel err MLP " + fmt("%.2e", worst_mlp) + " (tol 1e-6), KAN " +
              fmt("%.2e", worst_kan) + " (tol 1e-4)"};
}

Outcome mask_correctness() {
  Rng rng(303);
  std::size_t checked = 0, bad = 0;
  for (std::size_t C : {3u, 10u, 100u})
    for (int tenth = 1; tenth <= 9; ++tenth) {
      const double p = tenth / 10.0;
      const auto q = static_cast<std::size_t>(std::floor(p * static_cast<double>(C) + 1e-9));
      for (int rep = 0; rep < 4; ++rep) {
        const std::size_t d = 8;
        Matrix s(C, d);
        // Half the repetitions draw from a small alphabet to exercise ties.
        for (double& v : s.data())
          v = rep % 2 ? static_cast<double>(rng.below(3)) : std::abs(rng.normal());
        const auto m = build_mask_node_wise(s, p);
        Matrix scaled = s;
        for (std::size_t k = 0; k < d; ++k) {
          std::vector<std::pair<double, std::size_t>> col;
          for (std::size_t j = 0; j < C; ++j) col.emplace_back(s(j, k), j);
          std::sort(col.begin(), col.end());
          std::vector<bool> expect(C, true);
          for (std::size_t i = 0; i < q; ++i) expect[col[i].second] = false;
          bad += m.zeros_in_node(k) != q;
          for (std::size_t j = 0; j < C; ++j) bad += m.kept(k, j) != expect[j];
          const double c = 1e-3 + 1e3 * rng.uniform();
          for (std::size_t j = 0; j < C; ++j) scaled(j, k) *= c;
        }
        bad += !(build_mask_node_wise(scaled, p) == m);
        ++checked;
      }
    }
  return {bad == 0, std::to_string(checked) + " (p, C, scores) cases, " + std::to_string(bad) +
                        " violations of cardinality, bottom-q selection or scale invariance"};
}

Outcome norm_monotonicity() {
  Rng rng(404);
  std::size_t violations = 0;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t C = 1 + rng.below(12), d = 1 + rng.below(12);
    const Matrix W = random_matrix(C, d, rng, 1.0 + 10.0 * rng.uniform());
    const MaskMatrix M = random_mask(d, C, rng.uniform(), rng);
    violations += apply_mask(W, M).frobenius_norm() > W.frobenius_norm();
  }
  return {violations == 0, std::to_string(violations) + " violations in 1000 (W, M) pairs"};
}

Outcome degenerate_epsilon() {
  ExperimentConfig cfg;
  cfg.noise = NoiseKind::none;
  cfg.epochs = 3;
  const auto clean = run_train(cfg);
  bool all_zero = !clean.grad_errors.empty();
  for (const auto& r : clean.grad_errors) all_zero &= r.epsilon_sum == 0.0;

  std::vector<std::vector<double>> on, off;
  auto recorder = [](std::vector<std::vector<double>>& out) {
    return StepObserver{[&out](std::size_t, const Classifier& m, const MaskMatrix&) {
                          out.push_back(flatten(m.parameters()));
                        },
                        50};
  };
  ExperimentConfig noisy;
  noisy.instrument = true;
  run_train(noisy, recorder(on));
  noisy.instrument = false;
  run_train(noisy, recorder(off));
  const bool same = on.size() == 50 && on == off;
  return {all_zero && same, "eps == 0 on all " + std::to_string(clean.grad_errors.size()) +
                                " clean-label steps: " + (all_zero ? "yes" : "no") +
                                "; 50-step trajectory identical with instrumentation off: " +
                                (same ? "yes" : "no")};
}

Outcome noise_statistics() {
  std::vector<int> labels(10000);
  for (std::size_t i = 0; i < labels.size(); ++i) labels[i] = static_cast<int>(i % 10);
  const auto sym = corrupt_symmetric(labels, 10, 0.4, 2024);
  std::size_t flips = 0, self = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    flips += sym.flipped[i];
    self += sym.flipped[i] && sym.labels[i] == labels[i];
  }
  const double rate = static_cast<double>(flips) / 10000.0;

  const auto pair_map = cifar10_pair_map();
  const auto pairs = corrupt_asymmetric_pairs(labels, 10, pair_map, 0.4, 7);
  std::size_t stray = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (pairs.labels[i] == labels[i]) continue;
    const auto it = pair_map.find(labels[i]);
    stray += it == pair_map.end() || it->second != pairs.labels[i];
  }
  const auto groups = contiguous_groups(10, 5);
  const auto circ = corrupt_asymmetric_circular(labels, 10, groups, 0.4, 8);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (circ.labels[i] == labels[i]) continue;
    const int succ = labels[i] % 5 == 4 ? labels[i] - 4 : labels[i] + 1;
    stray += circ.labels[i] != succ;
  }
  return {std::abs(rate - 0.4) <= 0.02 && self == 0 && stray == 0,
          "symmetric flip rate " + fmt("%.4f", rate) + " (0.40 +/- 0.02), self-flips " +
              std::to_string(self) + ", off-target asymmetric flips " + std::to_string(stray)};
}

// ---------------------------------------------------------------------------
// Trend analogues on the standard noisy-blobs experiment.

struct Curves {
  std::vector<double> grad_err;  // seed-averaged epoch means
  double last10 = 0.0;
  double max_run_seconds = 0.0;
};

Curves run_arm(const ExperimentConfig& base, const fs::path& dir) {
  Curves c;
  for (auto seed : kSeeds) {
    ExperimentConfig cfg = base;
    cfg.seed = seed;
    cfg.out_dir = (dir / ("seed" + std::to_string(seed))).string();
    const auto t0 = std::chrono::steady_clock::now();
    const auto r = run_train(cfg);
    c.max_run_seconds = std::max(c.max_run_seconds, seconds_since(t0));
    if (c.grad_err.empty()) c.grad_err.assign(r.metrics.epochs(), 0.0);
    for (std::size_t e = 0; e < r.metrics.epochs(); ++e)
      c.grad_err[e] += r.metrics.grad_err[e] / static_cast<double>(kSeeds.size());
    c.last10 += r.metrics.last10_test_acc() / static_cast<double>(kSeeds.size());
  }
  return c;
}

Outcome fig3_trend(HeadKind head, double threshold, const fs::path& out) {
  ExperimentConfig dcm;
  dcm.head = head;
  ExperimentConfig none = dcm;
  none.masking.enabled = false;
  const std::string tag(to_string(head));
  const Curves a = run_arm(dcm, out / ("fig3_" + tag) / "dcm");
  const Curves b = run_arm(none, out / ("fig3_" + tag) / "none");
  std::size_t lower = 0, total = 0;
  for (std::size_t e = 5; e < a.grad_err.size(); ++e) {
    ++total;
    lower += a.grad_err[e] < b.grad_err[e];
  }
  const double frac = total ? static_cast<double>(lower) / static_cast<double>(total) : 0.0;
  const double gain = a.last10 - b.last10;
  const double arm_seconds = std::max(a.max_run_seconds, b.max_run_seconds) * kSeeds.size();

  for (const char* kind : {"grad_err_curve", "accuracy_curve"})
    emit_plot(parse_plot_kind(kind),
              {(out / ("fig3_" + tag) / "dcm" / "seed1" / "metrics.csv").string(),
               (out / ("fig3_" + tag) / "none" / "seed1" / "metrics.csv").string()},
              (out / ("fig3_" + tag) / (std::string(kind) + ".svg")).string());

  const bool ok = frac >= 0.8 && gain >= threshold && arm_seconds < 300.0;
  return {ok, tag + " head: grad err lower in " + pct(frac) + " of epochs after 5 (need >= 80%); " +
                  "last-10 acc DCM " + pct(a.last10) + " vs unmasked " + pct(b.last10) +
                  " (gain " + fmt("%+.2f", 100.0 * gain) + " pp, need >= " +
                  fmt("%.0f", 100.0 * threshold) + "); " + fmt("%.0f", arm_seconds) +
                  "s per arm"};
}

std::string arms_line(const SuiteResult& r) {
  std::string s;
  for (const auto& arm : r.arms) s += (s.empty() ? "" : ", ") + arm + " " + pct(r.mean_last10(arm));
  return s;
}

Outcome strategy_ordering(const fs::path& out) {
  ExperimentConfig cfg;
  cfg.out_dir = (out / "ablate_strategy").string();
  const auto r = run_ablation_strategy(cfg, kSeeds);
  const double node = r.mean_last10("node_wise"), inv = r.mean_last10("node_wise_inverted");
  bool inv_worst = true;
  for (const auto& arm : r.arms)
    if (arm != "none") inv_worst &= inv <= r.mean_last10(arm);
  const bool ok = node >= r.mean_last10("random") && node >= inv + 0.02 && inv_worst;
  return {ok, arms_line(r)};
}

Outcome stage_ordering(const fs::path& out) {
  ExperimentConfig cfg;
  cfg.out_dir = (out / "ablate_stage").string();
  const auto r = run_ablation_stage(cfg, kSeeds);
  return {r.mean_last10("train_only") >= r.mean_last10("train_and_test") - 0.01, arms_line(r)};
}

Outcome interval_ordering(const fs::path& out) {
  ExperimentConfig cfg;
  cfg.out_dir = (out / "ablate_interval").string();
  const auto r = run_ablation_interval(cfg, kSeeds);
  return {r.mean_last10("per_iteration") >= r.mean_last10("per_epoch") - 0.01, arms_line(r)};
}

Outcome ratio_shape(const fs::path& out) {
  ExperimentConfig cfg;
  cfg.out_dir = (out / "sweep_ratio").string();
  const std::vector<double> ratios{0.1, 0.3, 0.5, 0.6, 0.8};
  const auto r = run_sweep_ratio(cfg, ratios, kSeeds);
  double best_ratio = ratios.front(), best = -1.0;
  for (double p : ratios) {
    const double acc = r.mean_last10(ratio_arm_name(p));
    if (acc > best) best = acc, best_ratio = p;
  }
  std::vector<std::string> inputs;
  for (double p : ratios)
    for (auto seed : kSeeds)
      inputs.push_back((out / "sweep_ratio" / ratio_arm_name(p) / ("seed" + std::to_string(seed)) /
                        "metrics.csv")
                           .string());
  emit_plot(PlotKind::ratio_sweep, inputs, (out / "sweep_ratio" / "ratio_sweep.svg").string());
  const bool ok = best_ratio >= 0.3 && r.mean_last10("p0.6") > r.mean_last10("p0.1");
  return {ok, arms_line(r) + "; best p = " + fmt("%g", best_ratio)};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome reproducibility(const fs::path& out) {
  std::vector<std::string> csv, svg;
  for (const char* run : {"run1", "run2"}) {
    ExperimentConfig cfg;
    cfg.seed = 7;
    cfg.out_dir = (out / "repro" / run).string();
    run_train(cfg);
    const fs::path metrics = out / "repro" / run / "metrics.csv";
    const fs::path plot = out / "repro" / (std::string(run) + ".svg");
    emit_plot(PlotKind::accuracy_curve, {metrics.string()}, plot.string());
    csv.push_back(slurp(metrics));
    svg.push_back(slurp(plot));
  }
  const bool ok = csv[0] == csv[1] && svg[0] == svg[1] && !csv[0].empty() && !svg[0].empty();
  return {ok, std::string("metrics CSV ") + (csv[0] == csv[1] ? "identical" : "DIFFERENT") +
                  " (" + std::to_string(csv[0].size()) + " bytes), SVG " +
                  (svg[0] == svg[1] ? "identical" : "DIFFERENT") + " (" +
                  std::to_string(svg[0].size()) + " bytes)"};
}

}  // namespace

int main(int argc, char** argv) {
  const fs::path out = argc > 1 ? fs::path(argv[1]) : fs::path("acceptance_out");
  fs::remove_all(out);
  fs::create_directories(out);

  criterion(1, "softmax-CE gradient fidelity", 10, softmax_ce_fidelity);
  criterion(2, "head gradient fidelity", 60, head_fidelity);
  criterion(3, "mask correctness", 10, mask_correctness);
  criterion(4, "norm monotonicity", 5, norm_monotonicity);
  criterion(5, "degenerate gradient error", 0, degenerate_epsilon);
  criterion(6, "noise statistics", 5, noise_statistics);
  criterion(7, "gradient error and accuracy trend (MLP)", 0,
            [&] { return fig3_trend(HeadKind::mlp, 0.02, out); });
  criterion(7, "gradient error and accuracy trend (KAN)", 0,
            [&] { return fig3_trend(HeadKind::kan, 0.01, out); });
  criterion(8, "masking strategy ordering", 900, [&] { return strategy_ordering(out); });
  criterion(9, "masking stage ordering", 0, [&] { return stage_ordering(out); });
  criterion(10, "masking interval ordering", 0, [&] { return interval_ordering(out); });
  criterion(11, "masking ratio shape", 0, [&] { return ratio_shape(out); });
  criterion(12, "reproducibility", 0, [&] { return reproducibility(out); });

  std::printf("%s: %d criterion line(s) failed\n", failures ? "FAIL" : "PASS", failures);
  return failures ? 1 : 0;
}
