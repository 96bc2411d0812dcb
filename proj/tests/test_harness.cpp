#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "dcm/config.hpp"
#include "dcm/errors.hpp"
#include "dcm/plot.hpp"
#include "dcm/trainer.hpp"
#include "test_support.hpp"

using namespace dcm;
using namespace dcm::testing;
namespace fs = std::filesystem;

namespace {

ExperimentConfig tiny_config() {
  ExperimentConfig cfg;
  cfg.classes = 4;
  cfg.n_per_class = 30;
  cfg.input_dim = 4;
  cfg.hidden_dim = 8;
  cfg.feature_dim = 6;
  cfg.epochs = 4;
  cfg.batch_size = 16;
  return cfg;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("dcm_harness_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("config parsing") {
  std::istringstream is(
      "# comment line\n"
      "head = kan   # trailing comment\n"
      "mask_ratio=0.3\n"
      "\n"
      "epochs = 7\n");
  const auto cfg = parse_config(is);
  CHECK(cfg.head == HeadKind::kan);
  CHECK(cfg.masking.ratio == 0.3);
  CHECK(cfg.epochs == 7);
  CHECK(cfg.classes == 10);

  std::istringstream unknown("epochs = 3\nbogus = 1\n");
  try {
    parse_config(unknown);
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("bogus") != std::string::npos);
    CHECK(msg.find("line 2") != std::string::npos);
  }

  std::istringstream malformed("epochs 3\n");
  CHECK_THROWS_AS(parse_config(malformed), ValidationError);

  ExperimentConfig o;
  apply_override(o, "lr=0.2");
  CHECK(o.learning_rate == 0.2);
  CHECK_THROWS_AS(apply_override(o, "lr"), ValidationError);
  CHECK_THROWS_AS(apply_override(o, "epochs=abc"), ValidationError);
}

TEST_CASE("config text round trip covers every key") {
  ExperimentConfig cfg = tiny_config();
  cfg.head = HeadKind::kan;
  cfg.masking.strategy = MaskStrategy::edge_wise;
  cfg.noise_groups = "0 1;2 3";
  std::istringstream is(cfg.to_text());
  const auto back = parse_config(is);
  CHECK(back.to_text() == cfg.to_text());
  for (const auto& key : config_keys()) CHECK(cfg.to_text().find(key + " = ") != std::string::npos);
}

TEST_CASE("config validation") {
  ExperimentConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.batch_size = 1;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
  cfg.masking.enabled = false;
  CHECK_NOTHROW(cfg.validate());

  ExperimentConfig kan;
  kan.head = HeadKind::kan;
  kan.masking.strategy = MaskStrategy::by_weight;
  CHECK_THROWS_AS(kan.validate(), ValidationError);

  ExperimentConfig ratio;
  ratio.masking.ratio = 1.0;
  CHECK_THROWS_AS(ratio.validate(), ValidationError);
}

TEST_CASE("clean separable blobs train above 95% test accuracy") {
  ExperimentConfig cfg;
  cfg.noise = NoiseKind::none;
  cfg.masking.enabled = false;
  const auto r = run_train(cfg);
  CHECK(r.metrics.final_test_acc() > 0.95);
}

TEST_CASE("a ratio that masks nothing reproduces unmasked training bitwise") {
  ExperimentConfig off = tiny_config();
  off.masking.enabled = false;
  ExperimentConfig q0 = tiny_config();
  q0.masking.ratio = 0.2;  // floor(0.2 * 4) = 0
  const auto a = run_train(off);
  const auto b = run_train(q0);
  CHECK(a.metrics.test_acc == b.metrics.test_acc);
  CHECK(a.metrics.train_loss == b.metrics.train_loss);
  CHECK(flatten(a.model.parameters()) == flatten(b.model.parameters()));
}

TEST_CASE("identical config and seed give byte-identical outputs") {
  const auto d1 = scratch("det1"), d2 = scratch("det2");
  ExperimentConfig cfg = tiny_config();
  cfg.out_dir = d1.string();
  run_train(cfg);
  cfg.out_dir = d2.string();
  run_train(cfg);
  for (const char* f : {"metrics.csv", "checkpoint.bin", "final_mask.txt"}) {
    CHECK(fs::exists(d1 / f));
    CHECK(slurp(d1 / f) == slurp(d2 / f));
  }
  const std::string csv = slurp(d1 / "metrics.csv");
  CHECK(csv.rfind(std::string(kMetricsHeader) + "\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 5);
}

TEST_CASE("checkpoint round trip") {
  for (HeadKind kind : {HeadKind::mlp, HeadKind::kan}) {
    ExperimentConfig cfg = tiny_config();
    cfg.head = kind;
    const auto r = run_train(cfg);
    std::stringstream ss;
    write_checkpoint(ss, r.model);
    const Classifier back = read_checkpoint(ss);
    CHECK(flatten(back.parameters()) == flatten(r.model.parameters()));
    CHECK(back.backbone.activation == r.model.backbone.activation);
    CHECK(back.head_kind() == kind);
  }
  std::stringstream truncated("DCMHEAD1BKBN");
  CHECK_THROWS_AS(read_checkpoint(truncated), FormatError);
}

TEST_CASE("per-epoch masks are frozen within an epoch; per-iteration masks follow the weights") {
  ExperimentConfig cfg = tiny_config();
  cfg.masking.interval = MaskInterval::per_epoch;
  std::vector<MaskMatrix> masks;
  StepObserver obs{[&](std::size_t, const Classifier&, const MaskMatrix& m) { masks.push_back(m); }, 0};
  run_train(cfg, obs);
  const std::size_t per_epoch = (cfg.classes * cfg.n_per_class * 4 / 5 + cfg.batch_size - 1) /
                                cfg.batch_size;
  REQUIRE(masks.size() == per_epoch * cfg.epochs);
  for (std::size_t s = 0; s < masks.size(); ++s) CHECK(masks[s] == masks[s - s % per_epoch]);
  for (const auto& m : masks)
    for (std::size_t k = 0; k < m.features(); ++k) CHECK(m.zeros_in_node(k) == 2);
}

TEST_CASE("train_and_test masking changes evaluation only") {
  ExperimentConfig a = tiny_config(), b = tiny_config();
  b.masking.stage = MaskStage::train_and_test;
  const auto ra = run_train(a), rb = run_train(b);
  CHECK(ra.metrics.train_loss == rb.metrics.train_loss);
  CHECK(flatten(ra.model.parameters()) == flatten(rb.model.parameters()));
}

TEST_CASE("suites: cardinality and controlled comparisons") {
  ExperimentConfig base = tiny_config();
  const std::vector<std::uint64_t> seeds{1, 2};

  const auto sweep = run_sweep_ratio(base, {0.3, 0.6}, seeds);
  CHECK(sweep.rows.size() == 4);
  CHECK_THROWS_AS(run_sweep_ratio(base, {1.2}, seeds), ValidationError);

  const auto single = run_sweep_ratio(base, {0.6}, {1});
  ExperimentConfig one = base;
  one.seed = 1;
  CHECK(single.rows.at(0).last10_test_acc == run_train(one).metrics.last10_test_acc());

  const auto strat = run_ablation_strategy(base, seeds);
  CHECK(strat.rows.size() == 6 * seeds.size());
  ExperimentConfig none = base;
  none.masking.enabled = false;
  none.seed = 2;
  const auto plain = run_train(none);
  for (const auto& r : strat.rows)
    if (r.arm == "none" && r.seed == 2) CHECK(r.last10_test_acc == plain.metrics.last10_test_acc());

  ExperimentConfig kan = base;
  kan.head = HeadKind::kan;
  CHECK(run_ablation_strategy(kan, {1}).rows.size() == 5);

  CHECK(run_ablation_stage(base, {1, 2, 3}).rows.size() == 9);
  CHECK(run_ablation_interval(base, {1, 2, 3}).rows.size() == 6);

  const std::string csv = summary_csv(sweep, "mlp");
  CHECK(csv.rfind(std::string(kSummaryHeader) + "\n", 0) == 0);
  CHECK(csv.find("sweep_ratio,p0.3,1,mlp,") != std::string::npos);
}

TEST_CASE("ablation arms share data order and initial parameters") {
  ExperimentConfig a = tiny_config(), b = tiny_config();
  b.masking.strategy = MaskStrategy::random;
  std::vector<double> first_a, first_b;
  const auto pa = prepare_experiment(a), pb = prepare_experiment(b);
  CHECK(flatten(pa.model.parameters()) == flatten(pb.model.parameters()));
  CHECK(pa.data.train.x == pb.data.train.x);
  CHECK(pa.data.train.y_observed == pb.data.train.y_observed);

  // Identical first-batch masks across interval arms.
  ExperimentConfig it = tiny_config(), ep = tiny_config();
  ep.masking.interval = MaskInterval::per_epoch;
  MaskMatrix m_it, m_ep;
  run_train(it, {[&](std::size_t, const Classifier&, const MaskMatrix& m) { m_it = m; }, 1});
  run_train(ep, {[&](std::size_t, const Classifier&, const MaskMatrix& m) { m_ep = m; }, 1});
  CHECK(m_it == m_ep);
}

TEST_CASE("divergence raises DivergenceError after flushing completed epochs") {
  const auto dir = scratch("diverge");
  ExperimentConfig cfg = tiny_config();
  cfg.learning_rate = 1e200;
  cfg.schedule = Schedule::constant;
  cfg.epochs = 50;
  cfg.out_dir = dir.string();
  CHECK_THROWS_AS(run_train(cfg), DivergenceError);
  CHECK(slurp(dir / "metrics.csv").rfind(kMetricsHeader, 0) == 0);
}

TEST_CASE("plots are deterministic and reject empty input") {
  const auto dir = scratch("plot");
  ExperimentConfig cfg = tiny_config();
  cfg.out_dir = (dir / "a").string();
  run_train(cfg);
  cfg.masking.enabled = false;
  cfg.out_dir = (dir / "b").string();
  run_train(cfg);
  const std::vector<std::string> inputs{(dir / "a" / "metrics.csv").string(),
                                        (dir / "b" / "metrics.csv").string()};
  for (PlotKind kind : {PlotKind::accuracy_curve, PlotKind::grad_err_curve, PlotKind::ratio_sweep}) {
    emit_plot(kind, inputs, (dir / "p1.svg").string());
    emit_plot(kind, inputs, (dir / "p2.svg").string());
    const std::string svg = slurp(dir / "p1.svg");
    CHECK(svg == slurp(dir / "p2.svg"));
    CHECK(svg.find("<svg") != std::string::npos);
    CHECK(svg.find("mlp / node_wise") != std::string::npos);
    CHECK(svg.find("mlp / none") != std::string::npos);
  }
  emit_plot(PlotKind::mask_density, {(dir / "a" / "final_mask.txt").string()},
            (dir / "mask.svg").string());
  CHECK(fs::exists(dir / "mask.svg"));

  CHECK_THROWS_AS(render_metrics_plot(PlotKind::accuracy_curve, {}), ValidationError);
  CHECK_THROWS_AS(render_metrics_plot(PlotKind::accuracy_curve, {MetricsSeries{"x", {}}}),
                  ValidationError);

  {
    std::ofstream empty(dir / "empty.csv");
    empty << kMetricsHeader << '\n';
    std::ofstream bad(dir / "bad.csv");
    bad << kMetricsHeader << "\n1,0.5,oops\n";
  }
  CHECK_THROWS_AS(emit_plot(PlotKind::accuracy_curve, {(dir / "empty.csv").string()},
                            (dir / "none.svg").string()),
                  ValidationError);
  CHECK_FALSE(fs::exists(dir / "none.svg"));
  try {
    emit_plot(PlotKind::accuracy_curve, {(dir / "bad.csv").string()}, (dir / "none.svg").string());
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  CHECK_FALSE(fs::exists(dir / "none.svg"));
}
