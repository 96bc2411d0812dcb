#include <cmath>
#include <limits>
#include <sstream>

#include "doctest.h"
#include "dcm/errors.hpp"
#include "dcm/instrument.hpp"
#include "dcm/trainer.hpp"
#include "test_support.hpp"

using namespace dcm;
using namespace dcm::testing;

TEST_CASE("gradient_error") {
  const std::vector<double> a{1.0, -2.0, 0.5};
  CHECK(gradient_error(a, a) == 0.0);
  CHECK(gradient_error(std::vector<double>{0, 0}, std::vector<double>{3, 4}) == 5.0);
  const std::vector<double> b{0.3, 2.0, -1.0};
  CHECK(gradient_error(a, b) == gradient_error(b, a));
  CHECK_THROWS_AS(gradient_error(a, std::vector<double>{1.0}), DimensionError);
}

TEST_CASE("accuracy and its tie rule") {
  const std::vector<int> y{0, 2, 1, 3};
  CHECK(accuracy(one_hot(y, 4), y) == 1.0);
  const std::vector<int> shifted{1, 3, 2, 0};
  CHECK(accuracy(one_hot(shifted, 4), y) == 0.0);
  CHECK(accuracy(Matrix(4, 4, 0.5), y) == 0.25);
  const std::vector<int> zeros{0, 0, 0, 0};
  CHECK(accuracy(Matrix(4, 4, 0.5), zeros) == 1.0);
}

TEST_CASE("last_k_mean") {
  std::vector<double> s(20);
  for (int i = 0; i < 20; ++i) s[i] = i + 1;
  CHECK(last_k_mean(s, 10) == 15.5);
  CHECK(last_k_mean(std::vector<double>(7, 0.3)) == doctest::Approx(0.3));
  CHECK(last_k_mean(std::vector<double>{1, 2, 3, 4, 5}, 10) == 3.0);
  CHECK_THROWS_AS(last_k_mean(std::vector<double>{}), ValidationError);
}

TEST_CASE("epsilon is exactly zero when observed labels are clean") {
  Rng rng(1);
  for (HeadKind kind : {HeadKind::mlp, HeadKind::kan}) {
    const Classifier model = random_classifier(kind, 3, 6, 4, 3, Activation::relu, rng);
    auto pass = forward_features(model, random_matrix(8, 3, rng));
    forward_head(pass, random_mask(4, 3, 0.5, rng));
    const Matrix y = one_hot(random_labels(8, 3, rng), 3);
    const auto r = dual_backprop_step(pass, y, &y, LossKind::ce, kDesignatedLayer);
    REQUIRE(r.grad_error.has_value());
    CHECK(*r.grad_error == 0.0);
  }
}

TEST_CASE("epsilon matches a hand-written Jacobian on a two-sample toy") {
  // Two samples, d_in = 2, h = 3, d_feat = 2, C = 2. For CE the logit
  // gradients differ only by (y - y_noisy) / B, so the W2/b2 gradient gap is
  // that difference pushed through the masked head, the standardization and
  // the second affine layer.
  Rng rng(2);
  Classifier model{Backbone::init(2, 3, 2, Activation::relu, rng), MlpHead::init(2, 2, rng)};
  const Matrix x{{0.4, -1.1}, {1.3, 0.7}};
  MaskMatrix mask(2, 2);
  mask.mask(0, 1);
  const Matrix clean = one_hot(std::vector<int>{0, 1}, 2);
  const Matrix noisy = one_hot(std::vector<int>{1, 1}, 2);

  auto pass = forward_features(model, x);
  forward_head(pass, mask);
  const auto r = dual_backprop_step(pass, noisy, &clean, LossKind::ce, kDesignatedLayer);

  const auto& W = std::get<MlpHead>(model.head).W;
  const double delta[2][2] = {{(1 - 0) / 2.0, (0 - 1) / 2.0}, {0.0, 0.0}};  // (y - y_noisy) / B
  Matrix dV(2, 2);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t k = 0; k < 2; ++k)
      for (std::size_t j = 0; j < 2; ++j) dV(i, k) -= delta[i][j] * mask(k, j) * W(j, k);
  // dV is the noisy-minus-clean feature gradient; now invert the standardization by hand.
  const auto cache = backbone_forward(x, model.backbone);
  Matrix dH2(2, 2);
  for (std::size_t k = 0; k < 2; ++k) {
    const double is = cache.features.inv_std[k];
    double mean_g = 0, mean_gx = 0;
    for (std::size_t i = 0; i < 2; ++i) {
      mean_g += dV(i, k) / 2.0;
      mean_gx += dV(i, k) * cache.features.out(i, k) / 2.0;
    }
    for (std::size_t i = 0; i < 2; ++i)
      dH2(i, k) = is * (dV(i, k) - mean_g - cache.features.out(i, k) * mean_gx);
  }
  double sq = 0;
  for (std::size_t f = 0; f < 2; ++f) {
    double db = 0;
    for (std::size_t i = 0; i < 2; ++i) db += dH2(i, f);
    sq += db * db;
    for (std::size_t h = 0; h < 3; ++h) {
      double dw = 0;
      for (std::size_t i = 0; i < 2; ++i) dw += dH2(i, f) * cache.act1(i, h);
      sq += dw * dw;
    }
  }
  REQUIRE(r.grad_error.has_value());
  CHECK(*r.grad_error == doctest::Approx(std::sqrt(sq)).epsilon(1e-10));
  CHECK(*r.grad_error > 0.0);
}

TEST_CASE("only the observed-label gradients are returned") {
  Rng rng(3);
  const Classifier model = random_classifier(HeadKind::mlp, 3, 5, 4, 3, Activation::silu, rng);
  const Matrix x = random_matrix(6, 3, rng);
  const Matrix noisy = one_hot(random_labels(6, 3, rng), 3);
  const Matrix clean = one_hot(random_labels(6, 3, rng), 3);
  const MaskMatrix m = random_mask(4, 3, 0.5, rng);

  auto a = forward_features(model, x);
  forward_head(a, m);
  const auto with = dual_backprop_step(a, noisy, &clean, LossKind::ce, kDesignatedLayer);
  auto b = forward_features(model, x);
  forward_head(b, m);
  const auto without = dual_backprop_step(b, noisy, nullptr, LossKind::ce, kDesignatedLayer);
  CHECK_FALSE(without.grad_error.has_value());
  CHECK(with.grads == without.grads);
  CHECK(with.loss == without.loss);
}

TEST_CASE("instrumentation leaves the 50-step trajectory bitwise unchanged") {
  ExperimentConfig cfg;
  cfg.n_per_class = 40;
  cfg.epochs = 20;
  std::vector<std::vector<double>> on, off;
  auto recorder = [](std::vector<std::vector<double>>& out) {
    return StepObserver{[&out](std::size_t, const Classifier& m, const MaskMatrix&) {
                          out.push_back(flatten(m.parameters()));
                        },
                        50};
  };
  cfg.instrument = true;
  const auto r_on = run_train(cfg, recorder(on));
  cfg.instrument = false;
  const auto r_off = run_train(cfg, recorder(off));
  CHECK(r_on.steps == 50);
  REQUIRE(on.size() == 50);
  CHECK(on == off);
}

TEST_CASE("metrics csv formatting and parsing") {
  RunMetrics m;
  m.train_loss = {1.5, 1.25};
  m.train_acc = {0.5, 0.625};
  m.test_acc = {0.4, 0.7};
  m.grad_err = {std::numeric_limits<double>::quiet_NaN(), 0.123456789};
  RunLabels labels;
  labels.mask_strategy = "node_wise";
  labels.mask_ratio = 0.6;
  labels.seed = 3;
  std::stringstream ss;
  write_metrics_csv(ss, m, labels);
  const std::string text = ss.str();
  CHECK(text.rfind(std::string(kMetricsHeader) + "\n", 0) == 0);
  CHECK(text.find("1,1.5,0.5,0.4,nan,node_wise,0.6,per_iteration,train_only,mlp,3\n") !=
        std::string::npos);
  CHECK(text.find("2,1.25,0.625,0.7,0.123457,") != std::string::npos);

  const auto rows = read_metrics_csv(ss);
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].epoch == 1);
  CHECK(std::isnan(rows[0].grad_err));
  CHECK(rows[1].test_acc == 0.7);
  CHECK(rows[1].labels.mask_strategy == "node_wise");

  std::stringstream bad(std::string(kMetricsHeader) + "\n1,2,3\n");
  try {
    read_metrics_csv(bad);
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
}

TEST_CASE("run metrics summaries") {
  RunMetrics m;
  for (int i = 1; i <= 20; ++i) m.test_acc.push_back(i / 20.0);
  CHECK(m.final_test_acc() == 1.0);
  CHECK(m.best_test_acc() == 1.0);
  CHECK(m.last10_test_acc() == doctest::Approx(15.5 / 20.0));
  CHECK_THROWS_AS(RunMetrics{}.best_test_acc(), ValidationError);
}
