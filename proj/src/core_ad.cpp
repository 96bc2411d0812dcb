#include "dcm/core_ad.hpp"

#include <algorithm>
#include <cmath>

#include "dcm/errors.hpp"

namespace dcm {

Matrix linear_forward(const Matrix& x, const Matrix& W, std::span<const double> b) {
  if (x.cols() != W.cols())
    throw DimensionError("linear_forward: input " + x.shape_str() + " vs weight " +
                         W.shape_str());
  if (b.size() != W.rows())
    throw DimensionError("linear_forward: weight " + W.shape_str() + " vs bias [" +
                         std::to_string(b.size()) + "]");
  const std::size_t B = x.rows(), C = W.rows(), d = W.cols();
  Matrix out(B, C);
  for (std::size_t i = 0; i < B; ++i) {
    for (std::size_t j = 0; j < C; ++j) {
      double acc = 0.0;
      for (std::size_t k = 0; k < d; ++k) acc += x(i, k) * W(j, k);
      out(i, j) = acc + b[j];
    }
  }
  require_finite(out, "linear_forward");
  return out;
}

LinearGrads linear_backward(const Matrix& upstream, const Matrix& x, const Matrix& W) {
  if (upstream.rows() != x.rows() || upstream.cols() != W.rows())
    throw DimensionError("linear_backward: upstream " + upstream.shape_str() +
                         " vs forward output [" + std::to_string(x.rows()) + "x" +
                         std::to_string(W.rows()) + "]");
  if (x.cols() != W.cols())
    throw DimensionError("linear_backward: input " + x.shape_str() + " vs weight " +
                         W.shape_str());
  const std::size_t B = x.rows(), C = W.rows(), d = W.cols();
  LinearGrads g{Matrix(B, d), Matrix(C, d), std::vector<double>(C, 0.0)};
  for (std::size_t i = 0; i < B; ++i) {
    for (std::size_t j = 0; j < C; ++j) {
      const double u = upstream(i, j);
      g.db[j] += u;
      for (std::size_t k = 0; k < d; ++k) {
        g.dW(j, k) += u * x(i, k);
        g.dX(i, k) += u * W(j, k);
      }
    }
  }
  return g;
}

Activation parse_activation(std::string_view name) {
  if (name == "relu") return Activation::relu;
  if (name == "silu") return Activation::silu;
  throw ValidationError("unknown activation '" + std::string(name) + "'");
}

std::string_view to_string(Activation kind) {
  return kind == Activation::relu ? "relu" : "silu";
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double silu(double x) { return x * sigmoid(x); }

double silu_derivative(double x) {
  const double s = sigmoid(x);
  return s * (1.0 + x * (1.0 - s));
}

Matrix activation_forward(const Matrix& x, Activation kind) {
  Matrix out = x;
  for (double& v : out.data()) v = kind == Activation::relu ? std::max(v, 0.0) : silu(v);
  require_finite(out, "activation_forward");
  return out;
}

Matrix activation_backward(const Matrix& upstream, const Matrix& x, Activation kind) {
  require_same_shape(upstream, x, "activation_backward");
  Matrix out(x.rows(), x.cols());
  auto o = out.data();
  auto u = upstream.data();
  auto xs = x.data();
  for (std::size_t i = 0; i < o.size(); ++i) {
    const double d = kind == Activation::relu ? (xs[i] > 0.0 ? 1.0 : 0.0) : silu_derivative(xs[i]);
    o[i] = u[i] * d;
  }
  return out;
}

Matrix softmax(const Matrix& z) {
  Matrix p(z.rows(), z.cols());
  for (std::size_t i = 0; i < z.rows(); ++i) {
    auto zr = z.row(i);
    auto pr = p.row(i);
    const double m = *std::max_element(zr.begin(), zr.end());
    double total = 0.0;
    for (std::size_t j = 0; j < zr.size(); ++j) {
      pr[j] = std::exp(zr[j] - m);
      total += pr[j];
    }
    for (double& v : pr) v /= total;
  }
  return p;
}

Matrix softmax_backward(const Matrix& p, const Matrix& dp) {
  require_same_shape(p, dp, "softmax_backward");
  Matrix dz(p.rows(), p.cols());
  for (std::size_t i = 0; i < p.rows(); ++i) {
    double dot = 0.0;
    for (std::size_t j = 0; j < p.cols(); ++j) dot += dp(i, j) * p(i, j);
    for (std::size_t j = 0; j < p.cols(); ++j) dz(i, j) = p(i, j) * (dp(i, j) - dot);
  }
  return dz;
}

namespace {

void require_one_hot(const Matrix& labels) {
  for (std::size_t i = 0; i < labels.rows(); ++i) {
    int hot = 0;
    for (double v : labels.row(i)) {
      if (v == 1.0) {
        ++hot;
      } else if (v != 0.0) {
        hot = -1;
        break;
      }
    }
    if (hot != 1)
      throw ValidationError("label row " + std::to_string(i) + " is not one-hot");
  }
}

}  // namespace

LossResult softmax_ce_forward(const Matrix& z, const Matrix& labels) {
  require_same_shape(z, labels, "softmax_ce_forward");
  require_finite(z, "softmax_ce_forward logits");
  require_one_hot(labels);
  LossResult r{0.0, softmax(z)};
  const std::size_t B = z.rows();
  double total = 0.0;
  for (std::size_t i = 0; i < B; ++i) {
    auto zr = z.row(i);
    const double m = *std::max_element(zr.begin(), zr.end());
    double sum = 0.0;
    for (double v : zr) sum += std::exp(v - m);
    const double log_norm = m + std::log(sum);
    for (std::size_t j = 0; j < z.cols(); ++j)
      if (labels(i, j) != 0.0) total -= labels(i, j) * (zr[j] - log_norm);
  }
  r.loss = B == 0 ? 0.0 : total / static_cast<double>(B);
  return r;
}

Matrix softmax_ce_backward(const Matrix& p, const Matrix& labels) {
  require_same_shape(p, labels, "softmax_ce_backward");
  Matrix g = p - labels;
  const double inv_b = 1.0 / static_cast<double>(p.rows());
  for (double& v : g.data()) v *= inv_b;
  return g;
}

MaeResult mae_loss(const Matrix& p, const Matrix& labels) {
  require_same_shape(p, labels, "mae_loss");
  const double inv_b = 1.0 / static_cast<double>(p.rows());
  MaeResult r{0.0, Matrix(p.rows(), p.cols())};
  double total = 0.0;
  auto pd = p.data();
  auto yd = labels.data();
  auto gd = r.grad_p.data();
  for (std::size_t i = 0; i < pd.size(); ++i) {
    const double diff = pd[i] - yd[i];
    total += std::abs(diff);
    gd[i] = diff > 0.0 ? inv_b : (diff < 0.0 ? -inv_b : 0.0);
  }
  r.loss = total * inv_b;
  return r;
}

Matrix one_hot(std::span<const int> labels, std::size_t classes) {
  Matrix m(labels.size(), classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= classes)
      throw ValidationError("label " + std::to_string(labels[i]) + " outside [0, " +
                            std::to_string(classes) + ")");
    m(i, static_cast<std::size_t>(labels[i])) = 1.0;
  }
  return m;
}

LossKind parse_loss_kind(std::string_view name) {
  if (name == "ce") return LossKind::ce;
  if (name == "mae") return LossKind::mae;
  throw ValidationError("unknown loss '" + std::string(name) + "'");
}

std::string_view to_string(LossKind kind) { return kind == LossKind::ce ? "ce" : "mae"; }

LogitLoss logit_loss(const Matrix& z, const Matrix& labels, LossKind kind) {
  auto ce = softmax_ce_forward(z, labels);
  if (kind == LossKind::ce) return {ce.loss, softmax_ce_backward(ce.p, labels)};
  auto mae = mae_loss(ce.p, labels);
  return {mae.loss, softmax_backward(ce.p, mae.grad_p)};
}

std::vector<double> numeric_gradient(const ScalarFn& f, std::span<const double> params,
                                     double eps) {
  if (!(eps > 0.0)) throw ValidationError("finite difference step must be positive");
  std::vector<double> theta(params.begin(), params.end());
  std::vector<double> grad(theta.size());
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double saved = theta[i];
    theta[i] = saved + eps;
    const double up = f(theta);
    theta[i] = saved - eps;
    const double down = f(theta);
    theta[i] = saved;
    if (!std::isfinite(up) || !std::isfinite(down))
      throw OracleError("non-finite function value at coordinate " + std::to_string(i));
    grad[i] = (up - down) / (2.0 * eps);
  }
  return grad;
}

double finite_difference_check(const ScalarFn& f, std::span<const double> params,
                               std::span<const double> analytic, double eps) {
  if (params.size() != analytic.size())
    throw DimensionError("finite_difference_check: " + std::to_string(params.size()) +
                         " parameters vs " + std::to_string(analytic.size()) + " gradients");
  for (double v : params)
    if (!std::isfinite(v)) throw OracleError("non-finite parameter");
  const auto numeric = numeric_gradient(f, params, eps);
  double worst = 0.0;
  for (std::size_t i = 0; i < numeric.size(); ++i) {
    const double err = std::abs(numeric[i] - analytic[i]) / std::max(1.0, std::abs(analytic[i]));
    worst = std::max(worst, err);
  }
  return worst;
}

GradTape::Slot GradTape::push(Matrix value) {
  adjoints_.emplace_back(value.rows(), value.cols());
  values_.push_back(std::move(value));
  return values_.size() - 1;
}

void GradTape::accumulate(Slot s, const Matrix& delta) {
  Matrix& g = adjoints_.at(s);
  require_same_shape(g, delta, "GradTape::accumulate");
  auto gd = g.data();
  auto dd = delta.data();
  for (std::size_t i = 0; i < gd.size(); ++i) gd[i] += dd[i];
}

void GradTape::accumulate(Slot s, std::span<const double> delta) {
  Matrix& g = adjoints_.at(s);
  if (g.size() != delta.size())
    throw DimensionError("GradTape::accumulate: adjoint " + g.shape_str() + " vs [" +
                         std::to_string(delta.size()) + "]");
  auto gd = g.data();
  for (std::size_t i = 0; i < gd.size(); ++i) gd[i] += delta[i];
}

void GradTape::record(std::string op, BackwardFn fn) {
  op_names_.push_back(std::move(op));
  backward_fns_.push_back(std::move(fn));
}

void GradTape::backward(Slot output, const Matrix& seed) {
  for (Matrix& g : adjoints_) g.fill(0.0);
  require_same_shape(values_.at(output), seed, "GradTape::backward seed");
  adjoints_[output] = seed;
  for (auto it = backward_fns_.rbegin(); it != backward_fns_.rend(); ++it) (*it)(*this);
}

GradTape::Slot record_linear(GradTape& tape, GradTape::Slot x, GradTape::Slot W,
                             GradTape::Slot bias) {
  const GradTape::Slot out =
      tape.push(linear_forward(tape.value(x), tape.value(W), tape.value(bias).data()));
  tape.record("linear", [=](GradTape& t) {
    auto g = linear_backward(t.grad(out), t.value(x), t.value(W));
    t.accumulate(x, g.dX);
    t.accumulate(W, g.dW);
    t.accumulate(bias, g.db);
  });
  return out;
}

GradTape::Slot record_activation(GradTape& tape, GradTape::Slot x, Activation kind) {
  const GradTape::Slot out = tape.push(activation_forward(tape.value(x), kind));
  tape.record(std::string(to_string(kind)), [=](GradTape& t) {
    t.accumulate(x, activation_backward(t.grad(out), t.value(x), kind));
  });
  return out;
}

}  // namespace dcm
