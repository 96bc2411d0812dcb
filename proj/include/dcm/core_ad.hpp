#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dcm/matrix.hpp"

namespace dcm {

// ---------------------------------------------------------------------------
// Dense kernels. Each backward takes the upstream gradient of the forward
// output plus whatever the forward saved.

// out[i][j] = sum_k x[i][k] * W[j][k] + b[j]
Matrix linear_forward(const Matrix& x, const Matrix& W, std::span<const double> b);

struct LinearGrads {
  Matrix dX;
  Matrix dW;
  std::vector<double> db;
};
LinearGrads linear_backward(const Matrix& upstream, const Matrix& x, const Matrix& W);

enum class Activation { relu, silu };

Activation parse_activation(std::string_view name);
std::string_view to_string(Activation kind);

double sigmoid(double x);
double silu(double x);
double silu_derivative(double x);

Matrix activation_forward(const Matrix& x, Activation kind);
Matrix activation_backward(const Matrix& upstream, const Matrix& x, Activation kind);

// Row-wise softmax with per-row max subtraction.
Matrix softmax(const Matrix& z);
// Vector-Jacobian product of softmax: given p = softmax(z) and dL/dp, returns dL/dz.
Matrix softmax_backward(const Matrix& p, const Matrix& dp);

struct LossResult {
  double loss = 0.0;
  Matrix p;
};
// Batch-mean cross entropy against one-hot labels. Throws ValidationError on
// a label row that is not one-hot.
LossResult softmax_ce_forward(const Matrix& z, const Matrix& labels);
// (p - y) / B
Matrix softmax_ce_backward(const Matrix& p, const Matrix& labels);

struct MaeResult {
  double loss = 0.0;
  Matrix grad_p;  // sign(p - y) / B, sign(0) = 0
};
MaeResult mae_loss(const Matrix& p, const Matrix& labels);

Matrix one_hot(std::span<const int> labels, std::size_t classes);

enum class LossKind { ce, mae };
LossKind parse_loss_kind(std::string_view name);
std::string_view to_string(LossKind kind);

struct LogitLoss {
  double loss = 0.0;
  Matrix dlogits;
};
// Loss on softmax(z) and its gradient with respect to the logits z.
LogitLoss logit_loss(const Matrix& z, const Matrix& labels, LossKind kind);

// ---------------------------------------------------------------------------
// Finite-difference oracle.

using ScalarFn = std::function<double(std::span<const double>)>;

// Central differences of f at params, one coordinate at a time.
std::vector<double> numeric_gradient(const ScalarFn& f, std::span<const double> params,
                                     double eps = 1e-5);

// Max over coordinates of |numeric - analytic| / max(1, |analytic|).
double finite_difference_check(const ScalarFn& f, std::span<const double> params,
                               std::span<const double> analytic, double eps = 1e-5);

// ---------------------------------------------------------------------------
// Define-by-run tape. Slots hold forward values; each recorded op pushes a
// backward closure that reads its output adjoint and accumulates into its
// inputs' adjoints. backward() may be replayed several times from the same
// forward pass (the adjoints are reset each time).
class GradTape {
 public:
  using Slot = std::size_t;
  using BackwardFn = std::function<void(GradTape&)>;

  Slot push(Matrix value);
  const Matrix& value(Slot s) const { return values_.at(s); }

  Matrix& grad(Slot s) { return adjoints_.at(s); }
  const Matrix& grad(Slot s) const { return adjoints_.at(s); }
  void accumulate(Slot s, const Matrix& delta);
  void accumulate(Slot s, std::span<const double> delta);

  void record(std::string op, BackwardFn fn);

  // Seeds the adjoint of `output` and replays the recorded ops newest-first.
  void backward(Slot output, const Matrix& seed);

  const std::vector<std::string>& op_names() const { return op_names_; }
  std::size_t slot_count() const { return values_.size(); }

 private:
  std::vector<Matrix> values_;
  std::vector<Matrix> adjoints_;
  std::vector<std::string> op_names_;
  std::vector<BackwardFn> backward_fns_;
};

// Tape-recording wrappers over the kernels above. `bias` is a 1xC slot.
GradTape::Slot record_linear(GradTape& tape, GradTape::Slot x, GradTape::Slot W,
                             GradTape::Slot bias);
GradTape::Slot record_activation(GradTape& tape, GradTape::Slot x, Activation kind);

}  // namespace dcm
