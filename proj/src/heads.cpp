#include "dcm/heads.hpp"

#include <cmath>
#include <string>

#include "dcm/errors.hpp"

namespace dcm {

MlpHead MlpHead::init(std::size_t classes, std::size_t features, Rng& rng) {
  MlpHead h{Matrix(classes, features), Matrix(1, classes)};
  const double stddev = std::sqrt(2.0 / static_cast<double>(features));
  for (double& w : h.W.data()) w = rng.normal(0.0, stddev);
  return h;
}

Matrix mlp_forward(const Matrix& v, const MlpHead& head, const MaskMatrix& mask) {
  require_mask_fits(mask, head.classes(), head.features(), "mlp_forward");
  return linear_forward(v, apply_mask(head.W, mask), head.b.data());
}

MlpGrads mlp_backward(const Matrix& upstream, const Matrix& v, const MlpHead& head,
                      const MaskMatrix& mask) {
  require_mask_fits(mask, head.classes(), head.features(), "mlp_backward");
  auto g = linear_backward(upstream, v, apply_mask(head.W, mask));
  for (std::size_t j = 0; j < head.classes(); ++j)
    for (std::size_t k = 0; k < head.features(); ++k)
      if (!mask.kept(k, j)) g.dW(j, k) = 0.0;
  return {std::move(g.dW), std::move(g.db), std::move(g.dX)};
}

double kan_edge_eval(double x, const KanEdge& edge, const SplineGrid& grid) {
  if (edge.coeffs.size() != grid.basis_count())
    throw DimensionError("kan_edge_eval: " + std::to_string(edge.coeffs.size()) +
                         " coefficients for " + std::to_string(grid.basis_count()) +
                         " basis functions");
  const auto basis = bspline_basis(x, grid);
  double spline = 0.0;
  for (std::size_t m = 0; m < basis.size(); ++m) spline += edge.coeffs[m] * basis[m];
  return edge.base_weight * silu(x) + edge.spline_weight * spline;
}

double kan_edge_derivative(double x, const KanEdge& edge, const SplineGrid& grid) {
  const auto basis = bspline_basis_with_derivative(x, grid);
  double spline = 0.0;
  for (std::size_t m = 0; m < basis.derivative.size(); ++m)
    spline += edge.coeffs.at(m) * basis.derivative[m];
  return edge.base_weight * silu_derivative(x) + edge.spline_weight * spline;
}

KanHead::KanHead(std::size_t classes, std::size_t features, SplineGrid grid)
    : grid_(grid),
      coeffs_(classes * features, grid.basis_count()),
      base_(classes, features),
      spline_(classes, features) {}

KanHead KanHead::init(std::size_t classes, std::size_t features, const SplineGrid& grid,
                      Rng& rng) {
  KanHead h(classes, features, grid);
  for (double& c : h.coeffs_.data()) c = rng.normal(0.0, 0.1);
  h.base_.fill(1.0);
  h.spline_.fill(1.0);
  return h;
}

KanEdge KanHead::edge(std::size_t j, std::size_t k) const {
  auto row = coeffs_.row(j * features() + k);
  return {{row.begin(), row.end()}, base_(j, k), spline_(j, k)};
}

void KanHead::set_edge(std::size_t j, std::size_t k, const KanEdge& edge) {
  if (edge.coeffs.size() != grid_.basis_count())
    throw DimensionError("KanHead::set_edge: wrong coefficient count");
  auto row = coeffs_.row(j * features() + k);
  std::copy(edge.coeffs.begin(), edge.coeffs.end(), row.begin());
  base_(j, k) = edge.base_weight;
  spline_(j, k) = edge.spline_weight;
}

namespace {

struct KanShape {
  std::size_t batch, classes, features, nbasis;
};

KanShape check_kan(const Matrix& v, const SplineGrid& grid, const Matrix& coeffs,
                   const Matrix& base, const Matrix& spline, const char* what) {
  const KanShape s{v.rows(), base.rows(), base.cols(), grid.basis_count()};
  if (v.cols() != s.features)
    throw DimensionError(std::string(what) + ": input " + v.shape_str() + " vs head " +
                         base.shape_str());
  require_same_shape(base, spline, what);
  if (coeffs.rows() != s.classes * s.features || coeffs.cols() != s.nbasis)
    throw DimensionError(std::string(what) + ": coefficients " + coeffs.shape_str() +
                         " do not match head " + base.shape_str());
  return s;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double acc = 0.0;
  for (std::size_t m = 0; m < a.size(); ++m) acc += a[m] * b[m];
  return acc;
}

Matrix kan_forward_raw(const Matrix& v, const SplineGrid& grid, const Matrix& coeffs,
                       const Matrix& base, const Matrix& spline, const MaskMatrix& mask) {
  const auto s = check_kan(v, grid, coeffs, base, spline, "kan_forward");
  require_mask_fits(mask, s.classes, s.features, "kan_forward");
  Matrix z(s.batch, s.classes);
  for (std::size_t i = 0; i < s.batch; ++i) {
    for (std::size_t k = 0; k < s.features; ++k) {
      const double x = v(i, k);
      const auto basis = bspline_basis(x, grid);
      const double sx = silu(x);
      for (std::size_t j = 0; j < s.classes; ++j) {
        if (!mask.kept(k, j)) continue;
        const double phi =
            base(j, k) * sx + spline(j, k) * dot(coeffs.row(j * s.features + k), basis);
        z(i, j) += mask(k, j) * phi;
      }
    }
  }
  require_finite(z, "kan_forward");
  return z;
}

KanGrads kan_backward_raw(const Matrix& upstream, const Matrix& v, const SplineGrid& grid,
                          const Matrix& coeffs, const Matrix& base, const Matrix& spline,
                          const MaskMatrix& mask) {
  const auto s = check_kan(v, grid, coeffs, base, spline, "kan_backward");
  require_mask_fits(mask, s.classes, s.features, "kan_backward");
  if (upstream.rows() != s.batch || upstream.cols() != s.classes)
    throw DimensionError("kan_backward: upstream " + upstream.shape_str() +
                         " vs forward output [" + std::to_string(s.batch) + "x" +
                         std::to_string(s.classes) + "]");
  KanGrads g{Matrix(coeffs.rows(), coeffs.cols()), Matrix(s.classes, s.features),
             Matrix(s.classes, s.features), Matrix(s.batch, s.features)};
  for (std::size_t i = 0; i < s.batch; ++i) {
    for (std::size_t k = 0; k < s.features; ++k) {
      const double x = v(i, k);
      const auto basis = bspline_basis_with_derivative(x, grid);
      const double sx = silu(x);
      const double dsx = silu_derivative(x);
      for (std::size_t j = 0; j < s.classes; ++j) {
        if (!mask.kept(k, j)) continue;
        const double u = upstream(i, j) * mask(k, j);
        const auto c = coeffs.row(j * s.features + k);
        const double spline_sum = dot(c, basis.value);
        g.d_base(j, k) += u * sx;
        g.d_spline(j, k) += u * spline_sum;
        auto dc = g.d_coeffs.row(j * s.features + k);
        const double us = u * spline(j, k);
        for (std::size_t m = 0; m < s.nbasis; ++m) dc[m] += us * basis.value[m];
        g.dV(i, k) += u * (base(j, k) * dsx + spline(j, k) * dot(c, basis.derivative));
      }
    }
  }
  return g;
}

}  // namespace

std::vector<double> kan_edge_terms(const Matrix& v, const SplineGrid& grid,
                                   const Matrix& coeffs, const Matrix& base,
                                   const Matrix& spline) {
  const auto s = check_kan(v, grid, coeffs, base, spline, "kan_edge_terms");
  std::vector<double> a(s.batch * s.classes * s.features);
  for (std::size_t i = 0; i < s.batch; ++i) {
    for (std::size_t k = 0; k < s.features; ++k) {
      const double x = v(i, k);
      const auto basis = bspline_basis(x, grid);
      const double sx = silu(x);
      for (std::size_t j = 0; j < s.classes; ++j)
        a[(i * s.classes + j) * s.features + k] =
            base(j, k) * sx + spline(j, k) * dot(coeffs.row(j * s.features + k), basis);
    }
  }
  return a;
}

Matrix kan_forward(const Matrix& v, const KanHead& head, const MaskMatrix& mask) {
  return kan_forward_raw(v, head.grid(), head.coeffs(), head.base_weights(),
                         head.spline_weights(), mask);
}

KanGrads kan_backward(const Matrix& upstream, const Matrix& v, const KanHead& head,
                      const MaskMatrix& mask) {
  return kan_backward_raw(upstream, v, head.grid(), head.coeffs(), head.base_weights(),
                          head.spline_weights(), mask);
}

GradTape::Slot record_mlp_head(GradTape& tape, GradTape::Slot v, GradTape::Slot W,
                               GradTape::Slot b, const MaskMatrix& mask) {
  require_mask_fits(mask, tape.value(W).rows(), tape.value(W).cols(), "record_mlp_head");
  const GradTape::Slot out = tape.push(
      linear_forward(tape.value(v), apply_mask(tape.value(W), mask), tape.value(b).data()));
  tape.record("mlp_head", [=](GradTape& t) {
    const MlpHead head{t.value(W), t.value(b)};
    auto g = mlp_backward(t.grad(out), t.value(v), head, mask);
    t.accumulate(v, g.dV);
    t.accumulate(W, g.dW);
    t.accumulate(b, g.db);
  });
  return out;
}

GradTape::Slot record_kan_head(GradTape& tape, GradTape::Slot v, GradTape::Slot coeffs,
                               GradTape::Slot base, GradTape::Slot spline,
                               const SplineGrid& grid, const MaskMatrix& mask) {
  const GradTape::Slot out =
      tape.push(kan_forward_raw(tape.value(v), grid, tape.value(coeffs), tape.value(base),
                                tape.value(spline), mask));
  tape.record("kan_head", [=](GradTape& t) {
    auto g = kan_backward_raw(t.grad(out), t.value(v), grid, t.value(coeffs), t.value(base),
                              t.value(spline), mask);
    t.accumulate(v, g.dV);
    t.accumulate(coeffs, g.d_coeffs);
    t.accumulate(base, g.d_base);
    t.accumulate(spline, g.d_spline);
  });
  return out;
}

}  // namespace dcm
