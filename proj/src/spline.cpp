#include "dcm/spline.hpp"

#include <algorithm>
#include <cmath>

#include "dcm/errors.hpp"

namespace dcm {

SplineGrid::SplineGrid(double lower, double upper, std::size_t intervals, std::size_t order)
    : lower_(lower), upper_(upper), intervals_(intervals), order_(order) {
  if (!std::isfinite(lower) || !std::isfinite(upper) || !(lower < upper))
    throw ValidationError("spline grid needs finite lower < upper");
  if (intervals < 1) throw ValidationError("spline grid needs at least one interval");
  if (order < 1) throw ValidationError("spline order must be >= 1");
}

std::vector<double> SplineGrid::knots() const {
  const std::size_t n = intervals_ + 2 * order_ + 1;
  std::vector<double> t(n);
  const double h = spacing();
  for (std::size_t i = 0; i < n; ++i)
    t[i] = lower_ + (static_cast<double>(i) - static_cast<double>(order_)) * h;
  return t;
}

double SplineGrid::clamp(double x) const { return std::clamp(x, lower_, upper_); }

namespace {

// Basis functions of every degree 0..order at x. Row r holds the degree-r
// functions (intervals + 2*order - r of them).
std::vector<std::vector<double>> cox_de_boor(double x, const SplineGrid& grid) {
  const auto t = grid.knots();
  const std::size_t order = grid.order();
  const std::size_t cells = t.size() - 1;

  // Locate the knot span. x == upper belongs to the last interior cell so the
  // basis still sums to one at the right boundary.
  const double h = grid.spacing();
  auto span = static_cast<std::size_t>(std::floor((x - t[0]) / h));
  span = std::clamp(span, order, order + grid.intervals() - 1);
  if (x < t[span]) --span;
  else if (x >= t[span + 1] && span + 1 < order + grid.intervals()) ++span;

  std::vector<std::vector<double>> levels(order + 1);
  levels[0].assign(cells, 0.0);
  levels[0][span] = 1.0;
  for (std::size_t r = 1; r <= order; ++r) {
    const auto& prev = levels[r - 1];
    auto& cur = levels[r];
    cur.assign(cells - r, 0.0);
    for (std::size_t i = 0; i < cur.size(); ++i) {
      const double left = (x - t[i]) / (t[i + r] - t[i]);
      const double right = (t[i + r + 1] - x) / (t[i + r + 1] - t[i + 1]);
      cur[i] = left * prev[i] + right * prev[i + 1];
    }
  }
  return levels;
}

}  // namespace

std::vector<double> bspline_basis(double x, const SplineGrid& grid) {
  auto levels = cox_de_boor(grid.clamp(x), grid);
  return std::move(levels.back());
}

BasisWithDerivative bspline_basis_with_derivative(double x, const SplineGrid& grid) {
  const double xc = grid.clamp(x);
  auto levels = cox_de_boor(xc, grid);
  BasisWithDerivative out;
  out.value = std::move(levels.back());
  out.derivative.assign(out.value.size(), 0.0);
  if (xc != x) return out;
  // Uniform knots: B'_{i,k} = (B_{i,k-1} - B_{i+1,k-1}) / h.
  const auto& lower_deg = levels[grid.order() - 1];
  const double inv_h = 1.0 / grid.spacing();
  for (std::size_t i = 0; i < out.value.size(); ++i)
    out.derivative[i] = (lower_deg[i] - lower_deg[i + 1]) * inv_h;
  return out;
}

}  // namespace dcm
