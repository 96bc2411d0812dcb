#pragma once

#include <cstddef>
#include <vector>

namespace dcm {

// Uniform B-spline grid on [lower, upper] with `intervals` cells and
// polynomial degree `order`. The knot vector extends `order` cells past each
// end, giving intervals + 2*order + 1 knots and intervals + order basis
// functions.
class SplineGrid {
 public:
  SplineGrid(double lower, double upper, std::size_t intervals, std::size_t order);
  SplineGrid() : SplineGrid(-2.0, 2.0, 8, 3) {}

  double lower() const { return lower_; }
  double upper() const { return upper_; }
  std::size_t intervals() const { return intervals_; }
  std::size_t order() const { return order_; }
  double spacing() const { return (upper_ - lower_) / static_cast<double>(intervals_); }

  std::size_t basis_count() const { return intervals_ + order_; }
  std::vector<double> knots() const;

  double clamp(double x) const;

  friend bool operator==(const SplineGrid&, const SplineGrid&) = default;

 private:
  double lower_;
  double upper_;
  std::size_t intervals_;
  std::size_t order_;
};

// Cox-de Boor evaluation of all basis functions at x (clamped to the grid).
std::vector<double> bspline_basis(double x, const SplineGrid& grid);

struct BasisWithDerivative {
  std::vector<double> value;
  std::vector<double> derivative;  // d/dx; zero when x was clamped
};
BasisWithDerivative bspline_basis_with_derivative(double x, const SplineGrid& grid);

}  // namespace dcm
