#pragma once

#include <cstddef>

#include "dcm/matrix.hpp"

namespace dcm {

// Binary d x C connection mask. m(k, j) == 1 keeps the edge from input node k
// to class node j; 0 masks it for the current interval.
class MaskMatrix {
 public:
  MaskMatrix() = default;
  MaskMatrix(std::size_t features, std::size_t classes) : m_(features, classes, 1.0) {}

  static MaskMatrix all_ones(std::size_t features, std::size_t classes) {
    return {features, classes};
  }
  static MaskMatrix all_zeros(std::size_t features, std::size_t classes);

  std::size_t features() const { return m_.rows(); }
  std::size_t classes() const { return m_.cols(); }

  bool kept(std::size_t k, std::size_t j) const { return m_(k, j) != 0.0; }
  double operator()(std::size_t k, std::size_t j) const { return m_(k, j); }
  void mask(std::size_t k, std::size_t j) { m_(k, j) = 0.0; }
  void keep(std::size_t k, std::size_t j) { m_(k, j) = 1.0; }

  std::size_t zeros_in_node(std::size_t k) const;
  std::size_t total_zeros() const;
  bool all_kept() const { return total_zeros() == 0; }

  const Matrix& matrix() const { return m_; }

  friend bool operator==(const MaskMatrix&, const MaskMatrix&) = default;

 private:
  Matrix m_;
};

// Throws DimensionError unless mask is (W.cols() x W.rows()).
void require_mask_fits(const MaskMatrix& mask, std::size_t classes, std::size_t features,
                       const char* what);

// W_bar[j][k] = m_kj * W[j][k]. W itself is left untouched.
Matrix apply_mask(const Matrix& W, const MaskMatrix& mask);

}  // namespace dcm
