#include "dcm/mask.hpp"

#include <string>

#include "dcm/errors.hpp"

namespace dcm {

MaskMatrix MaskMatrix::all_zeros(std::size_t features, std::size_t classes) {
  MaskMatrix m(features, classes);
  m.m_.fill(0.0);
  return m;
}

std::size_t MaskMatrix::zeros_in_node(std::size_t k) const {
  std::size_t n = 0;
  for (double v : m_.row(k)) n += v == 0.0 ? 1 : 0;
  return n;
}

std::size_t MaskMatrix::total_zeros() const {
  std::size_t n = 0;
  for (double v : m_.data()) n += v == 0.0 ? 1 : 0;
  return n;
}

void require_mask_fits(const MaskMatrix& mask, std::size_t classes, std::size_t features,
                       const char* what) {
  if (mask.features() != features || mask.classes() != classes)
    throw DimensionError(std::string(what) + ": mask " + mask.matrix().shape_str() +
                         " does not fit a head with C=" + std::to_string(classes) +
                         " d=" + std::to_string(features) + " (expected [" +
                         std::to_string(features) + "x" + std::to_string(classes) + "])");
}

Matrix apply_mask(const Matrix& W, const MaskMatrix& mask) {
  require_mask_fits(mask, W.rows(), W.cols(), "apply_mask");
  Matrix out(W.rows(), W.cols());
  for (std::size_t j = 0; j < W.rows(); ++j)
    for (std::size_t k = 0; k < W.cols(); ++k) out(j, k) = mask(k, j) * W(j, k);
  return out;
}

}  // namespace dcm
