#pragma once

#include <cstddef>
#include <vector>

#include "dcm/core_ad.hpp"
#include "dcm/mask.hpp"
#include "dcm/matrix.hpp"
#include "dcm/random.hpp"
#include "dcm/spline.hpp"

namespace dcm {

// ---------------------------------------------------------------------------
// Fully-connected head: z = v (M^T ⊙ W)^T + b.

struct MlpHead {
  Matrix W;  // C x d
  Matrix b;  // 1 x C

  std::size_t classes() const { return W.rows(); }
  std::size_t features() const { return W.cols(); }

  // W ~ N(0, 2/d), b = 0.
  static MlpHead init(std::size_t classes, std::size_t features, Rng& rng);
};

Matrix mlp_forward(const Matrix& v, const MlpHead& head, const MaskMatrix& mask);

struct MlpGrads {
  Matrix dW;
  std::vector<double> db;
  Matrix dV;
};
// Masked entries of dW are exactly zero and dV only flows through kept edges.
MlpGrads mlp_backward(const Matrix& upstream, const Matrix& v, const MlpHead& head,
                      const MaskMatrix& mask);

// ---------------------------------------------------------------------------
// Kolmogorov-Arnold head. Each edge (j, k) carries
//   phi_jk(x) = base_weight * silu(x) + spline_weight * sum_m c_m B_m(x)
// and logits are z_ij = sum_k m_kj * phi_jk(v_ik). No bias.

struct KanEdge {
  std::vector<double> coeffs;
  double base_weight = 0.0;
  double spline_weight = 0.0;
};

double kan_edge_eval(double x, const KanEdge& edge, const SplineGrid& grid);
// d phi / dx. The spline part contributes nothing outside the grid (clamped).
double kan_edge_derivative(double x, const KanEdge& edge, const SplineGrid& grid);

class KanHead {
 public:
  KanHead(std::size_t classes, std::size_t features, SplineGrid grid);

  // coeffs ~ N(0, 0.1^2), base_weight = spline_weight = 1.
  static KanHead init(std::size_t classes, std::size_t features, const SplineGrid& grid,
                      Rng& rng);

  std::size_t classes() const { return base_.rows(); }
  std::size_t features() const { return base_.cols(); }
  const SplineGrid& grid() const { return grid_; }

  KanEdge edge(std::size_t j, std::size_t k) const;
  void set_edge(std::size_t j, std::size_t k, const KanEdge& edge);

  // Flat parameter storage. Coefficients of edge (j, k) live in row j*d + k.
  Matrix& coeffs() { return coeffs_; }
  const Matrix& coeffs() const { return coeffs_; }
  Matrix& base_weights() { return base_; }
  const Matrix& base_weights() const { return base_; }
  Matrix& spline_weights() { return spline_; }
  const Matrix& spline_weights() const { return spline_; }

 private:
  SplineGrid grid_;
  Matrix coeffs_;  // (C*d) x (G+k)
  Matrix base_;    // C x d
  Matrix spline_;  // C x d
};

// Every edge's forward term phi_jk(v_ik), laid out [i][j][k].
std::vector<double> kan_edge_terms(const Matrix& v, const SplineGrid& grid,
                                   const Matrix& coeffs, const Matrix& base,
                                   const Matrix& spline);

Matrix kan_forward(const Matrix& v, const KanHead& head, const MaskMatrix& mask);

struct KanGrads {
  Matrix d_coeffs;
  Matrix d_base;
  Matrix d_spline;
  Matrix dV;
};
KanGrads kan_backward(const Matrix& upstream, const Matrix& v, const KanHead& head,
                      const MaskMatrix& mask);

// Tape wrappers. Parameter slots must hold the head's current values.
GradTape::Slot record_mlp_head(GradTape& tape, GradTape::Slot v, GradTape::Slot W,
                               GradTape::Slot b, const MaskMatrix& mask);
GradTape::Slot record_kan_head(GradTape& tape, GradTape::Slot v, GradTape::Slot coeffs,
                               GradTape::Slot base, GradTape::Slot spline,
                               const SplineGrid& grid, const MaskMatrix& mask);

}  // namespace dcm
