#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include "dcm/core_ad.hpp"
#include "dcm/matrix.hpp"
#include "dcm/noise.hpp"
#include "dcm/random.hpp"

namespace dcm {

struct Sample {
  std::vector<double> x;
  int y_true = 0;
  int y_observed = 0;
};

// Samples stored column-wise: features as an N x d_in matrix plus clean and
// observed labels. `flipped` marks rows where the two labels differ.
struct Dataset {
  Matrix x;
  std::vector<int> y_true;
  std::vector<int> y_observed;
  std::vector<std::uint8_t> flipped;
  std::size_t classes = 0;

  std::size_t size() const { return y_true.size(); }
  std::size_t input_dim() const { return x.cols(); }
  Sample sample(std::size_t i) const;

  Dataset subset(const std::vector<std::size_t>& indices) const;
  // Replaces observed labels; clean labels are kept for instrumentation.
  void apply_noise(const NoiseSpec& spec);
};

struct BlobsParams {
  std::size_t classes = 10;
  std::size_t n_per_class = 200;
  std::size_t input_dim = 8;
  double separation = 4.0;
  double spread = 1.0;
  std::uint64_t seed = 1;
};

// Isotropic Gaussian clusters around separation * u_c, where the unit
// directions u_c are orthonormal for the first min(C, d_in) classes and
// chosen far apart for the rest.
Dataset make_blobs(const BlobsParams& params);

struct Split {
  Dataset train;
  Dataset test;
};
// Stratified by true class: each class contributes round(fraction * n_c) test rows.
Split split_train_test(const Dataset& data, double test_fraction, std::uint64_t seed);

// Shuffled mini-batches; the permutation depends only on (seed, epoch).
class BatchIterator {
 public:
  BatchIterator(std::size_t samples, std::size_t batch_size, std::uint64_t seed);

  std::vector<std::vector<std::size_t>> batches(std::size_t epoch) const;
  // Batches for the current epoch, then advances the epoch counter.
  std::vector<std::vector<std::size_t>> next_epoch();
  std::size_t epoch() const { return epoch_; }

 private:
  std::size_t samples_;
  std::size_t batch_size_;
  std::uint64_t seed_;
  std::size_t epoch_ = 0;
};

// Dataset CSV: feature_0..feature_{d-1},y_true,y_observed,flipped
void write_dataset_csv(std::ostream& os, const Dataset& data);
Dataset read_dataset_csv(std::istream& is, std::size_t classes);

// ---------------------------------------------------------------------------
// Backbone: d_in -> hidden -> d_feat with an activation between the two
// affine layers, then per-feature batch standardization.

inline constexpr double kStandardizeEps = 1e-8;

struct Backbone {
  Matrix W1;  // hidden x d_in
  Matrix b1;  // 1 x hidden
  Matrix W2;  // d_feat x hidden
  Matrix b2;  // 1 x d_feat
  Activation activation = Activation::relu;

  std::size_t input_dim() const { return W1.cols(); }
  std::size_t hidden_dim() const { return W1.rows(); }
  std::size_t feature_dim() const { return W2.rows(); }

  static Backbone init(std::size_t input_dim, std::size_t hidden_dim, std::size_t feature_dim,
                       Activation activation, Rng& rng);
  static Backbone zeros(std::size_t input_dim, std::size_t hidden_dim, std::size_t feature_dim,
                        Activation activation);
};

struct Standardized {
  Matrix out;
  std::vector<double> inv_std;
};
// Per column: (x - mean) / sqrt(var + eps), population variance over rows.
Standardized standardize_forward(const Matrix& x, double eps = kStandardizeEps);
Matrix standardize_backward(const Matrix& upstream, const Standardized& saved);

struct BackboneCache {
  Matrix x;
  Matrix pre1;
  Matrix act1;
  Matrix pre2;
  Standardized features;
};

BackboneCache backbone_forward(const Matrix& x, const Backbone& backbone);

struct BackboneGrads {
  Matrix dW1;
  std::vector<double> db1;
  Matrix dW2;
  std::vector<double> db2;
  Matrix dX;
};
BackboneGrads backbone_backward(const Matrix& upstream, const BackboneCache& cache,
                                const Backbone& backbone);

GradTape::Slot record_standardize(GradTape& tape, GradTape::Slot x);

}  // namespace dcm
