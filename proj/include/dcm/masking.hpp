#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "dcm/heads.hpp"
#include "dcm/mask.hpp"
#include "dcm/matrix.hpp"

namespace dcm {

// Per-edge activations a_ijk stored densely as [batch][class][feature].
class EdgeActivations {
 public:
  EdgeActivations(std::size_t batch, std::size_t classes, std::size_t features)
      : batch_(batch), classes_(classes), features_(features),
        a_(batch * classes * features, 0.0) {}
  EdgeActivations(std::size_t batch, std::size_t classes, std::size_t features,
                  std::vector<double> values);

  std::size_t batch() const { return batch_; }
  std::size_t classes() const { return classes_; }
  std::size_t features() const { return features_; }

  double& operator()(std::size_t i, std::size_t j, std::size_t k) {
    return a_[(i * classes_ + j) * features_ + k];
  }
  double operator()(std::size_t i, std::size_t j, std::size_t k) const {
    return a_[(i * classes_ + j) * features_ + k];
  }

 private:
  std::size_t batch_, classes_, features_;
  std::vector<double> a_;
};

// C x d matrix of non-negative edge scores.
using ImportanceScores = Matrix;

enum class MaskStrategy { node_wise, edge_wise, random, by_weight, node_wise_inverted };
enum class MaskInterval { per_iteration, per_epoch };
enum class MaskStage { train_only, train_and_test };

MaskStrategy parse_mask_strategy(std::string_view name);
std::string_view to_string(MaskStrategy s);
MaskInterval parse_mask_interval(std::string_view name);
std::string_view to_string(MaskInterval i);
MaskStage parse_mask_stage(std::string_view name);
std::string_view to_string(MaskStage s);

struct MaskingPolicy {
  bool enabled = false;
  MaskStrategy strategy = MaskStrategy::node_wise;
  double ratio = 0.6;
  MaskInterval interval = MaskInterval::per_iteration;
  MaskStage stage = MaskStage::train_only;

  // Throws ValidationError if enabled and ratio is outside (0, 1).
  void validate() const;
};

// a_ijk = v_ik * w_jk
EdgeActivations edge_activations_mlp(const Matrix& v, const Matrix& W);
// a_ijk = phi_jk(v_ik)
EdgeActivations edge_activations_kan(const Matrix& v, const KanHead& head);

// Population standard deviation of each edge's activation over the batch.
ImportanceScores importance_scores(const EdgeActivations& a);

// floor(p * n) computed so that exact products (0.6 * 10) do not round down.
std::size_t masked_count(double p, std::size_t n);

// Per input node, masks the q = floor(p*C) lowest-scoring classes. Ties mask
// the smaller class index first. q == 0 yields the all-ones mask.
MaskMatrix build_mask_node_wise(const ImportanceScores& scores, double p);
// Masks the floor(p*C*d) globally lowest scores; ties in row-major (j, k) order.
MaskMatrix build_mask_edge_wise(const ImportanceScores& scores, double p);
// Per input node, q class indices drawn without replacement from `seed`.
MaskMatrix build_mask_random(std::size_t classes, std::size_t features, double p,
                             std::uint64_t seed);
// Node-wise selection on |w_jk|.
MaskMatrix build_mask_by_weight(const Matrix& W, double p);
// Per input node, masks the q highest-scoring classes; ties mask the larger
// class index first.
MaskMatrix invert_selection(const ImportanceScores& scores, double p);

// Debug text format:
//   d=<d> C=<C> p=<p> strategy=<name>
//   k: j1 j2 ...
void write_mask_text(std::ostream& os, const MaskMatrix& mask, double p, std::string_view strategy);
std::string mask_to_text(const MaskMatrix& mask, double p, std::string_view strategy);

struct MaskDump {
  double ratio = 0.0;
  std::string strategy;
  MaskMatrix mask;
};
MaskDump read_mask_text(std::istream& is);

}  // namespace dcm
