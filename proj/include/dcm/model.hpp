#pragma once

#include <cstddef>
#include <iosfwd>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "dcm/core_ad.hpp"
#include "dcm/data.hpp"
#include "dcm/heads.hpp"
#include "dcm/mask.hpp"
#include "dcm/masking.hpp"

namespace dcm {

enum class HeadKind { mlp, kan };
HeadKind parse_head_kind(std::string_view name);
std::string_view to_string(HeadKind kind);

struct NamedParam {
  std::string name;
  Matrix* value;
};

// Backbone followed by one classifier head.
struct Classifier {
  Backbone backbone;
  std::variant<MlpHead, KanHead> head;

  HeadKind head_kind() const {
    return std::holds_alternative<MlpHead>(head) ? HeadKind::mlp : HeadKind::kan;
  }
  std::size_t classes() const;
  std::size_t features() const { return backbone.feature_dim(); }

  // Fixed order: W1, b1, W2, b2, then the head's parameters.
  std::vector<NamedParam> parameters();
  std::vector<const Matrix*> parameters() const;
  std::vector<std::string> parameter_names() const;
};

// One recorded forward pass. Features are computed first so the mask can be
// scored from them before the head runs.
struct ForwardPass {
  GradTape tape;
  std::vector<GradTape::Slot> param_slots;
  GradTape::Slot features = 0;
  GradTape::Slot logits = 0;
  MaskMatrix mask;
  HeadKind head_kind = HeadKind::mlp;
  SplineGrid grid;  // KAN heads only
  bool has_head = false;

  const Matrix& feature_values() const { return tape.value(features); }
  const Matrix& logit_values() const { return tape.value(logits); }
};

ForwardPass forward_features(const Classifier& model, const Matrix& x);
void forward_head(ForwardPass& pass, const MaskMatrix& mask);

// Parameter gradients for an upstream gradient on the logits, in
// Classifier::parameters() order. May be called repeatedly on one pass.
std::vector<Matrix> backward(ForwardPass& pass, const Matrix& dlogits);

// Tape-free evaluation. With no mask the head uses all of its edges.
Matrix predict(const Classifier& model, const Matrix& x, const MaskMatrix* mask = nullptr);

// Edge activations of the head on features v (weight products for MLP,
// edge-function outputs for KAN).
EdgeActivations head_edge_activations(const Classifier& model, const Matrix& v);

// Checkpoint blob. Each section is
//   "DCMHEAD1" | 4-byte tag | u32 tensor count | per tensor: u64 rows, u64 cols
//   | row-major f64 payloads
// with all integers and floats little-endian. Tags: BKBN (backbone),
// MLPH (MLP head), KANH (KAN head; first tensor is [lower, upper, G, k]).
void write_head(std::ostream& os, const MlpHead& head);
void write_head(std::ostream& os, const KanHead& head);
std::variant<MlpHead, KanHead> read_head(std::istream& is);

void write_checkpoint(std::ostream& os, const Classifier& model);
Classifier read_checkpoint(std::istream& is);

}  // namespace dcm
