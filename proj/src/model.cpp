#include "dcm/model.hpp"

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>

#include "dcm/errors.hpp"

namespace dcm {

HeadKind parse_head_kind(std::string_view name) {
  if (name == "mlp") return HeadKind::mlp;
  if (name == "kan") return HeadKind::kan;
  throw ValidationError("unknown head '" + std::string(name) + "'");
}

std::string_view to_string(HeadKind kind) { return kind == HeadKind::mlp ? "mlp" : "kan"; }

std::size_t Classifier::classes() const {
  return std::visit([](const auto& h) { return h.classes(); }, head);
}

std::vector<NamedParam> Classifier::parameters() {
  std::vector<NamedParam> out{{"backbone.W1", &backbone.W1},
                              {"backbone.b1", &backbone.b1},
                              {"backbone.W2", &backbone.W2},
                              {"backbone.b2", &backbone.b2}};
  if (auto* mlp = std::get_if<MlpHead>(&head)) {
    out.push_back({"head.W", &mlp->W});
    out.push_back({"head.b", &mlp->b});
  } else {
    auto& kan = std::get<KanHead>(head);
    out.push_back({"head.coeffs", &kan.coeffs()});
    out.push_back({"head.base_weight", &kan.base_weights()});
    out.push_back({"head.spline_weight", &kan.spline_weights()});
  }
  return out;
}

std::vector<const Matrix*> Classifier::parameters() const {
  std::vector<const Matrix*> out;
  for (const auto& p : const_cast<Classifier*>(this)->parameters()) out.push_back(p.value);
  return out;
}

std::vector<std::string> Classifier::parameter_names() const {
  std::vector<std::string> out;
  for (const auto& p : const_cast<Classifier*>(this)->parameters()) out.push_back(p.name);
  return out;
}

ForwardPass forward_features(const Classifier& model, const Matrix& x) {
  ForwardPass pass;
  auto& tape = pass.tape;
  for (const Matrix* p : model.parameters()) pass.param_slots.push_back(tape.push(*p));
  const auto& s = pass.param_slots;
  const auto input = tape.push(x);
  const auto h1 = record_linear(tape, input, s[0], s[1]);
  const auto a1 = record_activation(tape, h1, model.backbone.activation);
  const auto h2 = record_linear(tape, a1, s[2], s[3]);
  pass.features = record_standardize(tape, h2);
  pass.head_kind = model.head_kind();
  if (const auto* kan = std::get_if<KanHead>(&model.head)) pass.grid = kan->grid();
  return pass;
}

void forward_head(ForwardPass& pass, const MaskMatrix& mask) {
  if (pass.has_head) throw ValidationError("forward_head called twice on one pass");
  const auto& s = pass.param_slots;
  pass.mask = mask;
  if (pass.head_kind == HeadKind::mlp)
    pass.logits = record_mlp_head(pass.tape, pass.features, s[4], s[5], mask);
  else
    pass.logits = record_kan_head(pass.tape, pass.features, s[4], s[5], s[6], pass.grid, mask);
  pass.has_head = true;
}

std::vector<Matrix> backward(ForwardPass& pass, const Matrix& dlogits) {
  if (!pass.has_head) throw ValidationError("backward before forward_head");
  pass.tape.backward(pass.logits, dlogits);
  std::vector<Matrix> grads;
  grads.reserve(pass.param_slots.size());
  for (auto slot : pass.param_slots) grads.push_back(pass.tape.grad(slot));
  return grads;
}

Matrix predict(const Classifier& model, const Matrix& x, const MaskMatrix* mask) {
  const auto cache = backbone_forward(x, model.backbone);
  const Matrix& v = cache.features.out;
  const MaskMatrix full = MaskMatrix::all_ones(model.features(), model.classes());
  const MaskMatrix& m = mask ? *mask : full;
  if (const auto* mlp = std::get_if<MlpHead>(&model.head)) return mlp_forward(v, *mlp, m);
  return kan_forward(v, std::get<KanHead>(model.head), m);
}

EdgeActivations head_edge_activations(const Classifier& model, const Matrix& v) {
  if (const auto* mlp = std::get_if<MlpHead>(&model.head)) return edge_activations_mlp(v, mlp->W);
  return edge_activations_kan(v, std::get<KanHead>(model.head));
}

// ---------------------------------------------------------------------------
// Checkpoint blob.

namespace {

constexpr char kMagic[8] = {'D', 'C', 'M', 'H', 'E', 'A', 'D', '1'};

void put_u32(std::ostream& os, std::uint32_t v) {
  for (int b = 0; b < 4; ++b) os.put(static_cast<char>((v >> (8 * b)) & 0xff));
}

void put_u64(std::ostream& os, std::uint64_t v) {
  for (int b = 0; b < 8; ++b) os.put(static_cast<char>((v >> (8 * b)) & 0xff));
}

std::uint64_t get_uint(std::istream& is, int bytes) {
  std::uint64_t v = 0;
  for (int b = 0; b < bytes; ++b) {
    const int c = is.get();
    if (c == std::char_traits<char>::eof()) throw FormatError("checkpoint: truncated");
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(c)) << (8 * b);
  }
  return v;
}

void write_section(std::ostream& os, const char (&tag)[5], const std::vector<const Matrix*>& ts) {
  os.write(kMagic, sizeof kMagic);
  os.write(tag, 4);
  put_u32(os, static_cast<std::uint32_t>(ts.size()));
  for (const Matrix* m : ts) {
    put_u64(os, m->rows());
    put_u64(os, m->cols());
  }
  for (const Matrix* m : ts)
    for (double v : m->data()) put_u64(os, std::bit_cast<std::uint64_t>(v));
}

struct Section {
  std::string tag;
  std::vector<Matrix> tensors;
};

Section read_section(std::istream& is) {
  char magic[8];
  if (!is.read(magic, sizeof magic)) throw FormatError("checkpoint: missing section");
  if (!std::equal(magic, magic + 8, kMagic)) throw FormatError("checkpoint: bad magic");
  char tag[4];
  if (!is.read(tag, 4)) throw FormatError("checkpoint: truncated tag");
  Section s{std::string(tag, 4), {}};
  const auto count = get_uint(is, 4);
  if (count > 64) throw FormatError("checkpoint: implausible tensor count");
  std::vector<std::pair<std::uint64_t, std::uint64_t>> shapes;
  for (std::uint64_t t = 0; t < count; ++t) {
    const auto r = get_uint(is, 8);
    const auto c = get_uint(is, 8);
    if (r > (1u << 24) || c > (1u << 24)) throw FormatError("checkpoint: implausible shape");
    shapes.emplace_back(r, c);
  }
  for (const auto& [r, c] : shapes) {
    Matrix m(r, c);
    for (double& v : m.data()) v = std::bit_cast<double>(get_uint(is, 8));
    s.tensors.push_back(std::move(m));
  }
  return s;
}

std::variant<MlpHead, KanHead> head_from_section(Section s) {
  if (s.tag == "MLPH") {
    if (s.tensors.size() != 2) throw FormatError("checkpoint: MLPH needs 2 tensors");
    MlpHead h{std::move(s.tensors[0]), std::move(s.tensors[1])};
    if (h.b.rows() != 1 || h.b.cols() != h.W.rows())
      throw FormatError("checkpoint: MLP bias shape " + h.b.shape_str());
    return h;
  }
  if (s.tag == "KANH") {
    if (s.tensors.size() != 4 || s.tensors[0].size() != 4)
      throw FormatError("checkpoint: malformed KANH section");
    const auto g = s.tensors[0].data();
    SplineGrid grid(g[0], g[1], static_cast<std::size_t>(g[2]), static_cast<std::size_t>(g[3]));
    const Matrix& base = s.tensors[2];
    KanHead h(base.rows(), base.cols(), grid);
    if (!s.tensors[1].same_shape(h.coeffs()) || !s.tensors[3].same_shape(base))
      throw FormatError("checkpoint: KAN tensor shapes disagree");
    h.coeffs() = std::move(s.tensors[1]);
    h.base_weights() = std::move(s.tensors[2]);
    h.spline_weights() = std::move(s.tensors[3]);
    return h;
  }
  throw FormatError("checkpoint: expected a head section, found '" + s.tag + "'");
}

}  // namespace

void write_head(std::ostream& os, const MlpHead& head) {
  write_section(os, "MLPH", {&head.W, &head.b});
}

void write_head(std::ostream& os, const KanHead& head) {
  const auto& g = head.grid();
  const Matrix grid{{g.lower(), g.upper(), static_cast<double>(g.intervals()),
                     static_cast<double>(g.order())}};
  write_section(os, "KANH",
                {&grid, &head.coeffs(), &head.base_weights(), &head.spline_weights()});
}

std::variant<MlpHead, KanHead> read_head(std::istream& is) {
  return head_from_section(read_section(is));
}

void write_checkpoint(std::ostream& os, const Classifier& model) {
  const auto& b = model.backbone;
  const Matrix act{{b.activation == Activation::relu ? 0.0 : 1.0}};
  write_section(os, "BKBN", {&b.W1, &b.b1, &b.W2, &b.b2, &act});
  std::visit([&](const auto& h) { write_head(os, h); }, model.head);
}

Classifier read_checkpoint(std::istream& is) {
  auto s = read_section(is);
  if (s.tag != "BKBN" || s.tensors.size() != 5)
    throw FormatError("checkpoint: expected backbone section first");
  Backbone b{std::move(s.tensors[0]), std::move(s.tensors[1]), std::move(s.tensors[2]),
             std::move(s.tensors[3]),
             s.tensors[4].data()[0] == 0.0 ? Activation::relu : Activation::silu};
  if (b.W2.cols() != b.W1.rows() || b.b1.cols() != b.W1.rows() || b.b2.cols() != b.W2.rows())
    throw FormatError("checkpoint: backbone shapes disagree");
  Classifier model{std::move(b), head_from_section(read_section(is))};
  if (std::visit([](const auto& h) { return h.features(); }, model.head) != model.features())
    throw FormatError("checkpoint: head input width does not match backbone");
  return model;
}

}  // namespace dcm
