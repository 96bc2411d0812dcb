#include "dcm/masking.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <mutex>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <tuple>

#include "dcm/errors.hpp"
#include "dcm/random.hpp"

namespace dcm {

EdgeActivations::EdgeActivations(std::size_t batch, std::size_t classes, std::size_t features,
                                 std::vector<double> values)
    : batch_(batch), classes_(classes), features_(features), a_(std::move(values)) {
  if (a_.size() != batch * classes * features)
    throw DimensionError("EdgeActivations: " + std::to_string(a_.size()) + " values for [" +
                         std::to_string(batch) + "x" + std::to_string(classes) + "x" +
                         std::to_string(features) + "]");
}

MaskStrategy parse_mask_strategy(std::string_view name) {
  if (name == "node_wise") return MaskStrategy::node_wise;
  if (name == "edge_wise") return MaskStrategy::edge_wise;
  if (name == "random") return MaskStrategy::random;
  if (name == "by_weight") return MaskStrategy::by_weight;
  if (name == "node_wise_inverted") return MaskStrategy::node_wise_inverted;
  throw ValidationError("unknown mask strategy '" + std::string(name) + "'");
}

std::string_view to_string(MaskStrategy s) {
  switch (s) {
    case MaskStrategy::node_wise: return "node_wise";
    case MaskStrategy::edge_wise: return "edge_wise";
    case MaskStrategy::random: return "random";
    case MaskStrategy::by_weight: return "by_weight";
    case MaskStrategy::node_wise_inverted: return "node_wise_inverted";
  }
  return "?";
}

MaskInterval parse_mask_interval(std::string_view name) {
  if (name == "per_iteration") return MaskInterval::per_iteration;
  if (name == "per_epoch") return MaskInterval::per_epoch;
  throw ValidationError("unknown mask interval '" + std::string(name) + "'");
}

std::string_view to_string(MaskInterval i) {
  return i == MaskInterval::per_iteration ? "per_iteration" : "per_epoch";
}

MaskStage parse_mask_stage(std::string_view name) {
  if (name == "train_only") return MaskStage::train_only;
  if (name == "train_and_test") return MaskStage::train_and_test;
  throw ValidationError("unknown mask stage '" + std::string(name) + "'");
}

std::string_view to_string(MaskStage s) {
  return s == MaskStage::train_only ? "train_only" : "train_and_test";
}

void MaskingPolicy::validate() const {
  if (enabled && !(ratio > 0.0 && ratio < 1.0))
    throw ValidationError("mask ratio must lie strictly inside (0, 1), got " +
                          std::to_string(ratio));
}

EdgeActivations edge_activations_mlp(const Matrix& v, const Matrix& W) {
  if (v.cols() != W.cols())
    throw DimensionError("edge_activations_mlp: features " + v.shape_str() + " vs weight " +
                         W.shape_str());
  EdgeActivations a(v.rows(), W.rows(), W.cols());
  for (std::size_t i = 0; i < v.rows(); ++i)
    for (std::size_t j = 0; j < W.rows(); ++j)
      for (std::size_t k = 0; k < W.cols(); ++k) a(i, j, k) = v(i, k) * W(j, k);
  return a;
}

EdgeActivations edge_activations_kan(const Matrix& v, const KanHead& head) {
  return {v.rows(), head.classes(), head.features(),
          kan_edge_terms(v, head.grid(), head.coeffs(), head.base_weights(),
                         head.spline_weights())};
}

ImportanceScores importance_scores(const EdgeActivations& a) {
  if (a.batch() == 0) throw ValidationError("importance_scores: empty batch");
  const double inv_b = 1.0 / static_cast<double>(a.batch());
  ImportanceScores s(a.classes(), a.features());
  for (std::size_t j = 0; j < a.classes(); ++j) {
    for (std::size_t k = 0; k < a.features(); ++k) {
      double mean = 0.0;
      for (std::size_t i = 0; i < a.batch(); ++i) mean += a(i, j, k);
      mean *= inv_b;
      double var = 0.0;
      for (std::size_t i = 0; i < a.batch(); ++i) {
        const double d = a(i, j, k) - mean;
        var += d * d;
      }
      s(j, k) = std::sqrt(var * inv_b);
    }
  }
  return s;
}

std::size_t masked_count(double p, std::size_t n) {
  return static_cast<std::size_t>(std::floor(p * static_cast<double>(n) + 1e-9));
}

namespace {

void require_ratio(double p, const char* what) {
  if (!(p > 0.0 && p < 1.0))
    throw ValidationError(std::string(what) + ": ratio must lie in (0, 1), got " +
                          std::to_string(p));
}

// Reported once per (caller, p, n) so per-iteration masking does not flood stderr.
void warn_empty_quota(const char* what, double p, std::size_t n) {
  static std::mutex mu;
  static std::set<std::tuple<std::string, double, std::size_t>> seen;
  std::lock_guard lock(mu);
  if (!seen.emplace(what, p, n).second) return;
  std::fprintf(stderr, "warning: %s: floor(%g * %zu) = 0, no edges masked\n", what, p, n);
}

// Bottom-q (or top-q when `largest`) per node column of a C x d score matrix.
MaskMatrix select_per_node(const Matrix& scores, double p, bool largest, const char* what) {
  require_ratio(p, what);
  const std::size_t C = scores.rows(), d = scores.cols();
  MaskMatrix mask(d, C);
  const std::size_t q = masked_count(p, C);
  if (q == 0) {
    warn_empty_quota(what, p, C);
    return mask;
  }
  std::vector<std::size_t> order(C);
  for (std::size_t k = 0; k < d; ++k) {
    std::iota(order.begin(), order.end(), 0);
    if (largest) {
      // Mirror of the ascending rule: larger score first, larger j first on ties.
      std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        if (scores(a, k) != scores(b, k)) return scores(a, k) > scores(b, k);
        return a > b;
      });
    } else {
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t b) { return scores(a, k) < scores(b, k); });
    }
    for (std::size_t r = 0; r < q; ++r) mask.mask(k, order[r]);
  }
  return mask;
}

}  // namespace

MaskMatrix build_mask_node_wise(const ImportanceScores& scores, double p) {
  return select_per_node(scores, p, false, "build_mask_node_wise");
}

MaskMatrix build_mask_edge_wise(const ImportanceScores& scores, double p) {
  require_ratio(p, "build_mask_edge_wise");
  const std::size_t C = scores.rows(), d = scores.cols();
  MaskMatrix mask(d, C);
  const std::size_t q = masked_count(p, C * d);
  if (q == 0) {
    warn_empty_quota("build_mask_edge_wise", p, C * d);
    return mask;
  }
  std::vector<std::size_t> order(C * d);
  std::iota(order.begin(), order.end(), 0);
  auto flat = scores.data();
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return flat[a] < flat[b]; });
  for (std::size_t r = 0; r < q; ++r) mask.mask(order[r] % d, order[r] / d);
  return mask;
}

MaskMatrix build_mask_random(std::size_t classes, std::size_t features, double p,
                             std::uint64_t seed) {
  require_ratio(p, "build_mask_random");
  MaskMatrix mask(features, classes);
  const std::size_t q = masked_count(p, classes);
  if (q == 0) {
    warn_empty_quota("build_mask_random", p, classes);
    return mask;
  }
  Rng rng(seed);
  std::vector<std::size_t> pool(classes);
  for (std::size_t k = 0; k < features; ++k) {
    std::iota(pool.begin(), pool.end(), 0);
    // Partial Fisher-Yates: the first q slots become a uniform q-subset.
    for (std::size_t r = 0; r < q; ++r) {
      const auto pick = r + static_cast<std::size_t>(rng.below(classes - r));
      std::swap(pool[r], pool[pick]);
      mask.mask(k, pool[r]);
    }
  }
  return mask;
}

MaskMatrix build_mask_by_weight(const Matrix& W, double p) {
  Matrix magnitude = W;
  for (double& w : magnitude.data()) w = std::abs(w);
  return select_per_node(magnitude, p, false, "build_mask_by_weight");
}

MaskMatrix invert_selection(const ImportanceScores& scores, double p) {
  return select_per_node(scores, p, true, "invert_selection");
}

void write_mask_text(std::ostream& os, const MaskMatrix& mask, double p,
                     std::string_view strategy) {
  char ratio[32];
  std::snprintf(ratio, sizeof ratio, "%g", p);
  os << "d=" << mask.features() << " C=" << mask.classes() << " p=" << ratio
     << " strategy=" << strategy << '\n';
  for (std::size_t k = 0; k < mask.features(); ++k) {
    os << k << ':';
    for (std::size_t j = 0; j < mask.classes(); ++j)
      if (!mask.kept(k, j)) os << ' ' << j;
    os << '\n';
  }
}

std::string mask_to_text(const MaskMatrix& mask, double p, std::string_view strategy) {
  std::ostringstream os;
  write_mask_text(os, mask, p, strategy);
  return os.str();
}

MaskDump read_mask_text(std::istream& is) {
  std::string header;
  if (!std::getline(is, header)) throw FormatError("mask text: missing header");
  std::size_t d = 0, C = 0;
  double p = 0.0;
  char strategy[128] = {};
  if (std::sscanf(header.c_str(), "d=%zu C=%zu p=%lf strategy=%127s", &d, &C, &p, strategy) != 4)
    throw FormatError("mask text: malformed header '" + header + "'");
  MaskDump dump{p, strategy, MaskMatrix(d, C)};
  std::string line;
  for (std::size_t k = 0; k < d; ++k) {
    if (!std::getline(is, line))
      throw FormatError("mask text: expected " + std::to_string(d) + " node lines");
    std::istringstream ls(line);
    std::size_t node = 0;
    char colon = 0;
    if (!(ls >> node >> colon) || colon != ':' || node != k)
      throw FormatError("mask text: line " + std::to_string(k + 2) + " malformed");
    std::size_t j = 0;
    while (ls >> j) {
      if (j >= C) throw FormatError("mask text: class index out of range on line " +
                                    std::to_string(k + 2));
      dump.mask.mask(k, j);
    }
  }
  return dump;
}

}  // namespace dcm
