#include "dcm/noise.hpp"

#include <string>

#include "dcm/errors.hpp"
#include "dcm/random.hpp"

namespace dcm {

NoiseKind parse_noise_kind(std::string_view name) {
  if (name == "none") return NoiseKind::none;
  if (name == "symmetric") return NoiseKind::symmetric;
  if (name == "asymmetric_pairs") return NoiseKind::asymmetric_pairs;
  if (name == "asymmetric_circular") return NoiseKind::asymmetric_circular;
  throw ValidationError("unknown noise kind '" + std::string(name) + "'");
}

std::string_view to_string(NoiseKind kind) {
  switch (kind) {
    case NoiseKind::none: return "none";
    case NoiseKind::symmetric: return "symmetric";
    case NoiseKind::asymmetric_pairs: return "asymmetric_pairs";
    case NoiseKind::asymmetric_circular: return "asymmetric_circular";
  }
  return "?";
}

namespace {

void check_rate(double eta) {
  if (!(eta >= 0.0 && eta <= 1.0))
    throw ValidationError("noise rate must lie in [0, 1], got " + std::to_string(eta));
}

void check_labels(std::span<const int> labels, std::size_t classes) {
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= classes)
      throw ValidationError("label " + std::to_string(labels[i]) + " at index " +
                            std::to_string(i) + " outside [0, " + std::to_string(classes) + ")");
}

// Flip decision for sample i uses counter 2i; any secondary draw uses 2i+1.
bool flips(std::uint64_t seed, std::size_t i, double eta) {
  return counter_uniform(seed, 2 * static_cast<std::uint64_t>(i)) < eta;
}

NoisyLabels finish(std::span<const int> clean, std::vector<int> noisy) {
  NoisyLabels out{std::move(noisy), std::vector<std::uint8_t>(clean.size(), 0)};
  for (std::size_t i = 0; i < clean.size(); ++i) out.flipped[i] = out.labels[i] != clean[i];
  return out;
}

}  // namespace

NoisyLabels corrupt_symmetric(std::span<const int> labels, std::size_t classes, double eta,
                              std::uint64_t seed) {
  if (classes < 2) throw ValidationError("symmetric noise needs at least 2 classes");
  check_rate(eta);
  check_labels(labels, classes);
  std::vector<int> noisy(labels.begin(), labels.end());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (!flips(seed, i, eta)) continue;
    const double u = counter_uniform(seed, 2 * static_cast<std::uint64_t>(i) + 1);
    auto r = static_cast<int>(u * static_cast<double>(classes - 1));
    if (r >= static_cast<int>(classes) - 1) r = static_cast<int>(classes) - 2;
    noisy[i] = r < labels[i] ? r : r + 1;
  }
  return finish(labels, std::move(noisy));
}

NoisyLabels corrupt_asymmetric_pairs(std::span<const int> labels, std::size_t classes,
                                     const std::map<int, int>& pair_map, double eta,
                                     std::uint64_t seed) {
  check_rate(eta);
  check_labels(labels, classes);
  const auto c = static_cast<int>(classes);
  for (const auto& [src, dst] : pair_map)
    if (src < 0 || src >= c || dst < 0 || dst >= c)
      throw ValidationError("pair map entry " + std::to_string(src) + "->" +
                            std::to_string(dst) + " references a class outside [0, " +
                            std::to_string(classes) + ")");
  std::vector<int> noisy(labels.begin(), labels.end());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto it = pair_map.find(labels[i]);
    if (it != pair_map.end() && flips(seed, i, eta)) noisy[i] = it->second;
  }
  return finish(labels, std::move(noisy));
}

NoisyLabels corrupt_asymmetric_circular(std::span<const int> labels, std::size_t classes,
                                        const std::vector<std::vector<int>>& groups,
                                        double eta, std::uint64_t seed) {
  check_rate(eta);
  check_labels(labels, classes);
  std::vector<int> successor(classes, -1);
  for (const auto& group : groups) {
    if (group.empty()) throw ValidationError("circular noise: empty group");
    for (std::size_t g = 0; g < group.size(); ++g) {
      const int cls = group[g];
      if (cls < 0 || static_cast<std::size_t>(cls) >= classes)
        throw ValidationError("circular noise: class " + std::to_string(cls) + " out of range");
      if (successor[static_cast<std::size_t>(cls)] != -1)
        throw ValidationError("circular noise: class " + std::to_string(cls) +
                              " appears in more than one group");
      successor[static_cast<std::size_t>(cls)] = group[(g + 1) % group.size()];
    }
  }
  for (std::size_t cls = 0; cls < classes; ++cls)
    if (successor[cls] == -1)
      throw ValidationError("circular noise: class " + std::to_string(cls) +
                            " is not covered by any group");
  std::vector<int> noisy(labels.begin(), labels.end());
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (flips(seed, i, eta)) noisy[i] = successor[static_cast<std::size_t>(labels[i])];
  return finish(labels, std::move(noisy));
}

NoisyLabels apply_noise(std::span<const int> labels, std::size_t classes, const NoiseSpec& spec) {
  switch (spec.kind) {
    case NoiseKind::none:
      check_labels(labels, classes);
      return finish(labels, {labels.begin(), labels.end()});
    case NoiseKind::symmetric:
      return corrupt_symmetric(labels, classes, spec.rate, spec.seed);
    case NoiseKind::asymmetric_pairs:
      return corrupt_asymmetric_pairs(labels, classes, spec.pair_map, spec.rate, spec.seed);
    case NoiseKind::asymmetric_circular:
      return corrupt_asymmetric_circular(labels, classes, spec.groups, spec.rate, spec.seed);
  }
  throw ValidationError("unknown noise kind");
}

std::map<int, int> cifar10_pair_map() { return {{2, 2}, {3, 5}, {4, 7}, {9, 1}}; }

std::vector<std::vector<int>> contiguous_groups(std::size_t classes, std::size_t size) {
  if (size == 0) throw ValidationError("group size must be positive");
  std::vector<std::vector<int>> groups;
  for (std::size_t start = 0; start < classes; start += size) {
    std::vector<int> g;
    for (std::size_t c = start; c < std::min(classes, start + size); ++c)
      g.push_back(static_cast<int>(c));
    groups.push_back(std::move(g));
  }
  return groups;
}

}  // namespace dcm
