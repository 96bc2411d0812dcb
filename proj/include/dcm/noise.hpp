#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string_view>
#include <vector>

namespace dcm {

enum class NoiseKind { none, symmetric, asymmetric_pairs, asymmetric_circular };

NoiseKind parse_noise_kind(std::string_view name);
std::string_view to_string(NoiseKind kind);

struct NoiseSpec {
  NoiseKind kind = NoiseKind::none;
  double rate = 0.0;
  std::map<int, int> pair_map;           // asymmetric_pairs: source -> target
  std::vector<std::vector<int>> groups;  // asymmetric_circular: ordered cycles
  std::uint64_t seed = 0;
};

struct NoisyLabels {
  std::vector<int> labels;
  std::vector<std::uint8_t> flipped;  // 1 where labels[i] != clean[i]
};

// Each label flips with probability eta to a class drawn uniformly from the
// C - 1 other classes.
NoisyLabels corrupt_symmetric(std::span<const int> labels, std::size_t classes, double eta,
                              std::uint64_t seed);

// Labels whose class is a key of pair_map move to the mapped class with
// probability eta.
NoisyLabels corrupt_asymmetric_pairs(std::span<const int> labels, std::size_t classes,
                                     const std::map<int, int>& pair_map, double eta,
                                     std::uint64_t seed);

// With probability eta a label moves to its successor inside its group,
// wrapping from the last member to the first. Groups must partition [0, C).
NoisyLabels corrupt_asymmetric_circular(std::span<const int> labels, std::size_t classes,
                                        const std::vector<std::vector<int>>& groups,
                                        double eta, std::uint64_t seed);

NoisyLabels apply_noise(std::span<const int> labels, std::size_t classes, const NoiseSpec& spec);

// The CIFAR-10 pair table as printed, including its BIRD -> BIRD self-map:
// bird->bird, cat->dog, deer->horse, truck->automobile.
std::map<int, int> cifar10_pair_map();

// [0..size), [size..2*size), ... ; the last group may be shorter.
std::vector<std::vector<int>> contiguous_groups(std::size_t classes, std::size_t size);

}  // namespace dcm
