#include <cmath>
#include <vector>

#include "doctest.h"
#include "dcm/errors.hpp"
#include "dcm/noise.hpp"

using namespace dcm;

namespace {

std::vector<int> cyclic_labels(std::size_t n, int classes) {
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = static_cast<int>(i % classes);
  return y;
}

void check_indicator(const std::vector<int>& clean, const NoisyLabels& out) {
  REQUIRE(out.labels.size() == clean.size());
  for (std::size_t i = 0; i < clean.size(); ++i)
    CHECK(out.flipped[i] == (out.labels[i] != clean[i] ? 1 : 0));
}

}  // namespace

TEST_CASE("symmetric noise: two classes leave one alternative") {
  const std::vector<int> zeros(500, 0);
  const auto out = corrupt_symmetric(zeros, 2, 0.5, 4);
  for (std::size_t i = 0; i < zeros.size(); ++i)
    if (out.flipped[i]) CHECK(out.labels[i] == 1);
  check_indicator(zeros, out);
}

TEST_CASE("symmetric noise statistics") {
  const auto clean = cyclic_labels(10000, 10);
  const auto out = corrupt_symmetric(clean, 10, 0.4, 123);
  std::size_t flips = 0;
  std::vector<std::size_t> targets(10, 0);
  for (std::size_t i = 0; i < clean.size(); ++i) {
    if (out.flipped[i]) {
      ++flips;
      CHECK(out.labels[i] != clean[i]);
      ++targets[out.labels[i]];
    }
  }
  CHECK(std::abs(flips / 10000.0 - 0.4) <= 0.02);
  for (std::size_t t : targets) CHECK(std::abs(t / static_cast<double>(flips) - 0.1) < 0.02);
  check_indicator(clean, out);
  CHECK(corrupt_symmetric(clean, 10, 0.4, 123).labels == out.labels);
  CHECK(corrupt_symmetric(clean, 10, 0.4, 124).labels != out.labels);
}

TEST_CASE("symmetric noise validation") {
  const std::vector<int> y{0, 1};
  CHECK_THROWS_AS(corrupt_symmetric(y, 1, 0.2, 1), ValidationError);
  CHECK_THROWS_AS(corrupt_symmetric(std::vector<int>{0, 3}, 3, 0.2, 1), ValidationError);
  CHECK_THROWS_AS(corrupt_symmetric(y, 2, 1.5, 1), ValidationError);
}

TEST_CASE("pair noise") {
  const auto clean = cyclic_labels(1000, 10);
  CHECK(corrupt_asymmetric_pairs(clean, 10, {}, 0.5, 1).labels == clean);

  const auto all = corrupt_asymmetric_pairs(clean, 10, {{3, 5}}, 1.0, 1);
  for (std::size_t i = 0; i < clean.size(); ++i)
    CHECK(all.labels[i] == (clean[i] == 3 ? 5 : clean[i]));

  const std::vector<int> threes(10000, 3);
  const auto some = corrupt_asymmetric_pairs(threes, 10, {{3, 5}}, 0.4, 2);
  std::size_t flips = 0;
  for (int l : some.labels) {
    CHECK((l == 3 || l == 5));
    flips += l == 5;
  }
  CHECK(std::abs(static_cast<double>(flips) - 4000.0) <= 200.0);
  check_indicator(threes, some);

  CHECK_THROWS_AS(corrupt_asymmetric_pairs(clean, 10, {{3, 12}}, 0.4, 1), ValidationError);
}

TEST_CASE("the cifar-10 pair table is kept as printed") {
  const auto map = cifar10_pair_map();
  CHECK(map == std::map<int, int>{{2, 2}, {3, 5}, {4, 7}, {9, 1}});
  const auto clean = cyclic_labels(5000, 10);
  const auto out = corrupt_asymmetric_pairs(clean, 10, map, 1.0, 3);
  for (std::size_t i = 0; i < clean.size(); ++i) {
    const auto it = map.find(clean[i]);
    CHECK(out.labels[i] == (it == map.end() ? clean[i] : it->second));
  }
  check_indicator(clean, out);
}

TEST_CASE("circular group noise") {
  const std::vector<std::vector<int>> groups{{2, 5, 9}, {0, 1, 3, 4, 6, 8}, {7}};
  const auto clean = cyclic_labels(100, 10);
  const auto out = corrupt_asymmetric_circular(clean, 10, groups, 1.0, 1);
  for (std::size_t i = 0; i < clean.size(); ++i) {
    if (clean[i] == 2) CHECK(out.labels[i] == 5);
    if (clean[i] == 5) CHECK(out.labels[i] == 9);
    if (clean[i] == 9) CHECK(out.labels[i] == 2);
    if (clean[i] == 8) CHECK(out.labels[i] == 0);
    if (clean[i] == 7) CHECK(out.labels[i] == 7);
  }
  check_indicator(clean, out);

  const auto c20 = cyclic_labels(20000, 20);
  const auto g20 = contiguous_groups(20, 5);
  const auto r = corrupt_asymmetric_circular(c20, 20, g20, 0.4, 9);
  std::vector<double> rate(20, 0.0);
  for (std::size_t i = 0; i < c20.size(); ++i) {
    const int succ = (c20[i] % 5 == 4) ? c20[i] - 4 : c20[i] + 1;
    CHECK((r.labels[i] == c20[i] || r.labels[i] == succ));
    rate[c20[i]] += r.flipped[i];
  }
  for (double f : rate) CHECK(std::abs(f / 1000.0 - 0.4) <= 0.03);

  CHECK_THROWS_AS(corrupt_asymmetric_circular(clean, 10, {{0, 1}, {1, 2}}, 0.4, 1), ValidationError);
  CHECK_THROWS_AS(corrupt_asymmetric_circular(clean, 10, {{0, 1, 2}}, 0.4, 1), ValidationError);
}

TEST_CASE("contiguous groups and apply_noise dispatch") {
  CHECK(contiguous_groups(7, 3) == std::vector<std::vector<int>>{{0, 1, 2}, {3, 4, 5}, {6}});
  const auto clean = cyclic_labels(200, 4);
  NoiseSpec none;
  CHECK(apply_noise(clean, 4, none).labels == clean);
  NoiseSpec sym{NoiseKind::symmetric, 0.3, {}, {}, 17};
  CHECK(apply_noise(clean, 4, sym).labels == corrupt_symmetric(clean, 4, 0.3, 17).labels);
  CHECK(parse_noise_kind("asymmetric_circular") == NoiseKind::asymmetric_circular);
  CHECK_THROWS_AS(parse_noise_kind("instance"), ValidationError);
}
