#include "dcm/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <memory>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>

#include "dcm/errors.hpp"

namespace dcm {

Sample Dataset::sample(std::size_t i) const {
  auto row = x.row(i);
  return {{row.begin(), row.end()}, y_true.at(i), y_observed.at(i)};
}

Dataset Dataset::subset(const std::vector<std::size_t>& indices) const {
  Dataset out;
  out.classes = classes;
  out.x = Matrix(indices.size(), x.cols());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    const std::size_t i = indices[r];
    auto src = x.row(i);
    std::copy(src.begin(), src.end(), out.x.row(r).begin());
    out.y_true.push_back(y_true.at(i));
    out.y_observed.push_back(y_observed.at(i));
    out.flipped.push_back(flipped.at(i));
  }
  return out;
}

void Dataset::apply_noise(const NoiseSpec& spec) {
  auto noisy = dcm::apply_noise(y_true, classes, spec);
  y_observed = std::move(noisy.labels);
  flipped = std::move(noisy.flipped);
}

namespace {

std::vector<std::vector<double>> class_directions(std::size_t classes, std::size_t dim,
                                                  Rng& rng) {
  std::vector<std::vector<double>> dirs;
  auto random_unit = [&] {
    std::vector<double> v(dim);
    double norm = 0.0;
    while (norm < 1e-12) {
      norm = 0.0;
      for (double& e : v) {
        e = rng.normal();
        norm += e * e;
      }
    }
    norm = std::sqrt(norm);
    for (double& e : v) e /= norm;
    return v;
  };
  // Gram-Schmidt while there is room for orthogonal directions.
  while (dirs.size() < std::min(classes, dim)) {
    auto v = random_unit();
    for (const auto& u : dirs) {
      const double proj = std::inner_product(v.begin(), v.end(), u.begin(), 0.0);
      for (std::size_t e = 0; e < dim; ++e) v[e] -= proj * u[e];
    }
    const double norm = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
    if (norm < 1e-6) continue;
    for (double& e : v) e /= norm;
    dirs.push_back(std::move(v));
  }
  // Farthest of 64 random candidates for the remaining classes.
  while (dirs.size() < classes) {
    std::vector<double> best;
    double best_gap = -1.0;
    for (int trial = 0; trial < 64; ++trial) {
      auto v = random_unit();
      double gap = 1e300;
      for (const auto& u : dirs) {
        double d2 = 0.0;
        for (std::size_t e = 0; e < dim; ++e) d2 += (v[e] - u[e]) * (v[e] - u[e]);
        gap = std::min(gap, d2);
      }
      if (gap > best_gap) {
        best_gap = gap;
        best = std::move(v);
      }
    }
    dirs.push_back(std::move(best));
  }
  return dirs;
}

}  // namespace

Dataset make_blobs(const BlobsParams& params) {
  if (params.classes < 2) throw ValidationError("make_blobs: need at least 2 classes");
  if (params.n_per_class < 1) throw ValidationError("make_blobs: n_per_class must be >= 1");
  if (params.input_dim < 1) throw ValidationError("make_blobs: input_dim must be >= 1");
  if (!(params.separation > 0.0)) throw ValidationError("make_blobs: separation must be > 0");
  if (!(params.spread > 0.0)) throw ValidationError("make_blobs: spread must be > 0");

  Rng rng(params.seed);
  const auto dirs = class_directions(params.classes, params.input_dim, rng);
  Dataset data;
  data.classes = params.classes;
  const std::size_t n = params.classes * params.n_per_class;
  data.x = Matrix(n, params.input_dim);
  std::size_t r = 0;
  for (std::size_t c = 0; c < params.classes; ++c) {
    for (std::size_t s = 0; s < params.n_per_class; ++s, ++r) {
      for (std::size_t e = 0; e < params.input_dim; ++e)
        data.x(r, e) = params.separation * dirs[c][e] + params.spread * rng.normal();
      data.y_true.push_back(static_cast<int>(c));
    }
  }
  data.y_observed = data.y_true;
  data.flipped.assign(n, 0);
  return data;
}

Split split_train_test(const Dataset& data, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw ValidationError("test fraction must lie in (0, 1)");
  std::vector<std::vector<std::size_t>> by_class(data.classes);
  for (std::size_t i = 0; i < data.size(); ++i)
    by_class.at(static_cast<std::size_t>(data.y_true[i])).push_back(i);
  Rng rng(seed);
  std::vector<std::size_t> train_idx, test_idx;
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto& members = by_class[c];
    if (members.size() < 2)
      throw ValidationError("split: class " + std::to_string(c) + " has fewer than 2 samples");
    for (std::size_t i = members.size() - 1; i > 0; --i)
      std::swap(members[i], members[rng.below(i + 1)]);
    auto n_test = static_cast<std::size_t>(
        std::llround(test_fraction * static_cast<double>(members.size())));
    n_test = std::clamp<std::size_t>(n_test, 1, members.size() - 1);
    test_idx.insert(test_idx.end(), members.begin(), members.begin() + n_test);
    train_idx.insert(train_idx.end(), members.begin() + n_test, members.end());
  }
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(test_idx.begin(), test_idx.end());
  return {data.subset(train_idx), data.subset(test_idx)};
}

BatchIterator::BatchIterator(std::size_t samples, std::size_t batch_size, std::uint64_t seed)
    : samples_(samples), batch_size_(batch_size), seed_(seed) {
  if (batch_size == 0) throw ValidationError("batch size must be >= 1");
}

std::vector<std::vector<std::size_t>> BatchIterator::batches(std::size_t epoch) const {
  std::vector<std::size_t> order(samples_);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed_, epoch));
  for (std::size_t i = samples_; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t start = 0; start < samples_; start += batch_size_)
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                     order.begin() + static_cast<std::ptrdiff_t>(std::min(samples_, start + batch_size_)));
  return out;
}

std::vector<std::vector<std::size_t>> BatchIterator::next_epoch() { return batches(epoch_++); }

void write_dataset_csv(std::ostream& os, const Dataset& data) {
  for (std::size_t e = 0; e < data.input_dim(); ++e) os << "feature_" << e << ',';
  os << "y_true,y_observed,flipped\n";
  char buf[40];
  for (std::size_t i = 0; i < data.size(); ++i) {
    for (double v : data.x.row(i)) {
      std::snprintf(buf, sizeof buf, "%.17g", v);
      os << buf << ',';
    }
    os << data.y_true[i] << ',' << data.y_observed[i] << ',' << int(data.flipped[i]) << '\n';
  }
}

Dataset read_dataset_csv(std::istream& is, std::size_t classes) {
  std::string line;
  if (!std::getline(is, line)) throw FormatError("dataset csv: missing header");
  const auto columns = static_cast<std::size_t>(std::count(line.begin(), line.end(), ',')) + 1;
  if (columns < 4) throw FormatError("dataset csv: header has too few columns");
  const std::size_t dim = columns - 3;
  std::vector<double> features;
  Dataset data;
  data.classes = classes;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (cells.size() != columns)
      throw FormatError("dataset csv: line " + std::to_string(line_no) + " has " +
                        std::to_string(cells.size()) + " cells, expected " +
                        std::to_string(columns));
    try {
      for (std::size_t e = 0; e < dim; ++e) features.push_back(std::stod(cells[e]));
      data.y_true.push_back(std::stoi(cells[dim]));
      data.y_observed.push_back(std::stoi(cells[dim + 1]));
      data.flipped.push_back(static_cast<std::uint8_t>(std::stoi(cells[dim + 2])));
    } catch (const std::logic_error&) {
      throw FormatError("dataset csv: unparsable value on line " + std::to_string(line_no));
    }
  }
  data.x = Matrix(data.y_true.size(), dim);
  std::copy(features.begin(), features.end(), data.x.data().begin());
  return data;
}

Backbone Backbone::init(std::size_t input_dim, std::size_t hidden_dim, std::size_t feature_dim,
                        Activation activation, Rng& rng) {
  Backbone b = zeros(input_dim, hidden_dim, feature_dim, activation);
  const double s1 = std::sqrt(2.0 / static_cast<double>(input_dim));
  const double s2 = std::sqrt(2.0 / static_cast<double>(hidden_dim));
  for (double& w : b.W1.data()) w = rng.normal(0.0, s1);
  for (double& w : b.W2.data()) w = rng.normal(0.0, s2);
  return b;
}

Backbone Backbone::zeros(std::size_t input_dim, std::size_t hidden_dim, std::size_t feature_dim,
                         Activation activation) {
  return {Matrix(hidden_dim, input_dim), Matrix(1, hidden_dim), Matrix(feature_dim, hidden_dim),
          Matrix(1, feature_dim), activation};
}

Standardized standardize_forward(const Matrix& x, double eps) {
  const std::size_t n = x.rows(), d = x.cols();
  Standardized s{Matrix(n, d), std::vector<double>(d)};
  if (n == 0) return s;
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t c = 0; c < d; ++c) {
    double mean = 0.0;
    for (std::size_t r = 0; r < n; ++r) mean += x(r, c);
    mean *= inv_n;
    double var = 0.0;
    for (std::size_t r = 0; r < n; ++r) var += (x(r, c) - mean) * (x(r, c) - mean);
    var *= inv_n;
    const double inv_std = 1.0 / std::sqrt(var + eps);
    s.inv_std[c] = inv_std;
    for (std::size_t r = 0; r < n; ++r) s.out(r, c) = (x(r, c) - mean) * inv_std;
  }
  return s;
}

Matrix standardize_backward(const Matrix& upstream, const Standardized& saved) {
  require_same_shape(upstream, saved.out, "standardize_backward");
  const std::size_t n = upstream.rows(), d = upstream.cols();
  Matrix dx(n, d);
  if (n == 0) return dx;
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t c = 0; c < d; ++c) {
    double mean_dy = 0.0, mean_dy_y = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      mean_dy += upstream(r, c);
      mean_dy_y += upstream(r, c) * saved.out(r, c);
    }
    mean_dy *= inv_n;
    mean_dy_y *= inv_n;
    for (std::size_t r = 0; r < n; ++r)
      dx(r, c) = saved.inv_std[c] * (upstream(r, c) - mean_dy - saved.out(r, c) * mean_dy_y);
  }
  return dx;
}

BackboneCache backbone_forward(const Matrix& x, const Backbone& backbone) {
  BackboneCache c;
  c.x = x;
  c.pre1 = linear_forward(x, backbone.W1, backbone.b1.data());
  c.act1 = activation_forward(c.pre1, backbone.activation);
  c.pre2 = linear_forward(c.act1, backbone.W2, backbone.b2.data());
  c.features = standardize_forward(c.pre2);
  return c;
}

BackboneGrads backbone_backward(const Matrix& upstream, const BackboneCache& cache,
                                const Backbone& backbone) {
  const Matrix d_pre2 = standardize_backward(upstream, cache.features);
  auto g2 = linear_backward(d_pre2, cache.act1, backbone.W2);
  const Matrix d_pre1 = activation_backward(g2.dX, cache.pre1, backbone.activation);
  auto g1 = linear_backward(d_pre1, cache.x, backbone.W1);
  return {std::move(g1.dW), std::move(g1.db), std::move(g2.dW), std::move(g2.db),
          std::move(g1.dX)};
}

GradTape::Slot record_standardize(GradTape& tape, GradTape::Slot x) {
  auto saved = std::make_shared<Standardized>(standardize_forward(tape.value(x)));
  const GradTape::Slot out = tape.push(saved->out);
  tape.record("standardize", [=](GradTape& t) {
    t.accumulate(x, standardize_backward(t.grad(out), *saved));
  });
  return out;
}

}  // namespace dcm
