#include "dcm/config.hpp"

#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <sstream>

#include "dcm/errors.hpp"

namespace dcm {

Schedule parse_schedule(std::string_view name) {
  if (name == "constant") return Schedule::constant;
  if (name == "cosine") return Schedule::cosine;
  throw ValidationError("unknown schedule '" + std::string(name) + "'");
}

std::string_view to_string(Schedule s) { return s == Schedule::constant ? "constant" : "cosine"; }

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

double to_double(std::string_view key, std::string_view v) {
  const std::string s(v);
  char* end = nullptr;
  errno = 0;
  const double d = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || errno != 0 || !std::isfinite(d))
    throw ValidationError("config: '" + std::string(key) + "' expects a number, got '" + s + "'");
  return d;
}

std::uint64_t to_uint(std::string_view key, std::string_view v) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc{} || ptr != v.data() + v.size())
    throw ValidationError("config: '" + std::string(key) + "' expects a non-negative integer, got '" +
                          std::string(v) + "'");
  return out;
}

bool to_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "off" || v == "no") return false;
  throw ValidationError("config: '" + std::string(key) + "' expects a boolean, got '" +
                        std::string(v) + "'");
}

std::vector<int> parse_ints(std::string_view text, std::string_view key) {
  std::vector<int> out;
  std::istringstream is{std::string(text)};
  std::string tok;
  while (is >> tok) out.push_back(static_cast<int>(to_uint(key, tok)));
  return out;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::vector<std::string> config_keys() {
  return {"classes", "n_per_class", "input_dim", "separation", "spread", "test_fraction",
          "hidden_dim", "feature_dim", "activation", "noise", "noise_rate", "noise_pairs",
          "noise_groups", "head", "kan_lower", "kan_upper", "kan_intervals", "kan_order",
          "head_init_scale", "mask", "mask_strategy", "mask_ratio", "mask_interval",
          "mask_stage", "loss", "lr", "weight_decay", "schedule", "epochs", "batch_size", "seed",
          "out", "instrument", "write_dataset"};
}

void ExperimentConfig::set(std::string_view key, std::string_view raw) {
  const auto v = trim(raw);
  if (key == "classes") classes = to_uint(key, v);
  else if (key == "n_per_class") n_per_class = to_uint(key, v);
  else if (key == "input_dim") input_dim = to_uint(key, v);
  else if (key == "separation") separation = to_double(key, v);
  else if (key == "spread") spread = to_double(key, v);
  else if (key == "test_fraction") test_fraction = to_double(key, v);
  else if (key == "hidden_dim") hidden_dim = to_uint(key, v);
  else if (key == "feature_dim") feature_dim = to_uint(key, v);
  else if (key == "activation") activation = parse_activation(v);
  else if (key == "noise") noise = parse_noise_kind(v);
  else if (key == "noise_rate") noise_rate = to_double(key, v);
  else if (key == "noise_pairs") noise_pairs = std::string(v);
  else if (key == "noise_groups") noise_groups = std::string(v);
  else if (key == "head") head = parse_head_kind(v);
  else if (key == "kan_lower") kan_lower = to_double(key, v);
  else if (key == "head_init_scale") head_init_scale = to_double(key, v);
  else if (key == "kan_upper") kan_upper = to_double(key, v);
  else if (key == "kan_intervals") kan_intervals = to_uint(key, v);
  else if (key == "kan_order") kan_order = to_uint(key, v);
  else if (key == "mask") masking.enabled = to_bool(key, v);
  else if (key == "mask_strategy") masking.strategy = parse_mask_strategy(v);
  else if (key == "mask_ratio") masking.ratio = to_double(key, v);
  else if (key == "mask_interval") masking.interval = parse_mask_interval(v);
  else if (key == "mask_stage") masking.stage = parse_mask_stage(v);
  else if (key == "loss") loss = parse_loss_kind(v);
  else if (key == "lr") learning_rate = to_double(key, v);
  else if (key == "weight_decay") weight_decay = to_double(key, v);
  else if (key == "schedule") schedule = parse_schedule(v);
  else if (key == "epochs") epochs = to_uint(key, v);
  else if (key == "batch_size") batch_size = to_uint(key, v);
  else if (key == "seed") seed = to_uint(key, v);
  else if (key == "out") out_dir = std::string(v);
  else if (key == "instrument") instrument = to_bool(key, v);
  else if (key == "write_dataset") write_dataset = to_bool(key, v);
  else throw ValidationError("config: unknown key '" + std::string(key) + "'");
}

void ExperimentConfig::validate() const {
  auto fail = [](const std::string& msg) { throw ValidationError("config: " + msg); };
  if (classes < 2) fail("classes must be >= 2");
  if (n_per_class < 2) fail("n_per_class must be >= 2");
  if (input_dim < 1 || hidden_dim < 1 || feature_dim < 1) fail("layer widths must be >= 1");
  if (!(separation > 0.0)) fail("separation must be > 0");
  if (!(spread > 0.0)) fail("spread must be > 0");
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) fail("test_fraction must lie in (0, 1)");
  if (noise != NoiseKind::none && !(noise_rate > 0.0 && noise_rate < 1.0))
    fail("noise_rate must lie in (0, 1)");
  if (!(learning_rate > 0.0)) fail("lr must be > 0");
  if (!(weight_decay >= 0.0)) fail("weight_decay must be >= 0");
  if (!(head_init_scale > 0.0)) fail("head_init_scale must be > 0");
  if (epochs < 1) fail("epochs must be >= 1");
  if (batch_size < 1) fail("batch_size must be >= 1");
  if (masking.enabled && batch_size < 2) fail("batch_size must be >= 2 when masking is enabled");
  masking.validate();
  if (head == HeadKind::kan) {
    (void)kan_grid();
    if (masking.enabled && masking.strategy == MaskStrategy::by_weight)
      fail("mask_strategy by_weight needs scalar edge weights (mlp head)");
  }
  (void)noise_spec(0);
}

NoiseSpec ExperimentConfig::noise_spec(std::uint64_t noise_seed) const {
  NoiseSpec spec{noise, noise_rate, {}, {}, noise_seed};
  if (noise == NoiseKind::asymmetric_pairs) {
    if (trim(noise_pairs).empty()) {
      spec.pair_map = cifar10_pair_map();
    } else {
      std::istringstream is(noise_pairs);
      std::string entry;
      while (std::getline(is, entry, ',')) {
        const auto colon = entry.find(':');
        if (colon == std::string::npos) throw ValidationError("config: noise_pairs entry '" + entry + "' lacks ':'");
        const auto src = static_cast<int>(to_uint("noise_pairs", trim(std::string_view(entry).substr(0, colon))));
        const auto dst = static_cast<int>(to_uint("noise_pairs", trim(std::string_view(entry).substr(colon + 1))));
        spec.pair_map[src] = dst;
      }
    }
    for (const auto& [src, dst] : spec.pair_map)
      if (src < 0 || dst < 0 || static_cast<std::size_t>(src) >= classes ||
          static_cast<std::size_t>(dst) >= classes)
        throw ValidationError("config: noise_pairs references a class >= classes");
  } else if (noise == NoiseKind::asymmetric_circular) {
    if (trim(noise_groups).empty()) {
      spec.groups = contiguous_groups(classes, 5);
    } else {
      std::istringstream is(noise_groups);
      std::string group;
      while (std::getline(is, group, ';')) spec.groups.push_back(parse_ints(group, "noise_groups"));
    }
  }
  return spec;
}

std::string ExperimentConfig::to_text() const {
  std::ostringstream os;
  os << "classes = " << classes << '\n'
     << "n_per_class = " << n_per_class << '\n'
     << "input_dim = " << input_dim << '\n'
     << "separation = " << fmt(separation) << '\n'
     << "spread = " << fmt(spread) << '\n'
     << "test_fraction = " << fmt(test_fraction) << '\n'
     << "hidden_dim = " << hidden_dim << '\n'
     << "feature_dim = " << feature_dim << '\n'
     << "activation = " << to_string(activation) << '\n'
     << "noise = " << to_string(noise) << '\n'
     << "noise_rate = " << fmt(noise_rate) << '\n'
     << "noise_pairs = " << noise_pairs << '\n'
     << "noise_groups = " << noise_groups << '\n'
     << "head = " << to_string(head) << '\n'
     << "kan_lower = " << fmt(kan_lower) << '\n'
     << "kan_upper = " << fmt(kan_upper) << '\n'
     << "kan_intervals = " << kan_intervals << '\n'
     << "kan_order = " << kan_order << '\n'
     << "head_init_scale = " << fmt(head_init_scale) << '\n'
     << "mask = " << (masking.enabled ? "true" : "false") << '\n'
     << "mask_strategy = " << to_string(masking.strategy) << '\n'
     << "mask_ratio = " << fmt(masking.ratio) << '\n'
     << "mask_interval = " << to_string(masking.interval) << '\n'
     << "mask_stage = " << to_string(masking.stage) << '\n'
     << "loss = " << to_string(loss) << '\n'
     << "lr = " << fmt(learning_rate) << '\n'
     << "weight_decay = " << fmt(weight_decay) << '\n'
     << "schedule = " << to_string(schedule) << '\n'
     << "epochs = " << epochs << '\n'
     << "batch_size = " << batch_size << '\n'
     << "seed = " << seed << '\n'
     << "out = " << out_dir << '\n'
     << "instrument = " << (instrument ? "true" : "false") << '\n'
     << "write_dataset = " << (write_dataset ? "true" : "false") << '\n';
  return os.str();
}

ExperimentConfig parse_config(std::istream& is, ExperimentConfig base) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    std::string_view text(line);
    if (const auto hash = text.find('#'); hash != std::string_view::npos) text = text.substr(0, hash);
    text = trim(text);
    if (text.empty()) continue;
    const auto eq = text.find('=');
    if (eq == std::string_view::npos)
      throw ValidationError("config line " + std::to_string(line_no) + ": expected 'key = value'");
    try {
      base.set(trim(text.substr(0, eq)), text.substr(eq + 1));
    } catch (const ValidationError& e) {
      throw ValidationError("config line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return base;
}

ExperimentConfig load_config(const std::string& path, ExperimentConfig base) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file '" + path + "'");
  return parse_config(in, std::move(base));
}

void apply_override(ExperimentConfig& cfg, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos)
    throw ValidationError("override '" + std::string(assignment) + "' is not key=value");
  cfg.set(trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

}  // namespace dcm
