#include "thadmm/run_config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

namespace thadmm {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string fmt(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, r.ptr);
}

template <typename T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const auto r = std::from_chars(value.data(), value.data() + value.size(), out);
  if (r.ec != std::errc() || r.ptr != value.data() + value.size())
    throw FormatError("config: bad numeric value for '" + key + "': '" + value + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true") return true;
  if (value == "false") return false;
  throw FormatError("config: '" + key + "' expects true or false");
}

struct Field {
  std::string key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

template <typename T, typename Member>
Field number(std::string key, Member member) {
  return {key,
          [member](const RunConfig& c) {
            if constexpr (std::is_floating_point_v<T>)
              return fmt(c.*member);
            else
              return std::to_string(c.*member);
          },
          [member, key](RunConfig& c, const std::string& v) { c.*member = parse_number<T>(key, v); }};
}

template <typename T>
Field split_number(std::string key, SplitConfig RunConfig::*split, T SplitConfig::*member) {
  return {key,
          [split, member](const RunConfig& c) {
            if constexpr (std::is_floating_point_v<T>)
              return fmt(c.*split.*member);
            else
              return std::to_string(c.*split.*member);
          },
          [split, member, key](RunConfig& c, const std::string& v) { c.*split.*member = parse_number<T>(key, v); }};
}

Field boolean(std::string key, bool RunConfig::*member) {
  return {key, [member](const RunConfig& c) { return std::string(c.*member ? "true" : "false"); },
          [member, key](RunConfig& c, const std::string& v) { c.*member = parse_bool(key, v); }};
}

Field text(std::string key, std::string RunConfig::*member) {
  return {key, [member](const RunConfig& c) { return c.*member; },
          [member](RunConfig& c, const std::string& v) { c.*member = v; }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    f.push_back(text("experiment", &RunConfig::experiment));
    f.push_back(text("profile", &RunConfig::profile));
    f.push_back(number<std::uint64_t>("seed", &RunConfig::seed));
    f.push_back(number<double>("array.gamma", &RunConfig::gamma));
    f.push_back(number<int>("array.full_aperture", &RunConfig::full_aperture));
    f.push_back(number<int>("array.m", &RunConfig::M));
    f.push_back(number<std::uint64_t>("array.seed", &RunConfig::array_seed));
    f.push_back({"array.positions",
                 [](const RunConfig& c) {
                   std::string out;
                   for (std::size_t i = 0; i < c.positions.size(); ++i)
                     out += (i ? "," : "") + std::to_string(c.positions[i]);
                   return out;
                 },
                 [](RunConfig& c, const std::string& v) {
                   c.positions.clear();
                   std::size_t start = 0;
                   while (start < v.size()) {
                     const auto comma = std::min(v.find(',', start), v.size());
                     c.positions.push_back(parse_number<int>("array.positions", trim(v.substr(start, comma - start))));
                     start = comma + 1;
                   }
                 }});
    f.push_back(number<Index>("grid.n", &RunConfig::N));
    for (auto [name, split] : {std::pair{"train", &RunConfig::train}, std::pair{"val", &RunConfig::val},
                               std::pair{"test", &RunConfig::test}}) {
      const std::string p = std::string("data.") + name + ".";
      f.push_back(split_number(p + (std::string(name) == "test" ? "count_per_snr" : "count"), split, &SplitConfig::count));
      if (std::string(name) != "test") f.push_back(split_number(p + "snr_db", split, &SplitConfig::snr_db));
      f.push_back(split_number(p + "separation", split, &SplitConfig::separation));
      f.push_back(split_number(p + "k_min", split, &SplitConfig::k_min));
      f.push_back(split_number(p + "k_max", split, &SplitConfig::k_max));
    }
    f.push_back(number<double>("data.test.snr_min", &RunConfig::test_snr_min));
    f.push_back(number<double>("data.test.snr_max", &RunConfig::test_snr_max));
    f.push_back(number<double>("data.test.snr_step", &RunConfig::test_snr_step));
    f.push_back(boolean("data.noise_per_component", &RunConfig::noise_per_component));
    f.push_back({"model.arch", [](const RunConfig& c) { return std::string(arch_name(c.arch)); },
                 [](RunConfig& c, const std::string& v) { c.arch = parse_arch(v); }});
    f.push_back(number<Index>("model.depth", &RunConfig::depth));
    f.push_back(boolean("model.stop_gradient_eta", &RunConfig::stop_gradient_eta));
    f.push_back(number<int>("train.epochs", &RunConfig::epochs));
    f.push_back(number<Index>("train.batch_size", &RunConfig::batch_size));
    f.push_back(number<double>("train.learning_rate", &RunConfig::learning_rate));
    f.push_back(number<double>("train.adam_beta1", &RunConfig::adam_beta1));
    f.push_back(number<double>("train.adam_beta2", &RunConfig::adam_beta2));
    f.push_back(number<double>("train.adam_eps", &RunConfig::adam_eps));
    f.push_back(number<int>("train.checkpoint_every", &RunConfig::checkpoint_every));
    f.push_back(number<double>("train.clip_norm", &RunConfig::clip_norm));
    f.push_back(number<Index>("train.chunk", &RunConfig::chunk));
    f.push_back(number<Index>("eval.delta1", &RunConfig::delta1));
    f.push_back(number<double>("eval.delta2", &RunConfig::delta2));
    f.push_back(number<double>("eval.baseline_tau", &RunConfig::baseline_tau));
    f.push_back(number<double>("eval.baseline_rho", &RunConfig::baseline_rho));
    f.push_back(number<int>("eval.ista_iterations", &RunConfig::ista_iterations));
    f.push_back(number<int>("eval.admm_iterations", &RunConfig::admm_iterations));
    f.push_back({"eval.threshold_convention",
                 [](const RunConfig& c) {
                   return std::string(c.threshold_convention == ThresholdConvention::kScaled ? "scaled" : "standard");
                 },
                 [](RunConfig& c, const std::string& v) {
                   if (v == "scaled")
                     c.threshold_convention = ThresholdConvention::kScaled;
                   else if (v == "standard")
                     c.threshold_convention = ThresholdConvention::kStandard;
                   else
                     throw FormatError("config: eval.threshold_convention expects scaled or standard");
                 }});
    f.push_back(text("paths.out", &RunConfig::out_dir));
    return f;
  }();
  return table;
}

}  // namespace

std::uint64_t derive_seed(std::uint64_t seed, std::string_view stream) {
  // FNV-1a over the stream name, mixed with splitmix64.
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (char ch : stream) h = (h ^ static_cast<unsigned char>(ch)) * 0x100000001b3ull;
  std::uint64_t z = seed + h + 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

void RunConfig::validate() const {
  if (M <= 0 || N <= 0 || depth <= 0) throw InvalidArgument("config: M, N and depth must be positive");
  if (!(gamma > 0.0 && gamma < 1.0)) throw InvalidArgument("config: array.gamma must lie in (0, 1)");
  if (M > full_aperture + 1) throw InvalidArgument("config: array.m exceeds full_aperture + 1");
  if (!(test_snr_step > 0.0) || test_snr_max < test_snr_min) throw InvalidArgument("config: bad test SNR range");
  if (!(delta2 > 0.0 && delta2 <= 1.0) || delta1 < 0) throw InvalidArgument("config: bad eval deltas");
  for (const SplitConfig* s : {&train, &val, &test})
    if (s->count == 0 || s->k_min < 1 || s->k_max < s->k_min || !(s->separation > 0.0))
      throw InvalidArgument("config: bad dataset split");
  train_config().validate();
}

ArrayLayout RunConfig::layout() const {
  if (positions.empty()) return subsample_positions(full_aperture, M, array_seed, gamma);
  if (static_cast<int>(positions.size()) != M) throw InvalidArgument("config: array.positions must list array.m elements");
  if (positions.back() > full_aperture) throw InvalidArgument("config: array.positions exceed full_aperture");
  return ArrayLayout(positions, gamma);
}

RunConfig RunConfig::resolved() const {
  RunConfig c = *this;
  c.positions = layout().positions;
  return c;
}

FrequencyGrid<double> RunConfig::grid() const { return FrequencyGrid<double>(N); }

DatasetSpec RunConfig::dataset_spec(const std::string& split) const {
  const SplitConfig* s = split == "train" ? &train : split == "val" ? &val : split == "test" ? &test : nullptr;
  if (!s) throw InvalidArgument("dataset_spec: unknown split '" + split + "'");
  DatasetSpec spec;
  spec.count_per_snr = s->count;
  if (split == "test") {
    for (double snr = test_snr_min; snr <= test_snr_max + 1e-9; snr += test_snr_step) spec.snr_levels_db.push_back(snr);
  } else {
    spec.snr_levels_db = {s->snr_db};
  }
  spec.min_sep = 1.0 / (s->separation * static_cast<double>(M));
  spec.k_range = {s->k_min, s->k_max};
  spec.seed = derive_seed(seed, split);
  spec.noise_per_component = noise_per_component;
  return spec;
}

TrainConfig RunConfig::train_config() const {
  TrainConfig t;
  t.epochs = epochs;
  t.batch_size = batch_size;
  t.learning_rate = learning_rate;
  t.adam = {adam_beta1, adam_beta2, adam_eps};
  t.seed = derive_seed(seed, "shuffle");
  t.checkpoint_every = checkpoint_every;
  t.clip_norm = clip_norm;
  t.chunk = chunk;
  t.grad.stop_gradient_eta = stop_gradient_eta;
  return t;
}

RunConfig profile_defaults(const std::string& profile) {
  RunConfig c;
  if (profile == "paper") return c;
  if (profile == "desk") {
    c.profile = "desk";
    c.N = 128;
    c.train.count = 20000;
    c.val.count = 4000;
    c.test.count = 800;
    c.epochs = 20;
    return c;
  }
  throw InvalidArgument("unknown profile '" + profile + "' (expected paper or desk)");
}

RunConfig parse_config(const std::string& text, const RunConfig& base) {
  RunConfig c = base;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) throw FormatError("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(std::string_view(body).substr(0, eq));
    const std::string value = trim(std::string_view(body).substr(eq + 1));
    bool found = false;
    for (const Field& f : fields()) {
      if (f.key == key) {
        f.set(c, value);
        found = true;
        break;
      }
    }
    if (!found) throw FormatError("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
  }
  return c;
}

RunConfig load_config(const std::string& path, const RunConfig& base) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config '" + path + "'");
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_config(ss.str(), base);
}

std::string serialize_config(const RunConfig& cfg) {
  std::string out;
  for (const Field& f : fields()) out += f.key + " = " + f.get(cfg) + "\n";
  return out;
}

}  // namespace thadmm
