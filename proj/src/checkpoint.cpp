// Checkpoint layout (JSON, keys in this order):
//   format_version, arch, T, M, N,
//   layers: [ { <field>: ..., ... } ]   fields in for_each_param order
//   optimizer: { step, epoch, seed, m: [...], v: [...] }
// Complex vectors are arrays of [re, im]; matrices are arrays of rows.

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "thadmm/trainer.hpp"

namespace thadmm {

namespace {

using Json = nlohmann::ordered_json;
constexpr int kFormatVersion = 1;

Json to_json(const CVec& v) {
  Json a = Json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back({v[i].real(), v[i].imag()});
  return a;
}

Json to_json(const CMat& m) {
  Json rows = Json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Index j = 0; j < m.cols(); ++j) row.push_back({m(i, j).real(), m(i, j).imag()});
    rows.push_back(std::move(row));
  }
  return rows;
}

cd complex_from(const Json& pair) {
  if (!pair.is_array() || pair.size() != 2) throw FormatError("checkpoint: complex value must be [re, im]");
  return {pair[0].get<double>(), pair[1].get<double>()};
}

CVec vec_from(const Json& a, Index expected) {
  if (!a.is_array() || static_cast<Index>(a.size()) != expected) throw FormatError("checkpoint: vector length mismatch");
  CVec v(expected);
  for (Index i = 0; i < expected; ++i) v[i] = complex_from(a[static_cast<std::size_t>(i)]);
  return v;
}

CMat mat_from(const Json& rows, Index r, Index c) {
  if (!rows.is_array() || static_cast<Index>(rows.size()) != r) throw FormatError("checkpoint: matrix row count mismatch");
  CMat m(r, c);
  for (Index i = 0; i < r; ++i) {
    const Json& row = rows[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Index>(row.size()) != c) throw FormatError("checkpoint: matrix column count mismatch");
    for (Index j = 0; j < c; ++j) m(i, j) = complex_from(row[static_cast<std::size_t>(j)]);
  }
  return m;
}

// Expected shape of each field, given the network dimensions.
std::pair<Index, Index> field_shape(std::string_view name, Index M, Index N) {
  if (name == "w") return {N, N};
  if (name == "w2") return {N, M};
  if (name == "gen") return {N, 1};
  if (name == "gen_row") return {N - 1, 1};
  return {1, 1};
}

Json real_array(const RVec& v) {
  Json a = Json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

RVec real_from(const Json& a, Index expected) {
  if (!a.is_array() || static_cast<Index>(a.size()) != expected) throw FormatError("checkpoint: optimizer buffer size mismatch");
  RVec v(expected);
  for (Index i = 0; i < expected; ++i) v[i] = a[static_cast<std::size_t>(i)].get<double>();
  return v;
}

}  // namespace

std::string checkpoint_to_string(const TrainState& state) {
  const Network& net = state.net;
  Json j;
  j["format_version"] = kFormatVersion;
  j["arch"] = std::string(arch_name(net.arch));
  j["T"] = net.depth();
  j["M"] = net.M;
  j["N"] = net.N;
  Json layers = Json::array();
  for (const LayerParams& p : net.layers) {
    Json layer = Json::object();
    for_each_param(net.arch, p, [&layer](std::string_view name, const auto& field) {
      layer[std::string(name)] = [&] {
        if constexpr (std::is_same_v<std::decay_t<decltype(field)>, double>)
          return Json(field);
        else
          return to_json(field);
      }();
    });
    layers.push_back(std::move(layer));
  }
  j["layers"] = std::move(layers);
  Json opt;
  opt["step"] = state.step;
  opt["epoch"] = state.epoch;
  opt["seed"] = state.seed;
  opt["m"] = real_array(state.m);
  opt["v"] = real_array(state.v);
  j["optimizer"] = std::move(opt);
  return j.dump(1);
}

TrainState checkpoint_from_string(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw FormatError(std::string("checkpoint: parse error: ") + e.what());
  }
  try {
    if (j.at("format_version").get<int>() != kFormatVersion) throw FormatError("checkpoint: unsupported format_version");
    Network net;
    net.arch = parse_arch(j.at("arch").get<std::string>());
    const Index T = j.at("T").get<Index>();
    net.M = j.at("M").get<Index>();
    net.N = j.at("N").get<Index>();
    const Json& layers = j.at("layers");
    if (!layers.is_array() || static_cast<Index>(layers.size()) != T) throw FormatError("checkpoint: layer count mismatch");
    net.layers.resize(static_cast<std::size_t>(T));
    for (Index t = 0; t < T; ++t) {
      const Json& lj = layers[static_cast<std::size_t>(t)];
      for_each_param(net.arch, net.layers[static_cast<std::size_t>(t)], [&](std::string_view name, auto& field) {
        const Json& v = lj.at(std::string(name));
        using F = std::decay_t<decltype(field)>;
        const auto [r, c] = field_shape(name, net.M, net.N);
        if constexpr (std::is_same_v<F, double>)
          field = v.get<double>();
        else if constexpr (std::is_same_v<F, CVec>)
          field = vec_from(v, r);
        else
          field = mat_from(v, r, c);
      });
      if (has_hermitian_generator(net.arch) && net.layers[static_cast<std::size_t>(t)].gen[0].imag() != 0.0)
        throw FormatError("checkpoint: Hermitian generator with complex diagonal");
    }
    const Json& opt = j.at("optimizer");
    TrainState s;
    const Index dof = real_dof_count(net);
    s.net = std::move(net);
    s.step = opt.at("step").get<std::int64_t>();
    s.epoch = opt.at("epoch").get<int>();
    s.seed = opt.at("seed").get<std::uint64_t>();
    s.m = real_from(opt.at("m"), dof);
    s.v = real_from(opt.at("v"), dof);
    return s;
  } catch (const Json::exception& e) {
    throw FormatError(std::string("checkpoint: malformed content: ") + e.what());
  }
}

void save_checkpoint(const TrainState& state, const std::string& path) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  os << checkpoint_to_string(state) << '\n';
  if (!os) throw IoError("write to '" + path + "' failed");
}

TrainState load_checkpoint(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open '" + path + "'");
  std::stringstream ss;
  ss << is.rdbuf();
  return checkpoint_from_string(ss.str());
}

TrainState load_checkpoint(const std::string& path, Arch expected) {
  TrainState s = load_checkpoint(path);
  if (s.net.arch != expected) {
    throw MismatchError("checkpoint '" + path + "' holds a " + std::string(arch_name(s.net.arch)) + " network, expected " +
                        std::string(arch_name(expected)));
  }
  return s;
}

}  // namespace thadmm
