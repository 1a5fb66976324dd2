#include "unideal/model.hpp"

#include <algorithm>
#include <cstring>
#include <string>

namespace unideal {

namespace {

std::vector<std::string> arch_violations(const Architecture& arch) {
  std::vector<std::string> v;
  if (arch.layer_dims.size() < 2) {
    v.push_back("architecture needs at least [in_dim, class_count]");
    return v;
  }
  for (int d : arch.layer_dims) {
    if (d < 1) {
      v.push_back("architecture dimensions must be positive");
      break;
    }
  }
  if (arch.layer_dims.back() < 2) {
    v.push_back("class count must be >= 2");
  }
  if (arch.head_depth < 1 || arch.head_depth > arch.num_layers()) {
    v.push_back("head_depth must lie in [1, layer count]");
  }
  return v;
}

void append_le_u32(std::vector<std::uint8_t>& out, std::uint32_t x) {
  out.push_back(static_cast<std::uint8_t>(x & 0xff));
  out.push_back(static_cast<std::uint8_t>((x >> 8) & 0xff));
  out.push_back(static_cast<std::uint8_t>((x >> 16) & 0xff));
  out.push_back(static_cast<std::uint8_t>((x >> 24) & 0xff));
}

std::uint32_t read_le_u32(std::span<const std::uint8_t> bytes, std::size_t at) {
  return static_cast<std::uint32_t>(bytes[at]) |
         (static_cast<std::uint32_t>(bytes[at + 1]) << 8) |
         (static_cast<std::uint32_t>(bytes[at + 2]) << 16) |
         (static_cast<std::uint32_t>(bytes[at + 3]) << 24);
}

std::size_t chain_param_count(const std::vector<int>& dims) {
  std::size_t n = 0;
  for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
    n += static_cast<std::size_t>(dims[i + 1]) * static_cast<std::size_t>(dims[i]) +
         static_cast<std::size_t>(dims[i + 1]);
  }
  return n;
}

std::string dims_to_string(const std::vector<int>& dims) {
  std::string s = "[";
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(dims[i]);
  }
  return s + "]";
}

std::vector<int> chain_signature(const std::vector<DenseLayer>& layers, int in_dim) {
  std::vector<int> sig;
  sig.push_back(in_dim);
  for (const auto& layer : layers) {
    sig.push_back(static_cast<int>(layer.out_dim()));
  }
  return sig;
}

}  // namespace

std::vector<int> Architecture::head_dims() const {
  const auto first = layer_dims.begin() + extractor_layer_count();
  return {first, layer_dims.end()};
}

std::vector<int> Architecture::extractor_dims() const {
  const auto last = layer_dims.begin() + extractor_layer_count() + 1;
  return {layer_dims.begin(), last};
}

void Architecture::validate() const {
  auto v = arch_violations(*this);
  if (!v.empty()) {
    throw ConfigError(std::move(v));
  }
}

std::vector<std::uint8_t> ParamSnapshot::serialize() const {
  std::vector<std::uint8_t> out;
  out.reserve(4 + 4 * signature.size() + payload_bytes());
  append_le_u32(out, static_cast<std::uint32_t>(signature.size()));
  for (int d : signature) {
    append_le_u32(out, static_cast<std::uint32_t>(d));
  }
  for (double v : values) {
    const float f = static_cast<float>(v);
    std::uint32_t bits;
    std::memcpy(&bits, &f, sizeof(bits));
    append_le_u32(out, bits);
  }
  return out;
}

ParamSnapshot ParamSnapshot::deserialize(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4) {
    throw InvalidInputError("snapshot bytes truncated");
  }
  ParamSnapshot snap;
  const std::size_t sig_len = read_le_u32(bytes, 0);
  std::size_t at = 4;
  if (bytes.size() < at + 4 * sig_len) {
    throw InvalidInputError("snapshot bytes truncated in signature");
  }
  snap.signature.reserve(sig_len);
  for (std::size_t i = 0; i < sig_len; ++i, at += 4) {
    snap.signature.push_back(static_cast<int>(read_le_u32(bytes, at)));
  }
  const std::size_t expect = chain_param_count(snap.signature);
  if (bytes.size() != at + 4 * expect) {
    throw InvalidInputError("snapshot byte length does not match signature");
  }
  snap.values.reserve(expect);
  for (std::size_t i = 0; i < expect; ++i, at += 4) {
    const std::uint32_t bits = read_le_u32(bytes, at);
    float f;
    std::memcpy(&f, &bits, sizeof(f));
    snap.values.push_back(static_cast<double>(f));
  }
  return snap;
}

ParamSnapshot snapshot_layers(const std::vector<DenseLayer>& layers, int in_dim) {
  ParamSnapshot snap;
  snap.signature = chain_signature(layers, in_dim);
  snap.values.reserve(param_count(layers));
  for (const auto& layer : layers) {
    snap.values.insert(snap.values.end(), layer.weights.data().begin(),
                       layer.weights.data().end());
    snap.values.insert(snap.values.end(), layer.biases.begin(), layer.biases.end());
  }
  return snap;
}

void install_layers(std::vector<DenseLayer>& layers, int in_dim,
                    const ParamSnapshot& snapshot) {
  if (snapshot.signature != chain_signature(layers, in_dim)) {
    throw IncompatibleHeadError("snapshot signature " + dims_to_string(snapshot.signature) +
                                " does not match chain " +
                                dims_to_string(chain_signature(layers, in_dim)));
  }
  std::size_t at = 0;
  for (auto& layer : layers) {
    std::copy_n(snapshot.values.begin() + at, layer.weights.size(),
                layer.weights.data().begin());
    at += layer.weights.size();
    std::copy_n(snapshot.values.begin() + at, layer.biases.size(), layer.biases.begin());
    at += layer.biases.size();
  }
}

std::vector<DenseLayer> layers_from_snapshot(const ParamSnapshot& snapshot,
                                             bool ends_with_logits) {
  if (snapshot.signature.size() < 2) {
    throw InvalidInputError("snapshot signature needs at least two dimensions");
  }
  if (snapshot.values.size() != chain_param_count(snapshot.signature)) {
    throw ShapeError("snapshot value count does not match signature");
  }
  std::vector<DenseLayer> layers;
  const std::size_t n = snapshot.signature.size() - 1;
  std::size_t at = 0;
  for (std::size_t li = 0; li < n; ++li) {
    DenseLayer layer;
    const auto in = static_cast<std::size_t>(snapshot.signature[li]);
    const auto out = static_cast<std::size_t>(snapshot.signature[li + 1]);
    layer.weights = Matrix(out, in);
    std::copy_n(snapshot.values.begin() + at, out * in, layer.weights.data().begin());
    at += out * in;
    layer.biases.assign(snapshot.values.begin() + at, snapshot.values.begin() + at + out);
    at += out;
    layer.activation = (ends_with_logits && li + 1 == n) ? Activation::kIdentity
                                                         : Activation::kRelu;
    layers.push_back(std::move(layer));
  }
  return layers;
}

DecoupledModel DecoupledModel::init(const Architecture& arch, Rng& rng) {
  arch.validate();
  DecoupledModel model;
  model.arch = arch;
  const int total = arch.num_layers();
  for (int li = 0; li < total; ++li) {
    const auto act = li + 1 == total ? Activation::kIdentity : Activation::kRelu;
    auto layer = make_dense_layer(static_cast<std::size_t>(arch.layer_dims[li]),
                                  static_cast<std::size_t>(arch.layer_dims[li + 1]), act, rng);
    if (li < arch.extractor_layer_count()) {
      model.extractor.push_back(std::move(layer));
    } else {
      model.head.push_back(std::move(layer));
    }
  }
  return model;
}

HeadSnapshot DecoupledModel::head_snapshot() const {
  return snapshot_layers(head, arch.head_dims().front());
}

void DecoupledModel::install_head(const HeadSnapshot& snapshot) {
  install_layers(head, arch.head_dims().front(), snapshot);
}

ParamSnapshot DecoupledModel::full_snapshot() const {
  std::vector<DenseLayer> all = extractor;
  all.insert(all.end(), head.begin(), head.end());
  return snapshot_layers(all, arch.in_dim());
}

void DecoupledModel::install_full(const ParamSnapshot& snapshot) {
  if (snapshot.signature != arch.layer_dims) {
    throw IncompatibleHeadError("full snapshot signature does not match architecture");
  }
  std::vector<DenseLayer> all = extractor;
  all.insert(all.end(), head.begin(), head.end());
  install_layers(all, arch.in_dim(), snapshot);
  const std::size_t split = extractor.size();
  std::copy_n(all.begin(), split, extractor.begin());
  std::copy(all.begin() + split, all.end(), head.begin());
}

ParamSnapshot DecoupledModel::extractor_snapshot() const {
  return snapshot_layers(extractor, arch.in_dim());
}

void DecoupledModel::install_extractor(const ParamSnapshot& snapshot) {
  install_layers(extractor, arch.in_dim(), snapshot);
}

Matrix DecoupledModel::logits(const Matrix& inputs) const {
  const auto features = forward_layers(extractor, inputs);
  return forward_layers(head, features.back()).back();
}

DualForward forward_dual(const DecoupledModel& model, const HeadSnapshot& global_head,
                         const Matrix& inputs) {
  if (global_head.signature != model.head_signature()) {
    throw IncompatibleHeadError("global head signature " +
                                dims_to_string(global_head.signature) +
                                " does not match model head " +
                                dims_to_string(model.head_signature()));
  }
  DualForward result;
  result.extractor_acts = forward_layers(model.extractor, inputs);
  const Matrix& features = result.extractor_acts.back();
  const auto teacher_head = layers_from_snapshot(global_head, /*ends_with_logits=*/true);
  result.teacher_logits = forward_layers(teacher_head, features).back();
  result.student_head_acts = forward_layers(model.head, features);
  result.student_logits = result.student_head_acts.back();
  return result;
}

Architecture generate_hetero_arch(std::uint64_t seed, int in_dim, int class_count,
                                  std::pair<int, int> depth_range,
                                  std::pair<int, int> width_range,
                                  int shared_last_hidden) {
  std::vector<std::string> v;
  if (in_dim < 1) v.push_back("in_dim must be >= 1");
  if (class_count < 2) v.push_back("class_count must be >= 2");
  if (depth_range.first < 1 || depth_range.second < depth_range.first) {
    v.push_back("depth_range must be a nonempty range of positive depths");
  }
  if (width_range.first < 1 || width_range.second < width_range.first) {
    v.push_back("width_range must be a nonempty range of positive widths");
  }
  if (!v.empty()) {
    throw ConfigError(std::move(v));
  }
  Rng rng(seed);
  const int depth =
      depth_range.first + rng.uniform_int(depth_range.second - depth_range.first + 1);
  Architecture arch;
  arch.layer_dims.push_back(in_dim);
  for (int i = 0; i < depth; ++i) {
    arch.layer_dims.push_back(
        width_range.first + rng.uniform_int(width_range.second - width_range.first + 1));
  }
  if (shared_last_hidden > 0) {
    arch.layer_dims.back() = shared_last_hidden;
  }
  arch.layer_dims.push_back(class_count);
  arch.head_depth = 1;
  return arch;
}

HeadFraction head_fraction(const Architecture& arch) {
  arch.validate();
  HeadFraction out;
  out.head_params = chain_param_count(arch.head_dims());
  out.total_params = chain_param_count(arch.layer_dims);
  out.fraction = static_cast<double>(out.head_params) / static_cast<double>(out.total_params);
  return out;
}

}  // namespace unideal
