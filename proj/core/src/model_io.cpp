#include "coopseg/model_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "coopseg/error.hpp"
#include "coopseg/spec_io.hpp"

COOPSEG_NAMESPACE_BEGIN

namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& b) : bytes_(b) {}

  std::uint32_t u32() {
    need(4);
    const auto* p = bytes_.data() + pos_;
    pos_ += 4;
    return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
           static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
  }
  std::string str(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) {
    if (pos_ + n > bytes_.size()) {
      throw DataError("truncated model file: expected " + std::to_string(pos_ + n) + " bytes, got " +
                      std::to_string(bytes_.size()));
    }
  }
  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

std::string join(const std::vector<std::string>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + v[i];
  return s;
}

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

std::vector<NamedTensor> named_parameters(const CoopModel& model) {
  std::vector<NamedTensor> out;
  auto add = [&](const char* prefix, const Network& net) {
    for (std::size_t i = 0; i < net.spec().blocks.size(); ++i) {
      if (const auto* p = net.block_params(i)) {
        const std::string base = std::string(prefix) + "." + net.spec().blocks[i].name;
        out.push_back({base + ".weight", p->weight});
        out.push_back({base + ".bias", p->bias});
      }
    }
  };
  add("top", model.top);
  if (model.bottom) add("bottom", *model.bottom);
  return out;
}

}  // namespace

std::string format_scheme(const ConnectionScheme& scheme) {
  std::ostringstream os;
  os << "method " << method_name(scheme.method()) << '\n';
  if (const auto* s = std::get_if<SameLayerScheme>(&scheme.variant)) os << "taps " << join(s->taps) << '\n';
  if (const auto* m = std::get_if<MultiLayerScheme>(&scheme.variant)) {
    os << "taps " << join(m->sources) << '\n';
    os << "target " << m->target << '\n';
  }
  os << "detach " << (scheme.detach_gradients ? 1 : 0) << '\n';
  return os.str();
}

std::vector<std::uint8_t> encode_model(const CoopModel& model) {
  std::ostringstream meta;
  meta << format_spec(model.spec) << format_scheme(model.scheme);
  meta << "seed_top " << model.top.seed() << '\n';
  meta << "seed_bottom " << (model.bottom ? model.bottom->seed() : 0) << '\n';
  const std::string text = meta.str();

  std::vector<std::uint8_t> out;
  for (char c : {'C', 'S', 'M', 'D'}) out.push_back(static_cast<std::uint8_t>(c));
  put_u32(out, kModelVersion);
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  out.insert(out.end(), text.begin(), text.end());
  const auto named = named_parameters(model);
  put_u32(out, static_cast<std::uint32_t>(named.size()));
  for (const auto& nt : named) {
    put_u32(out, static_cast<std::uint32_t>(nt.name.size()));
    out.insert(out.end(), nt.name.begin(), nt.name.end());
    put_u32(out, static_cast<std::uint32_t>(nt.tensor.rank()));
    for (auto d : nt.tensor.shape()) put_u32(out, static_cast<std::uint32_t>(d));
  }
  for (const auto& nt : named) {
    for (real v : nt.tensor.data()) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  }
  return out;
}

CoopModel decode_model(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  if (r.str(4) != "CSMD") throw DataError("bad magic");
  if (const auto v = r.u32(); v != kModelVersion) {
    throw DataError("version mismatch: model file has " + std::to_string(v));
  }
  const std::string meta = r.str(r.u32());

  // Scheme and seed lines are split off; the rest is the network spec.
  std::istringstream in(meta);
  std::string spec_text, method = "single", target;
  std::vector<std::string> taps;
  bool detach = false;
  std::uint64_t seed_top = 0, seed_bottom = 0;
  for (std::string line; std::getline(in, line);) {
    std::istringstream ls(line);
    std::string key, value;
    ls >> key >> value;
    if (key == "method") {
      method = value;
    } else if (key == "taps") {
      taps = split_commas(value);
    } else if (key == "target") {
      target = value;
    } else if (key == "detach") {
      detach = value == "1";
    } else if (key == "seed_top") {
      seed_top = std::stoull(value);
    } else if (key == "seed_bottom") {
      seed_bottom = std::stoull(value);
    } else {
      spec_text += line + '\n';
    }
  }
  const NetworkSpec spec = parse_spec(spec_text);
  ConnectionScheme scheme;
  switch (parse_method(method)) {
    case Method::Single:
      scheme = ConnectionScheme::single();
      break;
    case Method::Ensemble:
      scheme = ConnectionScheme::ensemble();
      break;
    case Method::SameLayer:
      scheme = ConnectionScheme::same_layer(taps, detach);
      break;
    case Method::MultiLayer:
      scheme = ConnectionScheme::multi_layer(taps, target, detach);
      break;
  }
  scheme.detach_gradients = detach;
  CoopModel model = build_coop_model(spec, scheme, seed_top, scheme.two_networks() ? seed_bottom : seed_top + 1);

  auto named = named_parameters(model);
  const std::uint32_t n = r.u32();
  if (n != named.size()) {
    throw DataError("model file has " + std::to_string(n) + " tensors, architecture needs " +
                    std::to_string(named.size()));
  }
  for (const auto& nt : named) {
    const std::string name = r.str(r.u32());
    if (name != nt.name) throw DataError("model file tensor '" + name + "' where '" + nt.name + "' was expected");
    Shape shape(r.u32());
    for (auto& d : shape) d = r.u32();
    if (shape != nt.tensor.shape()) {
      throw DataError("tensor '" + name + "' has shape " + shape_str(shape) + ", expected " +
                      shape_str(nt.tensor.shape()));
    }
  }
  for (auto& nt : named) {
    auto data = nt.tensor.mutable_data();
    for (auto& v : data) v = static_cast<real>(std::bit_cast<float>(r.u32()));
    check_finite(data, "model file");
  }
  if (!r.done()) throw DataError("trailing bytes after model data");
  return model;
}

void save_model(const std::string& path, const CoopModel& model) {
  const auto bytes = encode_model(model);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot open '" + path + "' for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw DataError("write to '" + path + "' failed");
}

CoopModel load_model(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open model '" + path + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  try {
    return decode_model(bytes);
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

COOPSEG_NAMESPACE_END
