#include "coopseg/dataset.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <unordered_map>

#include "coopseg/error.hpp"
#include "coopseg/rng.hpp"

COOPSEG_NAMESPACE_BEGIN

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t sample_seed(std::uint64_t seed, std::uint64_t index, std::uint64_t attempt) {
  return splitmix64(splitmix64(splitmix64(seed) ^ index) ^ attempt);
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
         static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}

std::vector<ShapeInstance> draw_shapes(Rng& rng, const DatasetConfig& c) {
  const int H = static_cast<int>(c.height), W = static_cast<int>(c.width);
  const int s = std::min(H, W);
  const auto count = static_cast<std::uint32_t>(rng.uniform_int(c.min_shapes, c.max_shapes));

  std::vector<std::uint32_t> cycle(c.num_classes - 1);
  std::iota(cycle.begin(), cycle.end(), 1u);
  std::vector<ShapeInstance> shapes;
  std::size_t next = cycle.size();
  auto between = [&](int lo, int hi) { return static_cast<int>(rng.uniform_int(lo, std::max(lo, hi))); };
  for (std::uint32_t i = 0; i < count; ++i) {
    if (next == cycle.size()) {
      rng.shuffle(cycle.begin(), cycle.end());
      next = 0;
    }
    ShapeInstance sh;
    sh.class_id = cycle[next++];
    switch (geometry_of(sh.class_id)) {
      case Geometry::Rectangle:
        sh.w = between(std::max(2, s / 6), s * 2 / 5);
        sh.h = between(std::max(2, s / 6), s * 2 / 5);
        break;
      case Geometry::Circle:
        sh.w = sh.h = between(std::max(3, s / 5), s * 2 / 5);
        break;
      case Geometry::DiagonalStripe:
        sh.w = sh.h = between(std::max(4, s / 3), s * 5 / 9);
        sh.thickness = between(std::max(1, s / 32), std::max(1, s / 12));
        break;
    }
    sh.w = std::min(sh.w, W);
    sh.h = std::min(sh.h, H);
    sh.x0 = between(0, W - sh.w);
    sh.y0 = between(0, H - sh.h);
    shapes.push_back(sh);
  }
  return shapes;
}

}  // namespace

void DatasetConfig::validate() const {
  if (num_classes < 2) throw ConfigError("num_classes must be >= 2");
  if (num_classes > 255) throw ConfigError("num_classes must fit in one byte");
  if (height == 0 || width == 0) throw ConfigError("height and width must be positive");
  if (height % 4 != 0 || width % 4 != 0) {
    throw ConfigError("height and width must be divisible by 4 (two 2x pooling levels), got " +
                      std::to_string(height) + "x" + std::to_string(width));
  }
  if (height < 8 || width < 8) throw ConfigError("height and width must be at least 8");
  if (min_shapes < 1 || min_shapes > max_shapes) throw ConfigError("need 1 <= min_shapes <= max_shapes");
  if (!(noise >= 0) || !std::isfinite(noise)) throw ConfigError("noise must be a finite non-negative stddev");
}

Geometry geometry_of(std::uint32_t class_id) {
  return static_cast<Geometry>((class_id - 1) % 3);
}

std::array<float, 3> class_color(std::uint32_t class_id) {
  static constexpr std::array<std::array<float, 3>, 4> kPalette{{
      {0.45f, 0.45f, 0.45f},
      {0.85f, 0.25f, 0.20f},
      {0.20f, 0.75f, 0.30f},
      {0.25f, 0.35f, 0.90f},
  }};
  if (class_id < kPalette.size()) return kPalette[class_id];
  std::array<float, 3> c{};
  for (int ch = 0; ch < 3; ++ch) {
    const double t = std::fmod(class_id * 0.618033988749895 + ch * 0.37, 1.0);
    c[static_cast<std::size_t>(ch)] = static_cast<float>(0.1 + 0.8 * t);
  }
  return c;
}

bool shape_covers(const ShapeInstance& s, int x, int y) {
  if (x < s.x0 || y < s.y0 || x >= s.x0 + s.w || y >= s.y0 + s.h) return false;
  switch (geometry_of(s.class_id)) {
    case Geometry::Rectangle:
      return true;
    case Geometry::Circle: {
      const double cx = s.x0 + (s.w - 1) / 2.0, cy = s.y0 + (s.h - 1) / 2.0;
      const double r = s.w / 2.0;
      return (x - cx) * (x - cx) + (y - cy) * (y - cy) <= r * r;
    }
    case Geometry::DiagonalStripe:
      return std::abs((x - s.x0) - (y - s.y0)) <= s.thickness;
  }
  return false;
}

SegSample render_sample(const std::vector<ShapeInstance>& shapes, std::uint32_t channels, std::uint32_t height,
                        std::uint32_t width, double noise, std::uint64_t noise_seed) {
  const std::size_t plane = static_cast<std::size_t>(height) * width;
  SegSample s;
  s.labels.assign(plane, 0);
  for (const auto& sh : shapes) {
    const int y_end = std::min<int>(sh.y0 + sh.h, static_cast<int>(height));
    const int x_end = std::min<int>(sh.x0 + sh.w, static_cast<int>(width));
    for (int y = std::max(0, sh.y0); y < y_end; ++y) {
      for (int x = std::max(0, sh.x0); x < x_end; ++x) {
        if (shape_covers(sh, x, y)) s.labels[static_cast<std::size_t>(y) * width + x] = static_cast<std::uint8_t>(sh.class_id);
      }
    }
  }
  s.image.resize(channels * plane);
  Rng rng(noise_seed);
  for (std::uint32_t c = 0; c < channels; ++c) {
    for (std::size_t p = 0; p < plane; ++p) {
      const float base = class_color(s.labels[p])[c % 3];
      double v = base;
      if (noise > 0) v += rng.normal(0.0, noise);
      s.image[c * plane + p] = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
  }
  return s;
}

Dataset generate_dataset(const DatasetConfig& config) {
  config.validate();
  Dataset d;
  d.channels = 3;
  d.height = config.height;
  d.width = config.width;
  d.num_classes = config.num_classes;
  d.samples.reserve(config.n_samples);
  for (std::uint32_t i = 0; i < config.n_samples; ++i) {
    for (std::uint64_t attempt = 0;; ++attempt) {
      Rng rng(sample_seed(config.seed, i, attempt));
      auto shapes = draw_shapes(rng, config);
      SegSample s = render_sample(shapes, d.channels, d.height, d.width, config.noise, rng.next());
      const auto first = s.labels.front();
      const bool single_class =
          std::all_of(s.labels.begin(), s.labels.end(), [first](std::uint8_t v) { return v == first; });
      if (!single_class) {
        d.samples.push_back(std::move(s));
        break;
      }
      if (attempt > 1000) throw ConfigError("could not draw a multi-class sample; check the shape settings");
    }
  }
  return d;
}

DatasetSplits generate_splits(DatasetConfig config, std::uint32_t n_train, std::uint32_t n_val,
                              std::uint32_t n_test) {
  DatasetSplits out;
  const std::uint64_t base = config.seed;
  config.n_samples = n_train;
  out.train = generate_dataset(config);
  config.seed = base + 1;
  config.n_samples = n_val;
  out.val = generate_dataset(config);
  config.seed = base + 2;
  config.n_samples = n_test;
  out.test = generate_dataset(config);

  std::unordered_map<std::uint64_t, int> owner;
  auto hash_of = [](const SegSample& s) {
    Fnv1a h;
    h.update(s.image.data(), s.image.size() * sizeof(float));
    h.update(s.labels.data(), s.labels.size());
    return h.value();
  };
  const Dataset* splits[] = {&out.train, &out.val, &out.test};
  for (int k = 0; k < 3; ++k) {
    for (const auto& s : splits[k]->samples) {
      auto [it, fresh] = owner.emplace(hash_of(s), k);
      if (!fresh && it->second != k) {
        // Confirm byte equality before rejecting; the hash is only a filter.
        for (const auto& other : splits[it->second]->samples) {
          if (other == s) throw DataError("a sample appears in two splits; pick a different seed");
        }
      }
    }
  }
  return out;
}

std::size_t dataset_file_size(const Dataset& d) {
  const std::size_t plane = static_cast<std::size_t>(d.height) * d.width;
  return kDatasetHeaderBytes + d.samples.size() * (d.channels * plane * 4 + plane);
}

std::vector<std::uint8_t> encode_dataset(const Dataset& d) {
  const std::size_t plane = static_cast<std::size_t>(d.height) * d.width;
  std::vector<std::uint8_t> out;
  out.reserve(dataset_file_size(d));
  for (char c : {'C', 'S', 'E', 'G'}) out.push_back(static_cast<std::uint8_t>(c));
  put_u32(out, kDatasetVersion);
  put_u32(out, static_cast<std::uint32_t>(d.samples.size()));
  put_u32(out, d.channels);
  put_u32(out, d.height);
  put_u32(out, d.width);
  put_u32(out, d.num_classes);
  for (std::size_t i = 0; i < d.samples.size(); ++i) {
    const auto& s = d.samples[i];
    if (s.image.size() != d.channels * plane || s.labels.size() != plane) {
      throw DataError("sample " + std::to_string(i) + " does not match the dataset dimensions");
    }
    for (float v : s.image) put_u32(out, std::bit_cast<std::uint32_t>(v));
    for (auto l : s.labels) {
      if (l >= d.num_classes) {
        throw DataError("label " + std::to_string(l) + " >= K=" + std::to_string(d.num_classes) +
                        " in sample " + std::to_string(i));
      }
    }
    out.insert(out.end(), s.labels.begin(), s.labels.end());
  }
  return out;
}

Dataset decode_dataset(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 4) {
    throw DataError("truncated file: expected at least 4 bytes, got " + std::to_string(bytes.size()));
  }
  if (std::memcmp(bytes.data(), "CSEG", 4) != 0) throw DataError("bad magic");
  if (bytes.size() < kDatasetHeaderBytes) {
    throw DataError("truncated file: expected " + std::to_string(kDatasetHeaderBytes) +
                    " header bytes, got " + std::to_string(bytes.size()));
  }
  const std::uint32_t version = get_u32(bytes.data() + 4);
  if (version != kDatasetVersion) {
    throw DataError("version mismatch: file has " + std::to_string(version) + ", reader supports " +
                    std::to_string(kDatasetVersion));
  }
  Dataset d;
  const std::uint32_t n = get_u32(bytes.data() + 8);
  d.channels = get_u32(bytes.data() + 12);
  d.height = get_u32(bytes.data() + 16);
  d.width = get_u32(bytes.data() + 20);
  d.num_classes = get_u32(bytes.data() + 24);
  if (d.num_classes < 2 || d.num_classes > 256) {
    throw DataError("invalid class count " + std::to_string(d.num_classes));
  }
  const std::size_t plane = static_cast<std::size_t>(d.height) * d.width;
  const std::size_t per_sample = d.channels * plane * 4 + plane;
  const std::size_t expected = kDatasetHeaderBytes + n * per_sample;
  if (bytes.size() < expected) {
    throw DataError("truncated file: expected " + std::to_string(expected) + " bytes, got " +
                    std::to_string(bytes.size()));
  }
  if (bytes.size() > expected) {
    throw DataError("trailing data: expected " + std::to_string(expected) + " bytes, got " +
                    std::to_string(bytes.size()));
  }
  d.samples.resize(n);
  const std::uint8_t* p = bytes.data() + kDatasetHeaderBytes;
  for (std::uint32_t i = 0; i < n; ++i) {
    auto& s = d.samples[i];
    s.image.resize(d.channels * plane);
    for (auto& v : s.image) {
      v = std::bit_cast<float>(get_u32(p));
      p += 4;
    }
    s.labels.assign(p, p + plane);
    p += plane;
    for (auto l : s.labels) {
      if (l >= d.num_classes) {
        throw DataError("label " + std::to_string(l) + " >= K=" + std::to_string(d.num_classes) +
                        " in sample " + std::to_string(i));
      }
    }
  }
  return d;
}

void save_dataset(const std::string& path, const Dataset& d) {
  const auto bytes = encode_dataset(d);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot open '" + path + "' for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw DataError("write to '" + path + "' failed");
}

Dataset load_dataset(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open dataset '" + path + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  try {
    return decode_dataset(bytes);
  } catch (const DataError& e) {
    throw DataError(path + ": " + e.what());
  }
}

Batch make_batch(const Dataset& d, const std::vector<std::size_t>& indices,
                 const std::vector<std::pair<std::size_t, std::size_t>>& offsets, std::size_t crop_h,
                 std::size_t crop_w) {
  if (indices.size() != offsets.size()) throw ConfigError("make_batch: one offset per index");
  if (crop_h > d.height || crop_w > d.width) throw ConfigError("make_batch: crop larger than image");
  const std::size_t n = indices.size(), c = d.channels;
  std::vector<real> img(n * c * crop_h * crop_w);
  LabelMap labels{n, crop_h, crop_w, std::vector<std::uint8_t>(n * crop_h * crop_w)};
  for (std::size_t b = 0; b < n; ++b) {
    const auto& s = d.samples.at(indices[b]);
    const auto [oy, ox] = offsets[b];
    if (oy + crop_h > d.height || ox + crop_w > d.width) throw ConfigError("make_batch: crop outside image");
    for (std::size_t y = 0; y < crop_h; ++y) {
      const std::size_t src_row = (oy + y) * d.width + ox;
      for (std::size_t ch = 0; ch < c; ++ch) {
        const float* src = s.image.data() + ch * d.height * d.width + src_row;
        real* dst = img.data() + ((b * c + ch) * crop_h + y) * crop_w;
        for (std::size_t x = 0; x < crop_w; ++x) dst[x] = static_cast<real>(src[x]);
      }
      std::copy_n(s.labels.data() + src_row, crop_w, labels.values.data() + (b * crop_h + y) * crop_w);
    }
  }
  return {Tensor::from({n, c, crop_h, crop_w}, std::move(img)), std::move(labels)};
}

COOPSEG_NAMESPACE_END
