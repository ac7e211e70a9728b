#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "coopseg/config.hpp"
#include "coopseg/tensor.hpp"

COOPSEG_NAMESPACE_BEGIN

/// One image with per-pixel labels. Image is CHW float in [0, 1].
struct SegSample {
  std::vector<float> image;
  std::vector<std::uint8_t> labels;

  bool operator==(const SegSample&) const = default;
};

struct Dataset {
  std::uint32_t channels = 3;
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  std::uint32_t num_classes = 0;
  std::vector<SegSample> samples;

  std::size_t size() const { return samples.size(); }
  bool operator==(const Dataset&) const = default;
};

struct DatasetConfig {
  std::uint32_t n_samples = 100;
  std::uint32_t height = 64;
  std::uint32_t width = 64;
  /// Background plus K-1 shape classes.
  std::uint32_t num_classes = 4;
  std::uint32_t min_shapes = 3;
  std::uint32_t max_shapes = 6;
  double noise = 0.1;
  std::uint64_t seed = 0;

  /// Throws ConfigError for K < 2, sizes not divisible by 4, and similar.
  void validate() const;
};

enum class Geometry : std::uint8_t { Rectangle, Circle, DiagonalStripe };

/// Class c in 1..K-1 is drawn as geometry (c-1) mod 3.
Geometry geometry_of(std::uint32_t class_id);

/// Base RGB colour of a class. Class 0 is the background.
std::array<float, 3> class_color(std::uint32_t class_id);

/// A shape placed inside the bounding box [x0, x0+w) x [y0, y0+h).
/// Circles are inscribed in the box; stripes are the 45-degree band
/// |(x-x0) - (y-y0)| <= thickness inside the box.
struct ShapeInstance {
  std::uint32_t class_id = 1;
  int x0 = 0, y0 = 0, w = 1, h = 1;
  int thickness = 1;
};

bool shape_covers(const ShapeInstance& s, int x, int y);

/// Paints shapes in order (later ones win) and adds clipped Gaussian noise.
SegSample render_sample(const std::vector<ShapeInstance>& shapes, std::uint32_t channels,
                        std::uint32_t height, std::uint32_t width, double noise, std::uint64_t noise_seed);

/// Deterministic in config.seed. Samples whose labels hold a single class are
/// redrawn.
Dataset generate_dataset(const DatasetConfig& config);

struct DatasetSplits {
  Dataset train;
  Dataset val;
  Dataset test;
};

/// Generates three splits from seeds seed, seed+1 and seed+2. Throws DataError
/// if any sample appears byte-identical in two splits.
DatasetSplits generate_splits(DatasetConfig config, std::uint32_t n_train, std::uint32_t n_val,
                              std::uint32_t n_test);

// Container layout (little-endian, no padding):
//   "CSEG" | u32 version=1 | u32 n | u32 C | u32 H | u32 W | u32 K
//   then per sample: C*H*W f32 image (CHW) | H*W u8 labels
inline constexpr std::uint32_t kDatasetVersion = 1;
inline constexpr std::size_t kDatasetHeaderBytes = 28;

std::size_t dataset_file_size(const Dataset& d);

std::vector<std::uint8_t> encode_dataset(const Dataset& d);
Dataset decode_dataset(const std::vector<std::uint8_t>& bytes);

void save_dataset(const std::string& path, const Dataset& d);
Dataset load_dataset(const std::string& path);

/// Builds an [N,C,h,w] batch and matching labels from a crop of each sample.
/// offsets[i] = (y, x) of the crop's top-left corner for samples[indices[i]].
struct Batch {
  Tensor images;
  LabelMap labels;
};
Batch make_batch(const Dataset& d, const std::vector<std::size_t>& indices,
                 const std::vector<std::pair<std::size_t, std::size_t>>& offsets, std::size_t crop_h,
                 std::size_t crop_w);

COOPSEG_NAMESPACE_END
