#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "coopseg/config.hpp"
#include "coopseg/coop.hpp"

COOPSEG_NAMESPACE_BEGIN

// Model file (little-endian):
//   "CSMD" | u32 version=1 | u32 meta_len | meta (UTF-8 text)
//   | u32 n_tensors | n x { u32 name_len | name | u32 rank | rank x u32 dim }
//   | f32 values of every tensor, in index order
//
// The meta text is the network spec followed by the scheme:
//   method same / taps a,b / target x / detach 0|1 / seed_top s / seed_bottom s
// Tensor names are "<top|bottom>.<block>.<weight|bias>".

inline constexpr std::uint32_t kModelVersion = 1;

std::string format_scheme(const ConnectionScheme& scheme);

std::vector<std::uint8_t> encode_model(const CoopModel& model);
CoopModel decode_model(const std::vector<std::uint8_t>& bytes);

void save_model(const std::string& path, const CoopModel& model);
CoopModel load_model(const std::string& path);

COOPSEG_NAMESPACE_END
