#pragma once

#include <string>

#include "coopseg/config.hpp"
#include "coopseg/network.hpp"

COOPSEG_NAMESPACE_BEGIN

// Plain-text network description, one entry per line:
//
//   in_channels 3
//   num_classes 4
//   enc1 conv 16 3 1      # name conv out_channels kernel padding
//   pool1 pool 2
//   up1 upsample 2
//   head head 4
//
// '#' starts a comment. Blank lines are ignored.

std::string format_spec(const NetworkSpec& spec);
NetworkSpec parse_spec(const std::string& text);

NetworkSpec load_spec_file(const std::string& path);

COOPSEG_NAMESPACE_END
