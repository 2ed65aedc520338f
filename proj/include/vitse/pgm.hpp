#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "vitse/tensor.hpp"

namespace vitse {

// Binary P5 PGM, maxval 255.
void write_pgm(const std::string& path, const std::vector<uint8_t>& pixels, int64_t width, int64_t height);

// Writes a [0,1] image; multi-channel inputs are averaged to gray first.
void write_pgm_image(const std::string& path, const TensorPtr<float>& image);

// Reads into a 1 x H x W tensor scaled to [0,1].
TensorPtr<float> read_pgm(const std::string& path);

}  // namespace vitse
