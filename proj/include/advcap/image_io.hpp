#pragma once

#include "advcap/tensor.hpp"

#include <filesystem>

namespace advcap {

// Decodes any format OpenCV understands into RGB (or single-channel gray)
// values in [0, 1]. Alpha is dropped. Throws IoError when undecodable.
Image read_image(const std::filesystem::path& path);

// Writes an 8-bit PNG (1 or 3 channels); values are clamped and rounded.
void write_png(const std::filesystem::path& path, const Image& image);

// Gray images are replicated to three channels; RGB passes through.
Image to_rgb(const Image& image);

// Bilinear resampling with half-pixel centres and edge clamping.
Image resize_bilinear(const Image& image, int height, int width);

// Lossless float64 image container: "ADVIMG01", u32 C, H, W, raw values.
void write_tensor_image(const std::filesystem::path& path, const Image& image);
Image read_tensor_image(const std::filesystem::path& path);

}  // namespace advcap
