#pragma once

#include <string>

#include "ldt/tensor.hpp"

namespace ldt {

// Supported on-disk formats: PNG (8/16-bit, grayscale and RGB) and binary
// PGM/PPM (P5/P6). Decoded samples are mapped to [0,1] by v / (2^bits - 1);
// encoding quantizes by round-half-up of v * (2^bits - 1). Scanline order is
// row-major top-to-bottom, matching tensor (h, w) order.

// Loads as (1, H, W, C) with C = 1 or 3.
Tensor load_image(const std::string& path);

// Saves a (1, H, W, 1|3) tensor with values in [0,1]; out-of-range values are
// a domain error (callers clamp explicitly). Format follows the file
// extension: .png, .pgm (1 channel), .ppm (3 channels). bit_depth is 8 or 16;
// PNM files are always 8-bit. Encoder settings are fixed, so identical
// tensors produce byte-identical files.
void save_image(const Tensor& image, const std::string& path, int bit_depth);

}  // namespace ldt
