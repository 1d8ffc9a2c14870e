#pragma once

#include <string>

#include "mosaic/image.hpp"

namespace mosaic {

// Decodes a PNG or JPEG file (sniffed by magic bytes) into a [0,1] tensor
// with 1 or 3 channels; 8-bit samples map by v/255, palette PNGs expand to
// RGB, 16-bit PNGs reduce to 8. Alpha channels and CMYK are rejected as
// unsupported.
ImageTensor load_image(const std::string& path);

// load_image plus an optional resize to a square of the given side
// (0 = keep original size). Downscales are exact box filters where the side
// divides evenly; everything else is bilinear.
ImageTensor load_and_normalize(const std::string& path, std::size_t resize_side = 0);

// Writes an 8-bit PNG (gray or RGB); values quantized by round(v*255).
void write_png(const std::string& path, const ImageTensor& image);

}  // namespace mosaic
