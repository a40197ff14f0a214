// Binary netpbm codecs (PGM P5, PPM P6, maxval 255). Color images are
// converted to BT.601 full-range YCbCr on read; the Y plane feeds the
// network and the chroma planes are kept for recombination. All writes
// are atomic (temp file + rename).
#pragma once

#include <string>

#include "s4f/tensor.hpp"

namespace s4f {

enum class ColorSpace { gray, ycbcr };

struct Image {
    ColorSpace colorspace = ColorSpace::gray;
    Tensor y;   // [H,W] in [0,1]
    Tensor cb;  // empty for gray
    Tensor cr;  // empty for gray
};

Image read_image(const std::string& path);

// P5 when no chroma is supplied, P6 otherwise. Values are clamped to
// [0,1] and quantized round-half-up.
void write_image(const std::string& path, const Tensor& y,
                 const Tensor* cb = nullptr, const Tensor* cr = nullptr);

// Writes content to a temp file in the same directory, then renames.
void atomic_write_file(const std::string& path, const std::string& content);

std::string read_file(const std::string& path);

}  // namespace s4f
