#pragma once

#include <string>

#include "vamark/core/tensor.hpp"

namespace vamark {

// 8-bit PNG IO. Images are [C,H,W] floats in [0,1]; C is 3 (RGB) or 1 (gray).
Tensor load_image(const std::string& path);
void save_image(const std::string& path, const Tensor& image);

// Binary masks as 8-bit grayscale: 0 = untampered, 255 = tampered.
Tensor load_mask(const std::string& path);               // -> [H,W] of {0,1}
void save_mask(const std::string& path, const Tensor& mask);

float quantize_8bit(float v);
Tensor quantize_8bit(const Tensor& t);

}  // namespace vamark
