#pragma once

#include <string>
#include <vector>

#include "fade/tensor.hpp"

namespace fade {

// RGB image with values in [0,1], row-major (y, x, channel).
struct Image {
    int height = 0, width = 0;
    std::vector<double> px;

    Image() = default;
    Image(int h, int w) : height(h), width(w), px(static_cast<std::size_t>(h) * w * 3, 0.0) {}

    double& at(int y, int x, int c) { return px[(static_cast<std::size_t>(y) * width + x) * 3 + c]; }
    double at(int y, int x, int c) const {
        return px[(static_cast<std::size_t>(y) * width + x) * 3 + c];
    }

    Tensor to_tensor() const { return Tensor({height, width, 3}, px); }
    static Image from_tensor(const Tensor& t);
};

// Codec picked by extension: .png or .ppm (ASCII P3). 8-bit quantization.
Image load_image(const std::string& path);
void save_image(const Image& img, const std::string& path);

// whole-file atomic text write (temp + rename)
void write_file_atomic(const std::string& path, const std::string& contents);
std::string read_file(const std::string& path);

}  // namespace fade
