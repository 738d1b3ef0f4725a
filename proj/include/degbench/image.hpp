#pragma once

#include <string>
#include <vector>

#include "degbench/tensor.hpp"

namespace degbench {

// RGB raster with values in [0,1], interleaved row-major (y, x, channel).
// Double storage keeps the image-quality metrics exact; the tensor side is
// float32 and converts at the boundary.
struct Image {
    int height = 0;
    int width = 0;
    std::vector<double> pixels;  // height * width * 3

    Image() = default;
    Image(int h, int w) : height(h), width(w), pixels(static_cast<size_t>(h) * w * 3, 0.0) {}

    double& at(int y, int x, int c) {
        return pixels[(static_cast<size_t>(y) * width + x) * 3 + static_cast<size_t>(c)];
    }
    double at(int y, int x, int c) const {
        return pixels[(static_cast<size_t>(y) * width + x) * 3 + static_cast<size_t>(c)];
    }

    static Image filled(int h, int w, double r, double g, double b);
    static Image filled_gray(int h, int w, double v) { return filled(h, w, v, v, v); }
};

void clip_pixels(Image& img);

Image resize_bilinear(const Image& img, int out_h, int out_w);

// 8-bit IO with v/255 on read and round(v*255) on write.
void write_png(const std::string& path, const Image& img);
Image read_png(const std::string& path);
void write_ppm(const std::string& path, const Image& img);
Image read_ppm(const std::string& path);

// Dispatch by magic bytes (PNG signature / "P6").
Image read_image(const std::string& path);
// Dispatch by extension (.png / .ppm).
void write_image(const std::string& path, const Image& img);

// Planar [N,3,H,W] batch from interleaved images (all same size).
Tensor image_batch_to_tensor(const std::vector<Image>& batch);
Tensor image_to_tensor(const Image& img);
Image tensor_to_image(const Tensor& t, int batch_index = 0);

}  // namespace degbench
