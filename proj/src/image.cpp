#include "degbench/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>

#include "degbench/error.hpp"

namespace degbench {

Image Image::filled(int h, int w, double r, double g, double b) {
    Image img(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            img.at(y, x, 0) = r;
            img.at(y, x, 1) = g;
            img.at(y, x, 2) = b;
        }
    return img;
}

void clip_pixels(Image& img) {
    for (auto& v : img.pixels) v = std::min(1.0, std::max(0.0, v));
}

Image resize_bilinear(const Image& img, int out_h, int out_w) {
    if (out_h < 1 || out_w < 1) throw UsageError("resize_bilinear: output dims must be positive");
    if (out_h == img.height && out_w == img.width) return img;
    Image out(out_h, out_w);
    const double sy = static_cast<double>(img.height) / out_h;
    const double sx = static_cast<double>(img.width) / out_w;
    for (int y = 0; y < out_h; ++y) {
        const double fy = (y + 0.5) * sy - 0.5;
        const int y0 = std::clamp(static_cast<int>(std::floor(fy)), 0, img.height - 1);
        const int y1 = std::min(y0 + 1, img.height - 1);
        const double wy = std::clamp(fy - y0, 0.0, 1.0);
        for (int x = 0; x < out_w; ++x) {
            const double fx = (x + 0.5) * sx - 0.5;
            const int x0 = std::clamp(static_cast<int>(std::floor(fx)), 0, img.width - 1);
            const int x1 = std::min(x0 + 1, img.width - 1);
            const double wx = std::clamp(fx - x0, 0.0, 1.0);
            for (int c = 0; c < 3; ++c) {
                const double top = img.at(y0, x0, c) * (1.0 - wx) + img.at(y0, x1, c) * wx;
                const double bot = img.at(y1, x0, c) * (1.0 - wx) + img.at(y1, x1, c) * wx;
                out.at(y, x, c) = top * (1.0 - wy) + bot * wy;
            }
        }
    }
    return out;
}

namespace {

uint8_t to_byte(double v) {
    const double scaled = std::round(std::min(1.0, std::max(0.0, v)) * 255.0);
    return static_cast<uint8_t>(scaled);
}

struct FileCloser {
    void operator()(FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

}  // namespace

void write_png(const std::string& path, const Image& img) {
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw DataError("cannot open for writing: " + path);
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw DataError("png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw DataError("png_create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw DataError("libpng error while writing " + path);
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(img.width),
                 static_cast<png_uint_32>(img.height), 8, PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<uint8_t> row(static_cast<size_t>(img.width) * 3);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < 3; ++c)
                row[static_cast<size_t>(x) * 3 + c] = to_byte(img.at(y, x, c));
        png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

Image read_png(const std::string& path) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw DataError("cannot open: " + path);
    uint8_t sig[8];
    if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8))
        throw DataError("not a PNG file: " + path);
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw DataError("png_create_read_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw DataError("png_create_info_struct failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw DataError("libpng error while reading " + path);
    }
    png_init_io(png, fp.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);

    // Normalize anything libpng can hand us to 8-bit RGB.
    png_set_expand(png);
    png_set_strip_16(png);
    png_set_strip_alpha(png);
    png_set_gray_to_rgb(png);
    png_read_update_info(png, info);

    const int width = static_cast<int>(png_get_image_width(png, info));
    const int height = static_cast<int>(png_get_image_height(png, info));
    if (png_get_channels(png, info) != 3) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw DataError("unsupported PNG channel layout: " + path);
    }
    Image img(height, width);
    std::vector<uint8_t> row(static_cast<size_t>(width) * 3);
    for (int y = 0; y < height; ++y) {
        png_read_row(png, row.data(), nullptr);
        for (int x = 0; x < width; ++x)
            for (int c = 0; c < 3; ++c)
                img.at(y, x, c) = static_cast<double>(row[static_cast<size_t>(x) * 3 + c]) / 255.0;
    }
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

void write_ppm(const std::string& path, const Image& img) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open for writing: " + path);
    out << "P6\n" << img.width << " " << img.height << "\n255\n";
    std::vector<uint8_t> row(static_cast<size_t>(img.width) * 3);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x)
            for (int c = 0; c < 3; ++c)
                row[static_cast<size_t>(x) * 3 + c] = to_byte(img.at(y, x, c));
        out.write(reinterpret_cast<const char*>(row.data()), static_cast<std::streamsize>(row.size()));
    }
    if (!out) throw DataError("short write: " + path);
}

Image read_ppm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open: " + path);
    std::string magic;
    in >> magic;
    if (magic != "P6") throw DataError("not a P6 PPM file: " + path);
    auto next_int = [&in, &path] {
        // skip whitespace and '#' comments
        while (true) {
            const int ch = in.peek();
            if (ch == '#') {
                std::string line;
                std::getline(in, line);
            } else if (std::isspace(ch)) {
                in.get();
            } else {
                break;
            }
        }
        int v = -1;
        in >> v;
        if (!in || v < 0) throw DataError("malformed PPM header: " + path);
        return v;
    };
    const int width = next_int();
    const int height = next_int();
    const int maxval = next_int();
    if (maxval != 255) throw DataError("unsupported PPM maxval: " + path);
    in.get();  // single whitespace after header
    Image img(height, width);
    std::vector<uint8_t> row(static_cast<size_t>(width) * 3);
    for (int y = 0; y < height; ++y) {
        in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row.size()));
        if (!in) throw DataError("truncated PPM data: " + path);
        for (int x = 0; x < width; ++x)
            for (int c = 0; c < 3; ++c)
                img.at(y, x, c) = static_cast<double>(row[static_cast<size_t>(x) * 3 + c]) / 255.0;
    }
    return img;
}

Image read_image(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open: " + path);
    uint8_t head[8] = {0};
    in.read(reinterpret_cast<char*>(head), 8);
    in.close();
    static const uint8_t png_sig[8] = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};
    if (std::memcmp(head, png_sig, 8) == 0) return read_png(path);
    if (head[0] == 'P' && head[1] == '6') return read_ppm(path);
    throw DataError("unrecognized image format: " + path);
}

void write_image(const std::string& path, const Image& img) {
    const auto dot = path.find_last_of('.');
    const std::string ext = dot == std::string::npos ? "" : path.substr(dot);
    if (ext == ".png") return write_png(path, img);
    if (ext == ".ppm") return write_ppm(path, img);
    throw UsageError("unsupported image extension (use .png or .ppm): " + path);
}

Tensor image_batch_to_tensor(const std::vector<Image>& batch) {
    if (batch.empty()) throw UsageError("image_batch_to_tensor: empty batch");
    const int h = batch.front().height, w = batch.front().width;
    const int n = static_cast<int>(batch.size());
    std::vector<float> data(static_cast<size_t>(n) * 3 * h * w);
    for (int b = 0; b < n; ++b) {
        const Image& img = batch[static_cast<size_t>(b)];
        if (img.height != h || img.width != w)
            throw UsageError("image_batch_to_tensor: mixed image sizes in batch");
        for (int c = 0; c < 3; ++c)
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x)
                    data[((static_cast<size_t>(b) * 3 + c) * h + y) * w + x] =
                        static_cast<float>(img.at(y, x, c));
    }
    return Tensor::from_data({n, 3, h, w}, std::move(data));
}

Tensor image_to_tensor(const Image& img) { return image_batch_to_tensor({img}); }

Image tensor_to_image(const Tensor& t, int batch_index) {
    if (t.rank() != 4 || t.dim(1) != 3)
        throw UsageError("tensor_to_image: expected [N,3,H,W], got " + shape_str(t.shape()));
    const int h = t.dim(2), w = t.dim(3);
    Image img(h, w);
    const auto& data = t.data();
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                img.at(y, x, c) =
                    data[((static_cast<size_t>(batch_index) * 3 + c) * h + y) * w + x];
    return img;
}

}  // namespace degbench
