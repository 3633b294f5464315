#include "fade/image.hpp"

#include <png.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "fade/common.hpp"

namespace fade {

Image Image::from_tensor(const Tensor& t) {
    if (t.rank() != 3 || t.dim(2) != 3)
        throw DataError("image tensor must be (H,W,3), got " + shape_str(t.shape));
    Image img(t.dim(0), t.dim(1));
    img.px = t.data;
    return img;
}

namespace {

int quantize(double v) {
    double c = std::min(std::max(v, 0.0), 1.0);
    return static_cast<int>(std::lround(c * 255.0));
}

bool ends_with(const std::string& s, const std::string& suffix) {
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

// ---- ASCII PPM (P3) ----

void save_ppm(const Image& img, const std::string& path) {
    std::ostringstream out;
    out << "P3\n" << img.width << " " << img.height << "\n255\n";
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            out << quantize(img.at(y, x, 0)) << " " << quantize(img.at(y, x, 1)) << " "
                << quantize(img.at(y, x, 2));
            out << (x + 1 == img.width ? "\n" : " ");
        }
    }
    write_file_atomic(path, out.str());
}

Image load_ppm(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open image file " + path);
    std::string magic;
    in >> magic;
    if (magic != "P3") throw DataError(path + ": not an ASCII PPM (expected P3 header)");
    int w = 0, h = 0, maxval = 0;
    in >> w >> h >> maxval;
    if (!in || w <= 0 || h <= 0 || maxval <= 0)
        throw DataError(path + ": corrupt PPM header");
    Image img(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c) {
                int v = 0;
                in >> v;
                if (!in) throw DataError(path + ": truncated PPM pixel data");
                img.at(y, x, c) = double(v) / double(maxval);
            }
    return img;
}

// ---- PNG (8-bit RGB via libpng) ----

struct PngReadCloser {
    png_structp png = nullptr;
    png_infop info = nullptr;
    FILE* fp = nullptr;
    ~PngReadCloser() {
        if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
        if (fp) std::fclose(fp);
    }
};

struct PngWriteCloser {
    png_structp png = nullptr;
    png_infop info = nullptr;
    FILE* fp = nullptr;
    ~PngWriteCloser() {
        if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
        if (fp) std::fclose(fp);
    }
};

Image load_png(const std::string& path) {
    PngReadCloser ctx;
    ctx.fp = std::fopen(path.c_str(), "rb");
    if (!ctx.fp) throw DataError("cannot open image file " + path);

    unsigned char header[8];
    if (std::fread(header, 1, 8, ctx.fp) != 8 || png_sig_cmp(header, 0, 8))
        throw DataError(path + ": corrupt PNG header");

    ctx.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    ctx.info = png_create_info_struct(ctx.png);
    if (!ctx.png || !ctx.info) throw DataError(path + ": libpng initialization failed");
    if (setjmp(png_jmpbuf(ctx.png))) throw DataError(path + ": PNG decode error");

    png_init_io(ctx.png, ctx.fp);
    png_set_sig_bytes(ctx.png, 8);
    png_read_info(ctx.png, ctx.info);

    png_uint_32 w = png_get_image_width(ctx.png, ctx.info);
    png_uint_32 h = png_get_image_height(ctx.png, ctx.info);
    int bit_depth = png_get_bit_depth(ctx.png, ctx.info);
    int color_type = png_get_color_type(ctx.png, ctx.info);

    if (bit_depth == 16) png_set_strip_16(ctx.png);
    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(ctx.png);
    if (color_type == PNG_COLOR_TYPE_GRAY || color_type == PNG_COLOR_TYPE_GRAY_ALPHA)
        png_set_gray_to_rgb(ctx.png);
    if (png_get_valid(ctx.png, ctx.info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(ctx.png);
    png_set_strip_alpha(ctx.png);
    png_read_update_info(ctx.png, ctx.info);

    Image img(static_cast<int>(h), static_cast<int>(w));
    std::vector<unsigned char> row(static_cast<std::size_t>(w) * 3);
    for (png_uint_32 y = 0; y < h; ++y) {
        png_read_row(ctx.png, row.data(), nullptr);
        for (png_uint_32 x = 0; x < w; ++x)
            for (int c = 0; c < 3; ++c)
                img.at(static_cast<int>(y), static_cast<int>(x), c) =
                    double(row[static_cast<std::size_t>(x) * 3 + c]) / 255.0;
    }
    return img;
}

void save_png(const Image& img, const std::string& path) {
    std::string tmp = path + ".tmp";
    {
        PngWriteCloser ctx;
        ctx.fp = std::fopen(tmp.c_str(), "wb");
        if (!ctx.fp) throw DataError("cannot write image file " + tmp);
        ctx.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
        ctx.info = png_create_info_struct(ctx.png);
        if (!ctx.png || !ctx.info) throw DataError(path + ": libpng initialization failed");
        if (setjmp(png_jmpbuf(ctx.png))) throw DataError(path + ": PNG encode error");

        png_init_io(ctx.png, ctx.fp);
        png_set_IHDR(ctx.png, ctx.info, static_cast<png_uint_32>(img.width),
                     static_cast<png_uint_32>(img.height), 8, PNG_COLOR_TYPE_RGB,
                     PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
        png_write_info(ctx.png, ctx.info);

        std::vector<unsigned char> row(static_cast<std::size_t>(img.width) * 3);
        for (int y = 0; y < img.height; ++y) {
            for (int x = 0; x < img.width; ++x)
                for (int c = 0; c < 3; ++c)
                    row[static_cast<std::size_t>(x) * 3 + c] =
                        static_cast<unsigned char>(quantize(img.at(y, x, c)));
            png_write_row(ctx.png, row.data());
        }
        png_write_end(ctx.png, nullptr);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw DataError("cannot finalize image file " + path);
}

}  // namespace

Image load_image(const std::string& path) {
    if (ends_with(path, ".ppm")) return load_ppm(path);
    if (ends_with(path, ".png")) return load_png(path);
    throw DataError("unsupported image extension (want .png or .ppm): " + path);
}

void save_image(const Image& img, const std::string& path) {
    if (img.height <= 0 || img.width <= 0) throw DataError("cannot save empty image " + path);
    if (ends_with(path, ".ppm")) {
        save_ppm(img, path);
        return;
    }
    if (ends_with(path, ".png")) {
        save_png(img, path);
        return;
    }
    throw DataError("unsupported image extension (want .png or .ppm): " + path);
}

void write_file_atomic(const std::string& path, const std::string& contents) {
    std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot write file " + tmp);
        out << contents;
        if (!out) throw DataError("short write to " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw DataError("cannot finalize file " + path);
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open file " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace fade
