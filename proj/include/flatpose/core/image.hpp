#pragma once

#include "flatpose/core/error.hpp"

#include <png.h>

#include <algorithm>
#include <csetjmp>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

namespace flatpose {

/// Row-major single-channel image.
template <typename T>
struct Image {
    int width = 0;
    int height = 0;
    std::vector<T> data;

    Image() = default;
    Image(int w, int h, T fill = T{}) : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill) {}

    T& at(int x, int y) { return data[static_cast<std::size_t>(y) * width + x]; }
    const T& at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x]; }
    std::size_t size() const { return data.size(); }
    bool same_shape(const auto& other) const { return width == other.width && height == other.height; }

    bool operator==(const Image&) const = default;
};

using Gray8 = Image<std::uint8_t>;
using Gray16 = Image<std::uint16_t>;

namespace detail {

struct PngIo {
    std::vector<std::uint8_t>* out = nullptr;
    const std::uint8_t* in = nullptr;
    std::size_t in_size = 0;
    std::size_t in_pos = 0;
    char message[256] = {0};
};

inline void png_on_error(png_structp png, png_const_charp msg) {
    auto* io = static_cast<PngIo*>(png_get_error_ptr(png));
    std::snprintf(io->message, sizeof io->message, "%s", msg);
    png_longjmp(png, 1);
}

inline void png_on_warning(png_structp, png_const_charp) {}

inline void png_write_cb(png_structp png, png_bytep data, png_size_t length) {
    auto* io = static_cast<PngIo*>(png_get_io_ptr(png));
    io->out->insert(io->out->end(), data, data + length);
}

inline void png_flush_cb(png_structp) {}

inline void png_read_cb(png_structp png, png_bytep out, png_size_t length) {
    auto* io = static_cast<PngIo*>(png_get_io_ptr(png));
    if (io->in_pos + length > io->in_size) png_error(png, "truncated PNG stream");
    std::copy_n(io->in + io->in_pos, length, out);
    io->in_pos += length;
}

// The two *_rows functions hold only trivially destructible locals so the
// longjmp taken on a libpng error skips no destructors.
inline bool png_write_rows(png_structp png, png_infop info, PngIo* io, int w, int h, int depth, const std::uint8_t* pixels) {
    if (setjmp(png_jmpbuf(png))) return false;
    png_set_write_fn(png, io, png_write_cb, png_flush_cb);
    png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), depth, PNG_COLOR_TYPE_GRAY,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_set_compression_level(png, 6);
    png_write_info(png, info);
    if (depth == 16) png_set_swap(png);  // PNG stores 16-bit big-endian
    const std::size_t stride = static_cast<std::size_t>(w) * (depth / 8);
    for (int y = 0; y < h; ++y) png_write_row(png, const_cast<png_bytep>(pixels + stride * static_cast<std::size_t>(y)));
    png_write_end(png, nullptr);
    return true;
}

struct PngHeader {
    int width = 0;
    int height = 0;
    int depth = 0;
    int channels = 0;
};

inline bool png_read_header(png_structp png, png_infop info, PngIo* io, PngHeader* hdr) {
    if (setjmp(png_jmpbuf(png))) return false;
    png_set_read_fn(png, io, png_read_cb);
    png_read_info(png, info);
    const int color = png_get_color_type(png, info);
    const int depth = png_get_bit_depth(png, info);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
    if (color == PNG_COLOR_TYPE_RGB || color == PNG_COLOR_TYPE_RGB_ALPHA || color == PNG_COLOR_TYPE_PALETTE)
        png_set_rgb_to_gray_fixed(png, 1, -1, -1);
    if (depth == 16) png_set_swap(png);
    png_read_update_info(png, info);
    hdr->width = static_cast<int>(png_get_image_width(png, info));
    hdr->height = static_cast<int>(png_get_image_height(png, info));
    hdr->depth = png_get_bit_depth(png, info);
    hdr->channels = png_get_channels(png, info);
    return true;
}

inline bool png_read_rows(png_structp png, png_infop info, int h, std::size_t stride, std::uint8_t* pixels) {
    if (setjmp(png_jmpbuf(png))) return false;
    for (int y = 0; y < h; ++y) png_read_row(png, pixels + stride * static_cast<std::size_t>(y), nullptr);
    png_read_end(png, info);
    return true;
}

template <typename T>
std::vector<std::uint8_t> encode_gray_png(const Image<T>& img) {
    static_assert(sizeof(T) == 1 || sizeof(T) == 2);
    if (img.width <= 0 || img.height <= 0) throw IoError("png: empty image");
    PngIo io;
    std::vector<std::uint8_t> bytes;
    io.out = &bytes;
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &io, png_on_error, png_on_warning);
    if (!png) throw IoError("png: cannot create write struct");
    png_infop info = png_create_info_struct(png);
    const bool ok = info && png_write_rows(png, info, &io, img.width, img.height, static_cast<int>(sizeof(T) * 8),
                                           reinterpret_cast<const std::uint8_t*>(img.data.data()));
    png_destroy_write_struct(&png, &info);
    if (!ok) throw IoError(std::string("png: ") + io.message);
    return bytes;
}

}  // namespace detail

inline std::vector<std::uint8_t> encode_png(const Gray8& img) { return detail::encode_gray_png(img); }
inline std::vector<std::uint8_t> encode_png(const Gray16& img) { return detail::encode_gray_png(img); }

/// Decoded grayscale PNG; exactly one of the two images is populated.
struct DecodedPng {
    int bit_depth = 0;
    Gray8 gray8;
    Gray16 gray16;
};

/// Decodes any PNG to single-channel 8- or 16-bit. Colour inputs are
/// converted to luminance, palettes expanded, alpha dropped.
inline DecodedPng decode_png(const std::uint8_t* data, std::size_t size) {
    if (size < 8 || png_sig_cmp(data, 0, 8) != 0) throw IoError("png: bad signature");
    detail::PngIo io;
    io.in = data;
    io.in_size = size;
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &io, detail::png_on_error, detail::png_on_warning);
    if (!png) throw IoError("png: cannot create read struct");
    png_infop info = png_create_info_struct(png);
    detail::PngHeader hdr;
    DecodedPng out;
    bool ok = info && detail::png_read_header(png, info, &io, &hdr);
    if (ok && hdr.channels != 1) {
        std::snprintf(io.message, sizeof io.message, "could not reduce to one channel");
        ok = false;
    }
    if (ok) {
        out.bit_depth = hdr.depth;
        std::uint8_t* pixels;
        if (hdr.depth == 16) {
            out.gray16 = Gray16(hdr.width, hdr.height);
            pixels = reinterpret_cast<std::uint8_t*>(out.gray16.data.data());
        } else {
            out.gray8 = Gray8(hdr.width, hdr.height);
            pixels = out.gray8.data.data();
        }
        ok = detail::png_read_rows(png, info, hdr.height, static_cast<std::size_t>(hdr.width) * (hdr.depth / 8), pixels);
    }
    png_destroy_read_struct(&png, &info, nullptr);
    if (!ok) throw IoError(std::string("png: ") + io.message);
    return out;
}

inline void write_file_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
    std::unique_ptr<std::FILE, int (*)(std::FILE*)> f(std::fopen(path.string().c_str(), "wb"), &std::fclose);
    if (!f) throw IoError("cannot open for writing: " + path.string());
    if (!bytes.empty() && std::fwrite(bytes.data(), 1, bytes.size(), f.get()) != bytes.size())
        throw IoError("short write: " + path.string());
}

inline std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
    std::unique_ptr<std::FILE, int (*)(std::FILE*)> f(std::fopen(path.string().c_str(), "rb"), &std::fclose);
    if (!f) throw IoError("cannot open for reading: " + path.string());
    std::vector<std::uint8_t> bytes;
    std::uint8_t chunk[65536];
    std::size_t n;
    while ((n = std::fread(chunk, 1, sizeof chunk, f.get())) > 0) bytes.insert(bytes.end(), chunk, chunk + n);
    return bytes;
}

inline std::string read_text_file(const std::filesystem::path& path) {
    auto bytes = read_file_bytes(path);
    return {bytes.begin(), bytes.end()};
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
    write_file_bytes(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

inline void write_png(const std::filesystem::path& path, const Gray8& img) { write_file_bytes(path, encode_png(img)); }
inline void write_png(const std::filesystem::path& path, const Gray16& img) { write_file_bytes(path, encode_png(img)); }

inline DecodedPng read_png(const std::filesystem::path& path) {
    auto bytes = read_file_bytes(path);
    return decode_png(bytes.data(), bytes.size());
}

}  // namespace flatpose
