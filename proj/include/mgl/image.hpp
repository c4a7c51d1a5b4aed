#pragma once

// 8-bit raster images with netpbm I/O. PNG goes through libpng when the
// build defines MGL_HAVE_PNG.

#include <cctype>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#ifdef MGL_HAVE_PNG
#include <png.h>
#endif

#include "mgl/error.hpp"

namespace mgl {

// Interleaved row-major pixels, channels in R, G, B order.
struct Image {
    int width = 0;
    int height = 0;
    int channels = 3;
    std::vector<std::uint8_t> pixels;

    Image() = default;
    Image(int w, int h, int c) : width(w), height(h), channels(c), pixels(static_cast<std::size_t>(w) * h * c, 0) {}

    std::uint8_t at(int x, int y, int c) const {
        return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    std::uint8_t& at(int x, int y, int c) {
        return pixels[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }

    void validate() const {
        if (width < 1 || height < 1) throw DataError("image has no pixels");
        if (channels != 1 && channels != 3) throw DataError("image must have 1 or 3 channels");
        if (pixels.size() != static_cast<std::size_t>(width) * height * channels)
            throw DataError("image pixel buffer has the wrong size");
    }
};

namespace detail {
inline int read_pnm_int(std::istream& in, const std::string& path) {
    int ch = in.get();
    while (ch != EOF) {
        if (ch == '#') {
            while (ch != EOF && ch != '\n') ch = in.get();
        } else if (!std::isspace(ch)) {
            break;
        }
        ch = in.get();
    }
    if (ch == EOF || !std::isdigit(ch))
        throw DataError(path + ": malformed netpbm header at offset " + std::to_string(static_cast<long long>(in.tellg())));
    int value = 0;
    while (ch != EOF && std::isdigit(ch)) {
        value = value * 10 + (ch - '0');
        ch = in.get();
    }
    return value; // the single whitespace after the number is consumed
}
} // namespace detail

// Reads binary PPM (P6) and PGM (P5) with maxval <= 255.
inline Image read_ppm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    char magic[2];
    if (!in.read(magic, 2) || magic[0] != 'P' || (magic[1] != '6' && magic[1] != '5'))
        throw DataError(path.string() + ": not a binary PPM/PGM file (offset 0)");
    const int channels = magic[1] == '6' ? 3 : 1;
    const int w = detail::read_pnm_int(in, path.string());
    const int h = detail::read_pnm_int(in, path.string());
    const int maxval = detail::read_pnm_int(in, path.string());
    if (w < 1 || h < 1 || maxval < 1 || maxval > 255)
        throw DataError(path.string() + ": unsupported netpbm dimensions or maxval");
    Image img(w, h, channels);
    if (!in.read(reinterpret_cast<char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size())))
        throw DataError(path.string() + ": truncated pixel data");
    if (maxval != 255)
        for (auto& p : img.pixels) p = static_cast<std::uint8_t>((p * 255 + maxval / 2) / maxval);
    return img;
}

// Writes P6 (3 channels) or P5 (1 channel).
inline void write_ppm(const Image& img, const std::filesystem::path& path) {
    img.validate();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open " + path.string() + " for writing");
    out << (img.channels == 3 ? "P6" : "P5") << '\n' << img.width << ' ' << img.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.pixels.data()), static_cast<std::streamsize>(img.pixels.size()));
    if (!out) throw DataError("write failed for " + path.string());
}

#ifdef MGL_HAVE_PNG
// Any PNG flavour, converted to 8-bit gray or RGB (alpha dropped).
inline Image read_png(const std::filesystem::path& path) {
    png_image png{};
    png.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&png, path.string().c_str()))
        throw DataError(path.string() + ": " + png.message);
    const bool gray = (png.format & PNG_FORMAT_FLAG_COLOR) == 0;
    png.format = gray ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
    Image img(static_cast<int>(png.width), static_cast<int>(png.height), gray ? 1 : 3);
    if (!png_image_finish_read(&png, nullptr, img.pixels.data(), 0, nullptr)) {
        std::string msg = png.message;
        png_image_free(&png);
        throw DataError(path.string() + ": " + msg);
    }
    return img;
}
#endif

// Dispatches on the file signature.
inline Image read_image(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    unsigned char sig[8] = {};
    in.read(reinterpret_cast<char*>(sig), 8);
    if (sig[0] == 'P' && (sig[1] == '6' || sig[1] == '5')) return read_ppm(path);
    if (sig[0] == 0x89 && sig[1] == 'P' && sig[2] == 'N' && sig[3] == 'G') {
#ifdef MGL_HAVE_PNG
        return read_png(path);
#else
        throw DataError(path.string() + ": PNG support not compiled in; convert to PPM");
#endif
    }
    throw DataError(path.string() + ": unrecognized image format");
}

} // namespace mgl
