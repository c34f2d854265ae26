#include "previts/image_io.hpp"

#include <png.h>

#include <cstdio>
#include <memory>
#include <stdexcept>

namespace previts {

void write_png(const std::filesystem::path& path, int h, int w, const std::vector<std::uint8_t>& rgb) {
    if (h <= 0 || w <= 0 || rgb.size() != static_cast<std::size_t>(h) * w * 3) {
        throw std::invalid_argument("write_png: pixel buffer does not match " + std::to_string(h) + "x" +
                                    std::to_string(w));
    }
    std::unique_ptr<FILE, int (*)(FILE*)> file(std::fopen(path.c_str(), "wb"), &std::fclose);
    if (!file) throw std::runtime_error("cannot open " + path.string());
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw std::runtime_error("libpng initialisation failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw std::runtime_error("libpng failed writing " + path.string());
    }
    png_init_io(png, file.get());
    png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), 8, PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < h; ++y) {
        png_write_row(png, const_cast<png_bytep>(rgb.data() + static_cast<std::size_t>(y) * w * 3));
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

std::vector<std::filesystem::path> write_frames_png(const FrameVolume& video, const std::filesystem::path& dir,
                                                    const std::string& prefix) {
    std::filesystem::create_directories(dir);
    std::vector<std::filesystem::path> out;
    for (int k = 0; k < video.t; ++k) {
        char name[16];
        std::snprintf(name, sizeof name, "_%03d.png", k);
        out.push_back(dir / (prefix + name));
        write_png(out.back(), video.h, video.w, to_rgb8(video, k));
    }
    return out;
}

}  // namespace previts
