#pragma once

// PNG output for frame previews.

#include "previts/video.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace previts {

// 8-bit RGB, row-major, `rgb.size() == h * w * 3`. Throws std::runtime_error on failure.
void write_png(const std::filesystem::path& path, int h, int w, const std::vector<std::uint8_t>& rgb);

// One <prefix>_<k>.png per frame; returns the paths.
std::vector<std::filesystem::path> write_frames_png(const FrameVolume& video, const std::filesystem::path& dir,
                                                    const std::string& prefix);

}  // namespace previts
