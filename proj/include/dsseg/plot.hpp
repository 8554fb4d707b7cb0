#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dsseg/trainer.hpp"

namespace dsseg {

// RGB raster, row-major, 3 bytes per pixel.
struct Image {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> rgb;
};

// Line chart of the teacher validation Dice recorded in a training log, with the y axis fixed to [0, 1].
// Throws ValidationError if the log holds no validation entries.
Image render_val_dice(const std::vector<TrainLogRow>& rows, int width = 640, int height = 400);

void write_png(const Image& img, const std::filesystem::path& path);

}  // namespace dsseg
