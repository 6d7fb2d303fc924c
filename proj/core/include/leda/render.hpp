#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "leda/field.hpp"

namespace leda {

struct RgbImage {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> rgb;  // row-major, 3 bytes per pixel

  std::array<std::uint8_t, 3> pixel(int r, int c) const {
    const std::size_t i = (static_cast<std::size_t>(r) * width + c) * 3;
    return {rgb[i], rgb[i + 1], rgb[i + 2]};
  }
};

/// Log-det map on a diverging scale symmetric about 0 with range
/// +-max|value|: red for contraction, blue for expansion, white at 0.
/// Folded (NaN) pixels are black.
RgbImage logdet_image(const DeformationField& f);
/// Grid lines every `line_every` pixels, warped by f.
RgbImage grid_image(const DeformationField& f, int line_every);
ScalarField grid_lines(Grid2 grid, int line_every);

std::vector<std::uint8_t> encode_ppm(const RgbImage& img);
RgbImage decode_ppm(std::span<const std::uint8_t> bytes);
void write_ppm(const std::filesystem::path& path, const RgbImage& img);
RgbImage read_ppm(const std::filesystem::path& path);

void render_logdet_ppm(const std::filesystem::path& path, const DeformationField& f);
void render_grid_ppm(const std::filesystem::path& path, const DeformationField& f, int line_every = 4);

}  // namespace leda
