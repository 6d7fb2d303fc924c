#include "leda/render.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <string>

namespace leda {

namespace {

std::uint8_t to_byte(double x) { return static_cast<std::uint8_t>(std::lround(std::clamp(x, 0.0, 1.0) * 255.0)); }

}  // namespace

RgbImage logdet_image(const DeformationField& f) {
  const ScalarField ld = jacobian_logdet(f);
  const Grid2& g = f.grid();
  double range = 0.0;
  for (double x : ld.data())
    if (std::isfinite(x)) range = std::max(range, std::abs(x));

  RgbImage img{g.height, g.width, std::vector<std::uint8_t>(g.pixels() * 3)};
  for (std::size_t i = 0; i < g.pixels(); ++i) {
    const double x = ld.data()[i];
    std::uint8_t* px = img.rgb.data() + 3 * i;
    if (!std::isfinite(x)) {
      px[0] = px[1] = px[2] = 0;
      continue;
    }
    const double t = range > 0.0 ? x / range : 0.0;  // in [-1, 1]
    if (t < 0.0) {
      px[0] = 255;
      px[1] = px[2] = to_byte(1.0 + t);
    } else {
      px[2] = 255;
      px[0] = px[1] = to_byte(1.0 - t);
    }
  }
  return img;
}

ScalarField grid_lines(Grid2 grid, int line_every) {
  if (line_every < 2) throw InvalidArgument("grid lines need line_every >= 2");
  ScalarField img(grid, 1.0);
  for (int r = 0; r < grid.height; ++r)
    for (int c = 0; c < grid.width; ++c)
      if (r % line_every == 0 || c % line_every == 0) img.at(r, c) = 0.0;
  return img;
}

RgbImage grid_image(const DeformationField& f, int line_every) {
  const ScalarField warped = warp_image(grid_lines(f.grid(), line_every), f);
  const Grid2& g = f.grid();
  RgbImage img{g.height, g.width, std::vector<std::uint8_t>(g.pixels() * 3)};
  for (std::size_t i = 0; i < g.pixels(); ++i) {
    const std::uint8_t v = to_byte(warped.data()[i]);
    img.rgb[3 * i] = img.rgb[3 * i + 1] = img.rgb[3 * i + 2] = v;
  }
  return img;
}

std::vector<std::uint8_t> encode_ppm(const RgbImage& img) {
  const std::string header = "P6\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), img.rgb.begin(), img.rgb.end());
  return out;
}

RgbImage decode_ppm(std::span<const std::uint8_t> bytes) {
  using K = FormatError::Kind;
  std::size_t pos = 0;
  auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto read_int = [&] {
    skip_space();
    if (pos >= bytes.size() || !std::isdigit(bytes[pos])) throw FormatError(K::BadHeader, "PPM header malformed");
    long v = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) {
      v = v * 10 + (bytes[pos++] - '0');
      if (v > 1 << 20) throw FormatError(K::DimOverflow, "PPM dimension too large");
    }
    return static_cast<int>(v);
  };
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '6') throw FormatError(K::BadMagic, "not a P6 image");
  pos = 2;
  RgbImage img;
  img.width = read_int();
  img.height = read_int();
  const int maxval = read_int();
  if (maxval != 255) throw FormatError(K::BadHeader, "PPM maxval must be 255");
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) throw FormatError(K::BadHeader, "PPM header malformed");
  ++pos;
  const std::size_t n = static_cast<std::size_t>(img.width) * img.height * 3;
  if (bytes.size() - pos < n) throw FormatError(K::Truncated, "PPM pixel data truncated");
  img.rgb.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos), bytes.begin() + static_cast<std::ptrdiff_t>(pos + n));
  return img;
}

void write_ppm(const std::filesystem::path& path, const RgbImage& img) {
  const auto bytes = encode_ppm(img);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError(FormatError::Kind::Io, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

RgbImage read_ppm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(FormatError::Kind::Io, "cannot open " + path.string());
  const std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return decode_ppm(bytes);
}

void render_logdet_ppm(const std::filesystem::path& path, const DeformationField& f) { write_ppm(path, logdet_image(f)); }

void render_grid_ppm(const std::filesystem::path& path, const DeformationField& f, int line_every) {
  write_ppm(path, grid_image(f, line_every));
}

}  // namespace leda
