#pragma once

// Conversions between the (H, W, 2) interleaved field layout and the
// [B, 2, H, W] planar tensor layout used by the network.

#include <span>

#include "leda/autodiff.hpp"
#include "leda/field.hpp"

namespace leda::detail {

inline void write_planar(const VectorField& f, double* dst) {
  const std::size_t plane = f.grid().pixels();
  auto src = f.data();
  for (std::size_t p = 0; p < plane; ++p) {
    dst[p] = src[2 * p];
    dst[plane + p] = src[2 * p + 1];
  }
}

inline void read_planar(const double* src, VectorField& f) {
  const std::size_t plane = f.grid().pixels();
  auto dst = f.data();
  for (std::size_t p = 0; p < plane; ++p) {
    dst[2 * p] = src[p];
    dst[2 * p + 1] = src[plane + p];
  }
}

inline ad::Tensor to_planar(std::span<const VectorField* const> fields) {
  const Grid2& g = fields.front()->grid();
  ad::Tensor t({static_cast<int>(fields.size()), 2, g.height, g.width});
  for (std::size_t b = 0; b < fields.size(); ++b) write_planar(*fields[b], t.data().data() + b * 2 * g.pixels());
  return t;
}

inline ad::Tensor to_planar(const VectorField& f) {
  const VectorField* p = &f;
  return to_planar(std::span<const VectorField* const>(&p, 1));
}

inline VectorField field_from_planar(const ad::Tensor& t, int batch_index, Grid2 grid) {
  VectorField f(grid);
  read_planar(t.data().data() + static_cast<std::size_t>(batch_index) * 2 * grid.pixels(), f);
  return f;
}

}  // namespace leda::detail
