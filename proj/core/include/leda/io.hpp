#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "leda/field.hpp"
#include "leda/model.hpp"

namespace leda {

enum class Dtype : std::uint8_t { F32 = 0, F64 = 1 };

// LEDF: "LEDF", u32 version (1), u32 H, u32 W, u32 channels (2), u8 dtype,
// then H*W*2 little-endian values in (row, col, component) order.
constexpr std::uint32_t kLedfVersion = 1;
constexpr std::uint32_t kMaxDim = 1u << 15;

std::vector<std::uint8_t> encode_field(const VectorField& f, Dtype dtype = Dtype::F64);
VectorField decode_field(std::span<const std::uint8_t> bytes);
void field_write(const std::filesystem::path& path, const VectorField& f, Dtype dtype = Dtype::F64);
VectorField field_read(const std::filesystem::path& path);

// LEDM: "LEDM", u32 header length, JSON header {format, version, grid,
// config, dtype, tensors: [{name, shape}]}, then f64 payloads in header order.
void checkpoint_save(const std::filesystem::path& path, const LedaModel& model);
LedaModel checkpoint_load(const std::filesystem::path& path);
/// Throws ConfigMismatch when the stored grid differs from `expected`.
LedaModel checkpoint_load(const std::filesystem::path& path, Grid2 expected);

struct ManifestRecord {
  int pair_id = 0;
  std::string path_fwd;
  std::string path_bwd;
  std::optional<std::string> path_gt_velocity;
  std::map<std::string, double> covariates;
  std::vector<double> factor_coeffs;

  friend bool operator==(const ManifestRecord&, const ManifestRecord&) = default;
};

/// Paths are relative to the manifest's directory.
struct DatasetManifest {
  int version = 1;
  Grid2 grid{};
  std::uint64_t seed = 0;
  std::vector<ManifestRecord> records;

  friend bool operator==(const DatasetManifest&, const DatasetManifest&) = default;
};

std::string manifest_to_json(const DatasetManifest& m);
DatasetManifest manifest_from_json(const std::string& text);
void manifest_write(const std::filesystem::path& path, const DatasetManifest& m);
/// Parses the manifest and checks that every referenced file exists and is
/// a field on the manifest grid.
DatasetManifest manifest_read(const std::filesystem::path& path, bool check_files = true);

struct LoadedPair {
  ManifestRecord record;
  FieldPair fields;
  std::optional<VectorField> velocity;
};

/// Loads records [first, first + count) of the manifest in `dir`.
std::vector<LoadedPair> load_pairs(const std::filesystem::path& dir, const DatasetManifest& m, std::size_t first = 0,
                                   std::size_t count = static_cast<std::size_t>(-1));

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace leda
