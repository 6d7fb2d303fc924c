#include "leda/io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"

namespace leda {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

static_assert(std::endian::native == std::endian::little, "little-endian host required");

constexpr char kLedfMagic[4] = {'L', 'E', 'D', 'F'};
constexpr char kLedmMagic[4] = {'L', 'E', 'D', 'M'};
constexpr std::size_t kLedfHeader = 4 + 4 * 4 + 1;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
         static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}

template <class T>
void put_values(std::vector<std::uint8_t>& out, std::span<const double> values) {
  const std::size_t at = out.size();
  out.resize(at + values.size() * sizeof(T));
  for (std::size_t i = 0; i < values.size(); ++i) {
    const T v = static_cast<T>(values[i]);
    std::memcpy(out.data() + at + i * sizeof(T), &v, sizeof(T));
  }
}

template <class T>
void get_values(const std::uint8_t* p, std::span<double> values) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    T v;
    std::memcpy(&v, p + i * sizeof(T), sizeof(T));
    values[i] = static_cast<double>(v);
  }
}

std::vector<std::uint8_t> read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(FormatError::Kind::Io, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const fs::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError(FormatError::Kind::Io, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError(FormatError::Kind::Io, "short write to " + path.string());
}

}  // namespace

std::vector<std::uint8_t> encode_field(const VectorField& f, Dtype dtype) {
  std::vector<std::uint8_t> out(kLedfMagic, kLedfMagic + 4);
  put_u32(out, kLedfVersion);
  put_u32(out, static_cast<std::uint32_t>(f.grid().height));
  put_u32(out, static_cast<std::uint32_t>(f.grid().width));
  put_u32(out, 2);
  out.push_back(static_cast<std::uint8_t>(dtype));
  if (dtype == Dtype::F32)
    put_values<float>(out, f.data());
  else
    put_values<double>(out, f.data());
  return out;
}

VectorField decode_field(std::span<const std::uint8_t> bytes) {
  using K = FormatError::Kind;
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kLedfMagic, 4) != 0) throw FormatError(K::BadMagic, "not a LEDF file");
  if (bytes.size() < kLedfHeader) throw FormatError(K::Truncated, "LEDF header truncated");
  const std::uint32_t version = get_u32(bytes.data() + 4);
  if (version != kLedfVersion) throw FormatError(K::UnsupportedVersion, "LEDF version " + std::to_string(version));
  const std::uint32_t h = get_u32(bytes.data() + 8), w = get_u32(bytes.data() + 12);
  if (h > kMaxDim || w > kMaxDim) {
    throw FormatError(K::DimOverflow, "LEDF dimensions " + std::to_string(h) + "x" + std::to_string(w) + " too large");
  }
  if (h < 4 || w < 4) throw FormatError(K::BadHeader, "LEDF grid below 4x4");
  if (get_u32(bytes.data() + 16) != 2) throw FormatError(K::BadChannels, "LEDF channels must be 2");
  const std::uint8_t dt = bytes[20];
  if (dt > 1) throw FormatError(K::UnknownDtype, "LEDF dtype " + std::to_string(dt));
  const Grid2 g{static_cast<int>(h), static_cast<int>(w)};
  const std::size_t width = dt == 0 ? 4 : 8;
  const std::size_t need = kLedfHeader + g.pixels() * 2 * width;
  if (bytes.size() < need) throw FormatError(K::Truncated, "LEDF payload truncated");
  if (bytes.size() > need) throw FormatError(K::BadHeader, "LEDF has trailing bytes");
  VectorField f(g);
  if (dt == 0)
    get_values<float>(bytes.data() + kLedfHeader, f.data());
  else
    get_values<double>(bytes.data() + kLedfHeader, f.data());
  return f;
}

void field_write(const fs::path& path, const VectorField& f, Dtype dtype) { write_bytes(path, encode_field(f, dtype)); }

VectorField field_read(const fs::path& path) { return decode_field(read_bytes(path)); }

// ---------------------------------------------------------------------------
// checkpoints

void checkpoint_save(const fs::path& path, const LedaModel& model) {
  const LedaConfig& c = model.config();
  json h;
  h["format"] = "LEDM";
  h["version"] = 1;
  h["grid"] = {model.grid().height, model.grid().width};
  h["dtype"] = "f64";
  h["config"] = {{"latent_dim", c.latent_dim}, {"n_stages", c.n_stages}, {"alpha_rec", c.alpha_rec},
                 {"alpha_inv", c.alpha_inv},   {"alpha_linv", c.alpha_linv}, {"lr", c.lr},
                 {"batch_size", c.batch_size}, {"epochs", c.epochs},     {"seed", c.seed}};
  json tensors = json::array();
  for (const NamedTensor& t : model.params().tensors) tensors.push_back({{"name", t.name}, {"shape", t.value.shape()}});
  h["tensors"] = tensors;
  const std::string header = h.dump();

  std::vector<std::uint8_t> out(kLedmMagic, kLedmMagic + 4);
  put_u32(out, static_cast<std::uint32_t>(header.size()));
  out.insert(out.end(), header.begin(), header.end());
  for (const NamedTensor& t : model.params().tensors) put_values<double>(out, t.value.data());
  write_bytes(path, out);
}

LedaModel checkpoint_load(const fs::path& path) {
  using K = FormatError::Kind;
  const std::vector<std::uint8_t> bytes = read_bytes(path);
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kLedmMagic, 4) != 0) throw FormatError(K::BadMagic, "not a LEDM file");
  const std::uint32_t hlen = get_u32(bytes.data() + 4);
  if (bytes.size() < 8 + static_cast<std::size_t>(hlen)) throw FormatError(K::Truncated, "LEDM header truncated");
  json h;
  try {
    h = json::parse(bytes.begin() + 8, bytes.begin() + 8 + hlen);
    LedaConfig c;
    const json& jc = h.at("config");
    c.latent_dim = jc.at("latent_dim");
    c.n_stages = jc.at("n_stages");
    c.alpha_rec = jc.at("alpha_rec");
    c.alpha_inv = jc.at("alpha_inv");
    c.alpha_linv = jc.at("alpha_linv");
    c.lr = jc.at("lr");
    c.batch_size = jc.at("batch_size");
    c.epochs = jc.at("epochs");
    c.seed = jc.at("seed");
    if (h.at("version") != 1 || h.at("dtype") != "f64") throw FormatError(K::UnsupportedVersion, "LEDM version/dtype");
    const Grid2 g{h.at("grid").at(0), h.at("grid").at(1)};

    ModelParams p;
    std::size_t at = 8 + hlen;
    for (const json& jt : h.at("tensors")) {
      ad::Tensor t(jt.at("shape").get<std::vector<int>>());
      if (bytes.size() < at + t.numel() * 8) throw FormatError(K::Truncated, "LEDM payload truncated");
      get_values<double>(bytes.data() + at, t.data());
      at += t.numel() * 8;
      p.tensors.push_back({jt.at("name"), std::move(t)});
    }
    if (at != bytes.size()) throw FormatError(K::BadHeader, "LEDM has trailing bytes");
    return LedaModel(g, c, std::move(p));
  } catch (const json::exception& e) {
    throw FormatError(K::BadHeader, std::string("LEDM header: ") + e.what());
  }
}

LedaModel checkpoint_load(const fs::path& path, Grid2 expected) {
  LedaModel m = checkpoint_load(path);
  if (!(m.grid() == expected)) {
    throw ConfigMismatch("checkpoint grid " + std::to_string(m.grid().height) + "x" + std::to_string(m.grid().width) +
                         " does not match " + std::to_string(expected.height) + "x" + std::to_string(expected.width));
  }
  return m;
}

// ---------------------------------------------------------------------------
// manifests

std::string manifest_to_json(const DatasetManifest& m) {
  json j;
  j["format"] = "leda-dataset";
  j["version"] = m.version;
  j["grid"] = {m.grid.height, m.grid.width};
  j["seed"] = m.seed;
  json recs = json::array();
  for (const ManifestRecord& r : m.records) {
    json jr{{"pair_id", r.pair_id}, {"path_fwd", r.path_fwd}, {"path_bwd", r.path_bwd}};
    if (r.path_gt_velocity) jr["path_gt_velocity"] = *r.path_gt_velocity;
    jr["covariates"] = r.covariates;
    if (!r.factor_coeffs.empty()) jr["factor_coeffs"] = r.factor_coeffs;
    recs.push_back(std::move(jr));
  }
  j["records"] = recs;
  return j.dump(2) + "\n";
}

DatasetManifest manifest_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    DatasetManifest m;
    m.version = j.at("version");
    if (m.version != 1) throw FormatError(FormatError::Kind::UnsupportedVersion, "manifest version");
    m.grid = {j.at("grid").at(0), j.at("grid").at(1)};
    m.seed = j.value("seed", std::uint64_t{0});
    for (const json& jr : j.at("records")) {
      ManifestRecord r;
      r.pair_id = jr.at("pair_id");
      r.path_fwd = jr.at("path_fwd");
      r.path_bwd = jr.at("path_bwd");
      if (jr.contains("path_gt_velocity")) r.path_gt_velocity = jr["path_gt_velocity"].get<std::string>();
      if (jr.contains("covariates")) r.covariates = jr["covariates"].get<std::map<std::string, double>>();
      if (jr.contains("factor_coeffs")) r.factor_coeffs = jr["factor_coeffs"].get<std::vector<double>>();
      m.records.push_back(std::move(r));
    }
    return m;
  } catch (const json::exception& e) {
    throw FormatError(FormatError::Kind::BadHeader, std::string("manifest: ") + e.what());
  }
}

void manifest_write(const fs::path& path, const DatasetManifest& m) { write_text(path, manifest_to_json(m)); }

namespace {

void check_field_file(const fs::path& p, Grid2 g) {
  const std::vector<std::uint8_t> bytes = read_bytes(p);
  if (bytes.size() < kLedfHeader) throw FormatError(FormatError::Kind::Truncated, p.string() + ": truncated");
  const VectorField f = decode_field(bytes);
  if (!(f.grid() == g)) throw GridMismatch(p.string() + ": grid differs from manifest");
}

}  // namespace

DatasetManifest manifest_read(const fs::path& path, bool check_files) {
  DatasetManifest m = manifest_from_json(read_text(path));
  if (check_files) {
    const fs::path dir = path.parent_path();
    for (const ManifestRecord& r : m.records) {
      check_field_file(dir / r.path_fwd, m.grid);
      check_field_file(dir / r.path_bwd, m.grid);
      if (r.path_gt_velocity) check_field_file(dir / *r.path_gt_velocity, m.grid);
    }
  }
  return m;
}

std::vector<LoadedPair> load_pairs(const fs::path& dir, const DatasetManifest& m, std::size_t first, std::size_t count) {
  std::vector<LoadedPair> out;
  const std::size_t end = count > m.records.size() ? m.records.size() : std::min(m.records.size(), first + count);
  for (std::size_t i = first; i < end; ++i) {
    const ManifestRecord& r = m.records[i];
    LoadedPair p{r, {DeformationField{field_read(dir / r.path_fwd)}, DeformationField{field_read(dir / r.path_bwd)}}, {}};
    if (!(p.fields.fwd.grid() == m.grid) || !(p.fields.bwd.grid() == m.grid)) {
      throw GridMismatch(r.path_fwd + ": grid differs from manifest");
    }
    if (r.path_gt_velocity) p.velocity = field_read(dir / *r.path_gt_velocity);
    out.push_back(std::move(p));
  }
  return out;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError(FormatError::Kind::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError(FormatError::Kind::Io, "cannot write " + path.string());
  out << text;
}

}  // namespace leda
