#include <openssl/evp.h>

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "physgen/error.hpp"
#include "physgen/io/dataset.hpp"

static_assert(std::endian::native == std::endian::little, "payload files are little-endian");

namespace physgen::io {

using nlohmann::json;
namespace fs = std::filesystem;

std::string to_string(PdeKind kind) { return kind == PdeKind::darcy ? "darcy" : "burgers"; }

PdeKind parse_kind(const std::string& name) {
  if (name == "darcy") return PdeKind::darcy;
  if (name == "burgers") return PdeKind::burgers;
  fail(ErrorCode::invalid_argument, "unknown pde kind '" + name + "'");
}

Eigen::Index Dataset::channel_offset(std::size_t c) const {
  require(c < channels.size(), "channel index out of range");
  Eigen::Index at = 0;
  for (std::size_t i = 0; i < c; ++i) at += channels[i].size();
  return at;
}

void compute_channel_stats(Dataset& ds) {
  require(ds.count() >= 1, "channel stats: empty dataset");
  for (std::size_t c = 0; c < ds.channels.size(); ++c) {
    Channel& ch = ds.channels[c];
    const auto block = ds.data.middleRows(ds.channel_offset(c), ch.size());
    ch.mean = block.mean();
    ch.std = std::sqrt((block.array() - ch.mean).square().mean());
    require(std::isfinite(ch.mean) && std::isfinite(ch.std), "channel stats are not finite");
    if (ch.std == 0.0) ch.std = 1.0;
  }
}

Dataset make_darcy_dataset(const kle::DarcyDatasetSpec& spec) {
  const std::vector<kle::DarcySample> samples = kle::generate_darcy_samples(spec);
  const int n2 = spec.n * spec.n;
  Dataset ds;
  ds.kind = PdeKind::darcy;
  ds.seed = spec.seed;
  ds.params = {{"n", spec.n},
               {"s", spec.s},
               {"length_scale", spec.covariance.length},
               {"mean_log_k", spec.covariance.mean},
               {"source_rate", spec.source.rate},
               {"source_width", spec.source.width}};
  ds.channels = {{"pressure", spec.n, spec.n}, {"permeability", spec.n, spec.n}};
  ds.data.resize(2 * n2, spec.count);
  ds.theta.resize(spec.s, spec.count);
  for (int k = 0; k < spec.count; ++k) {
    ds.data.col(k).head(n2) = samples[k].pressure.values();
    ds.data.col(k).tail(n2) = samples[k].permeability.values();
    ds.theta.col(k) = samples[k].theta;
  }
  compute_channel_stats(ds);
  return ds;
}

Dataset make_burgers_dataset(const burgers::BurgersDatasetSpec& spec) {
  const std::vector<burgers::BurgersSample> samples = burgers::generate_burgers_samples(spec);
  const burgers::BurgersConfig& c = spec.config;
  Dataset ds;
  ds.kind = PdeKind::burgers;
  ds.seed = spec.seed;
  ds.params = {{"nu", c.nu},         {"nx", c.nx},       {"nt", c.nt},
               {"dt", c.dt},         {"length", c.length}, {"modes", spec.modes},
               {"max_wavenumber", spec.max_wavenumber}};
  ds.channels = {{"u", c.nt, c.nx}};
  ds.data.resize(static_cast<Eigen::Index>(c.nt) * c.nx, spec.count);
  for (int k = 0; k < spec.count; ++k)
    ds.data.col(k) = Eigen::Map<const Eigen::VectorXd>(samples[k].u.data(), ds.data.rows());
  compute_channel_stats(ds);
  return ds;
}

kle::DarcyDatasetSpec darcy_spec(const Dataset& ds) {
  require(ds.kind == PdeKind::darcy, "dataset is not a Darcy dataset");
  kle::DarcyDatasetSpec spec;
  spec.count = ds.count();
  spec.seed = ds.seed;
  spec.n = ds.params.at("n").get<int>();
  spec.s = ds.params.at("s").get<int>();
  spec.covariance.length = ds.params.at("length_scale").get<double>();
  spec.covariance.mean = ds.params.at("mean_log_k").get<double>();
  spec.source.rate = ds.params.at("source_rate").get<double>();
  spec.source.width = ds.params.at("source_width").get<double>();
  return spec;
}

burgers::BurgersConfig burgers_config(const Dataset& ds) {
  require(ds.kind == PdeKind::burgers, "dataset is not a Burgers dataset");
  burgers::BurgersConfig c;
  c.nu = ds.params.at("nu").get<double>();
  c.nx = ds.params.at("nx").get<int>();
  c.nt = ds.params.at("nt").get<int>();
  c.dt = ds.params.at("dt").get<double>();
  c.length = ds.params.at("length").get<double>();
  return c;
}

std::string sha256_hex(const void* data, std::size_t size) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data, size, digest, &len, EVP_sha256(), nullptr) != 1) fail(ErrorCode::internal, "sha256 failed");
  std::string hex;
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", digest[i]);
    hex += buf;
  }
  return hex;
}

namespace {

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const void* data, std::size_t size) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::io, "cannot write " + path.string());
  out.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
  if (!out) fail(ErrorCode::io, "write failed for " + path.string());
}

json payload_entry(const std::string& name, const Eigen::MatrixXd& m) {
  const std::size_t bytes = static_cast<std::size_t>(m.size()) * sizeof(double);
  return {{"name", name}, {"rows", m.rows()}, {"cols", m.cols()}, {"bytes", bytes}, {"sha256", sha256_hex(m.data(), bytes)}};
}

Eigen::MatrixXd read_payload(const fs::path& dir, const json& entry) {
  const std::string name = entry.at("name").get<std::string>();
  const Eigen::Index rows = entry.at("rows").get<Eigen::Index>(), cols = entry.at("cols").get<Eigen::Index>();
  const std::size_t bytes = entry.at("bytes").get<std::size_t>();
  require(rows >= 0 && cols >= 0 && bytes == static_cast<std::size_t>(rows * cols) * sizeof(double),
          "manifest: inconsistent shape for " + name);
  const std::string raw = read_file(dir / name);
  if (raw.size() != bytes) fail(ErrorCode::io, "truncated payload " + name);
  if (sha256_hex(raw.data(), raw.size()) != entry.at("sha256").get<std::string>())
    fail(ErrorCode::checksum, "checksum mismatch in " + name);
  Eigen::MatrixXd m(rows, cols);
  std::memcpy(m.data(), raw.data(), bytes);
  return m;
}

}  // namespace

std::string file_sha256(const fs::path& path) {
  const std::string raw = read_file(path);
  return sha256_hex(raw.data(), raw.size());
}

std::string data_hash(const Dataset& ds) {
  return sha256_hex(ds.data.data(), static_cast<std::size_t>(ds.data.size()) * sizeof(double));
}

void save_dataset(const Dataset& ds, const fs::path& dir) {
  require(!ds.channels.empty(), "save_dataset: no channels");
  Eigen::Index total = 0;
  for (const Channel& ch : ds.channels) total += ch.size();
  require(total == ds.dim(), "save_dataset: channel sizes do not match data rows");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorCode::io, "cannot create " + dir.string() + ": " + ec.message());

  json channels = json::array();
  for (const Channel& ch : ds.channels)
    channels.push_back({{"name", ch.name}, {"rows", ch.rows}, {"cols", ch.cols}, {"mean", ch.mean}, {"std", ch.std}});
  json files = json::array();
  files.push_back(payload_entry("data.f64", ds.data));
  write_file(dir / "data.f64", ds.data.data(), static_cast<std::size_t>(ds.data.size()) * sizeof(double));
  if (ds.theta.size() > 0) {
    files.push_back(payload_entry("theta.f64", ds.theta));
    write_file(dir / "theta.f64", ds.theta.data(), static_cast<std::size_t>(ds.theta.size()) * sizeof(double));
  }
  const json manifest = {{"schema_version", kSchemaVersion},
                         {"kind", to_string(ds.kind)},
                         {"count", ds.count()},
                         {"seed", ds.seed},
                         {"params", ds.params},
                         {"channels", channels},
                         {"files", files}};
  const std::string text = manifest.dump(2) + "\n";
  write_file(dir / "manifest.json", text.data(), text.size());
}

Dataset load_dataset(const fs::path& dir) {
  json manifest;
  try {
    manifest = json::parse(read_file(dir / "manifest.json"));
  } catch (const json::exception& e) {
    fail(ErrorCode::io, "malformed manifest in " + dir.string() + ": " + e.what());
  }
  try {
    const int version = manifest.at("schema_version").get<int>();
    if (version != kSchemaVersion)
      fail(ErrorCode::version, "dataset schema version " + std::to_string(version) + " is not supported (expected " +
                                   std::to_string(kSchemaVersion) + ")");
    Dataset ds;
    ds.kind = parse_kind(manifest.at("kind").get<std::string>());
    ds.seed = manifest.at("seed").get<std::uint64_t>();
    ds.params = manifest.at("params");
    for (const json& ch : manifest.at("channels"))
      ds.channels.push_back({ch.at("name").get<std::string>(), ch.at("rows").get<int>(), ch.at("cols").get<int>(),
                             ch.at("mean").get<double>(), ch.at("std").get<double>()});
    for (const json& entry : manifest.at("files")) {
      const std::string name = entry.at("name").get<std::string>();
      if (name == "data.f64")
        ds.data = read_payload(dir, entry);
      else if (name == "theta.f64")
        ds.theta = read_payload(dir, entry);
      else
        fail(ErrorCode::io, "unknown payload " + name);
    }
    const int count = manifest.at("count").get<int>();
    require(ds.count() == count, "manifest count does not match payload");
    Eigen::Index total = 0;
    for (const Channel& ch : ds.channels) {
      require(std::isfinite(ch.mean) && std::isfinite(ch.std), "manifest: channel stats are not finite");
      total += ch.size();
    }
    require(total == ds.dim(), "manifest channels do not match payload rows");
    require(ds.theta.size() == 0 || ds.theta.cols() == count, "theta payload does not match count");
    return ds;
  } catch (const json::exception& e) {
    fail(ErrorCode::io, "malformed manifest in " + dir.string() + ": " + e.what());
  }
}

}  // namespace physgen::io
