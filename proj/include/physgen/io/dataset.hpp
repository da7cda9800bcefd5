#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "physgen/burgers.hpp"
#include "physgen/kle.hpp"

namespace physgen::io {

inline constexpr int kSchemaVersion = 1;

enum class PdeKind { darcy, burgers };

std::string to_string(PdeKind kind);
PdeKind parse_kind(const std::string& name);

struct Channel {
  std::string name;
  int rows = 0;
  int cols = 0;
  double mean = 0.0;
  double std = 1.0;

  int size() const noexcept { return rows * cols; }
};

/// Samples stored as columns; each column is the concatenation of its channels, each
/// channel row-major.
struct Dataset {
  PdeKind kind = PdeKind::darcy;
  std::uint64_t seed = 0;
  nlohmann::json params = nlohmann::json::object();
  std::vector<Channel> channels;
  Eigen::MatrixXd data;
  Eigen::MatrixXd theta;  // KLE coefficients per sample (Darcy only, may be empty)

  int count() const noexcept { return static_cast<int>(data.cols()); }
  Eigen::Index dim() const noexcept { return data.rows(); }
  Eigen::Index channel_offset(std::size_t c) const;
};

/// Per-channel mean and population standard deviation over all samples and nodes.
void compute_channel_stats(Dataset& ds);

Dataset make_darcy_dataset(const kle::DarcyDatasetSpec& spec);
Dataset make_burgers_dataset(const burgers::BurgersDatasetSpec& spec);

kle::DarcyDatasetSpec darcy_spec(const Dataset& ds);
burgers::BurgersConfig burgers_config(const Dataset& ds);

/// Writes manifest.json plus raw little-endian f64 payloads into `dir`.
void save_dataset(const Dataset& ds, const std::filesystem::path& dir);
Dataset load_dataset(const std::filesystem::path& dir);

/// Hex SHA-256 digest.
std::string sha256_hex(const void* data, std::size_t size);
std::string file_sha256(const std::filesystem::path& path);

/// Hash of the sample payload, used to tie checkpoints to their training data.
std::string data_hash(const Dataset& ds);

}  // namespace physgen::io
