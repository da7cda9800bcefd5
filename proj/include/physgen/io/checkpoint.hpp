#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "json.hpp"
#include "physgen/io/dataset.hpp"
#include "physgen/score_model.hpp"

namespace physgen::io {

inline constexpr int kCheckpointVersion = 1;

struct CheckpointMeta {
  std::string dataset_hash;
  std::uint64_t seed = 0;
  std::vector<Channel> channels;  // standardization the model was trained with
  std::string condition = "none";  // none | theta | measurements
  nlohmann::json extra = nlohmann::json::object();
};

/// A stored model: an unconditional network, optionally with its augmentation.
struct Model {
  nn::ScoreNetwork base;
  std::optional<nn::ConditionalAugmentation> augmented;
  CheckpointMeta meta;
};

/// File layout: 8-byte magic, u64 header length, JSON header, raw f64 blocks: base
/// parameters, prior (mean, eigenvalues, basis) when present, augmentation when present.
void save_checkpoint(const Model& model, const std::filesystem::path& path);

/// Rejects files whose architecture differs from `expected` when given.
Model load_checkpoint(const std::filesystem::path& path, const nn::Architecture* expected = nullptr);

}  // namespace physgen::io
