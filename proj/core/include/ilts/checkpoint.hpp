#pragma once

#include <filesystem>
#include <string>

#include "ilts/training.hpp"

namespace ilts {

// Versioned binary checkpoint: named f32 tensors with shapes, their Adam
// moments, a JSON metadata block (model/train config, counters) and a CRC32
// trailer. Load throws Errc::CorruptFile on any mismatch.
void save_checkpoint(const ModelState& state, const std::filesystem::path& path);
ModelState load_checkpoint(const std::filesystem::path& path);

// Metadata serialization shared with run manifests.
std::string model_config_json(const ModelConfig& cfg);
std::string train_config_json(const TrainConfig& cfg);

}  // namespace ilts
