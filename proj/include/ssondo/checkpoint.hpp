#pragma once

#include <filesystem>

#include "ssondo/trainer.hpp"

namespace ssondo {

// Directory layout: manifest.json plus one SSND (binary64) file per tensor under tensors/.
void save_checkpoint(const std::filesystem::path& dir, const TrainState& state);
TrainState load_checkpoint(const std::filesystem::path& dir);

}  // namespace ssondo
