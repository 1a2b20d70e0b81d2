#pragma once

#include "disamgnn/models.hpp"

#include <filesystem>

namespace disamgnn {

/// Writes a JSON manifest at `manifest` (names, shapes, byte offsets and the
/// model configuration) and a little-endian float64 blob beside it with the
/// extension replaced by ".bin".
void save_checkpoint(const ModelParams& params, const std::filesystem::path& manifest);

/// Throws std::runtime_error if the manifest is malformed, disagrees with
/// the blob, or does not describe the parameter layout of its backbone.
ModelParams load_checkpoint(const std::filesystem::path& manifest);

}  // namespace disamgnn
