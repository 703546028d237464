#pragma once

#include <filesystem>
#include <string>

#include "aebound/network.hpp"

namespace aebound {

/// Checkpoint JSON:
///   {"dims": [M, h1, ..., M], "bottleneck_index": k,
///    "activations": ["relu", ...], "weights": [[row-major reals], ...]}
/// plus an optional "biases" array of per-layer vectors. Reals are written
/// in shortest round-trip form, so save/load is bit-exact.
std::string checkpoint_to_string(const NetworkParams& params);
NetworkParams checkpoint_from_string(const std::string& text);

void save_checkpoint(const NetworkParams& params, const std::filesystem::path& path);
NetworkParams load_checkpoint(const std::filesystem::path& path);

}  // namespace aebound
