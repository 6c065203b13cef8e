#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "red/tensor.hpp"

namespace red::ad {

struct NamedParam {
  std::string name;
  Tensor tensor;
};

// Checkpoint file: 8-byte magic, a little-endian uint64 JSON length, the
// JSON manifest (names, shapes, optimizer step), then all values as
// little-endian float64 in manifest order. Round trips are bit exact.
void save_checkpoint(const std::filesystem::path& path,
                     const std::vector<NamedParam>& params, int64_t step);

// Loads into existing tensors; names and shapes must match the manifest.
// Returns the stored optimizer step.
int64_t load_checkpoint(const std::filesystem::path& path,
                        std::vector<NamedParam>& params);

}  // namespace red::ad
