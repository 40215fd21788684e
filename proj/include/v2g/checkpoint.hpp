// Parameter checkpoint container: little-endian binary, versioned header,
// then (name, shape, float64 payload) records.
#pragma once

#include <string>
#include <utility>
#include <vector>

#include "v2g/tensor.hpp"

namespace v2g::nn {

// Writes records in the given order.
void save_checkpoint(const std::string& path,
                     const std::vector<std::pair<std::string, const TensorData*>>& tensors);
void save_checkpoint(const std::string& path, const ParamStore& params);

// Returns records in file order. Throws on bad magic, version mismatch, or
// truncation.
std::vector<std::pair<std::string, TensorData>> load_checkpoint(const std::string& path);

}  // namespace v2g::nn
