// Flat binary container for named tensors, little-endian:
//   magic "DPTENS01", u64 count, then per tensor:
//   u64 name length, name bytes, u64 rank, u64 dims[rank], f64 data.

#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "dpreg/tensor.hpp"

namespace dpreg {

void save_tensors(const std::string& path,
                  const std::vector<std::pair<std::string, Tensor>>& tensors);

std::map<std::string, Tensor> load_tensors(const std::string& path);

}  // namespace dpreg
