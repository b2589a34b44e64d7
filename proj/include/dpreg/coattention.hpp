// Cross-image spatial attention over two feature maps: a shared similarity
// matrix attends each stream over the other, a sigmoid gate scales the
// attended vectors per position, and a learned projection fuses the
// concatenated (input, gated attention) channels back to C. The batch-norm of
// the fusion stage is replaced by a per-channel learnable affine so the block
// is well-defined at batch size 1.

#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "dpreg/tensor.hpp"

namespace dpreg {

struct CoAttentionParams {
  std::size_t channels = 0;

  Tensor w_f, w_g, w_h1, w_h2;        // (C,C) projections
  Tensor gate_w_mov, gate_w_fix;      // (C,1) gate weights
  Tensor gate_b_mov, gate_b_fix;      // (1,) gate biases
  Tensor w_o_mov, w_o_fix;            // (2C,C) fusion projections
  Tensor b_o_mov, b_o_fix;            // (1,C) fusion biases
  Tensor scale_mov, scale_fix;        // (1,C) per-channel affine
  Tensor shift_mov, shift_fix;        // (1,C)

  // Projections uniform in +-1/sqrt(C); gates zero (gate opens at 0.5);
  // affine at identity.
  static CoAttentionParams init(std::size_t channels, std::uint64_t seed);

  std::vector<Tensor> parameters() const;
  std::vector<std::pair<std::string, Tensor>> named_parameters() const;

  void save(const std::string& path) const;
  static CoAttentionParams load(const std::string& path);
};

struct FeatureMap {
  Tensor data;  // (C, W, H, D)

  FeatureMap() = default;
  explicit FeatureMap(Tensor t);
  std::size_t channels() const { return data.shape()[0]; }
  std::size_t positions() const { return data.size() / data.shape()[0]; }
};

// N = W*H*D flattened positions; errors when N*N would exceed the budget.
inline constexpr std::size_t kCoAttentionMaxPositions = 4096;

std::pair<FeatureMap, FeatureMap> coattend(
    const FeatureMap& f_mov, const FeatureMap& f_fix, const CoAttentionParams& p,
    std::size_t max_positions = kCoAttentionMaxPositions);

}  // namespace dpreg
