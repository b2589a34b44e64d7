#pragma once

#include <vector>

#include "dpreg/tensor.hpp"

namespace dpreg {

// Standard Adam with bias correction. One state serves a fixed parameter
// list; moment buffers are sized on the first step.
struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  long step_count = 0;
  std::vector<std::vector<double>> m, v;
};

void adam_step(std::vector<Tensor>& params, AdamState& state, double lr);

}  // namespace dpreg
