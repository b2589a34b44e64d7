#include "dpreg/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace dpreg {

void adam_step(std::vector<Tensor>& params, AdamState& state, double lr) {
  if (state.m.empty()) {
    state.m.resize(params.size());
    state.v.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      state.m[i].assign(params[i].size(), 0.0);
      state.v[i].assign(params[i].size(), 0.0);
    }
  }
  if (state.m.size() != params.size())
    throw std::invalid_argument("adam_step: parameter list changed size under one state");

  ++state.step_count;
  const double bc1 = 1.0 - std::pow(state.beta1, state.step_count);
  const double bc2 = 1.0 - std::pow(state.beta2, state.step_count);

  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor& p = params[i];
    if (p.size() != state.m[i].size())
      throw std::invalid_argument("adam_step: parameter shape changed under one state");
    const std::vector<double> g = p.grad();
    double* x = p.data();
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t j = 0; j < g.size(); ++j) {
      m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g[j];
      v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g[j] * g[j];
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      x[j] -= lr * mhat / (std::sqrt(vhat) + state.epsilon);
    }
  }
}

}  // namespace dpreg
