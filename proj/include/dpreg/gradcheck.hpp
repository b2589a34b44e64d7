// Central finite-difference checking of reverse-mode gradients. Two probes:
// per-element differences for small smooth graphs, and random-direction
// differences for larger graphs where element sweeps are too slow or where
// interpolation kinks make isolated elements unreliable.

#pragma once

#include <functional>
#include <random>
#include <string>
#include <vector>

#include "dpreg/tensor.hpp"

namespace dpreg {

// Rebuilds the graph from the current leaf values and returns the scalar loss.
using LossFn = std::function<Tensor()>;

// Max over elements of |analytic - numeric| divided by the gradient scale
// (max |analytic| and |numeric| over all leaves, floored at 1e-8).
// analytic_scale multiplies the reverse-mode gradients before comparison;
// anything other than 1.0 simulates a broken backward pass (test hook).
double fd_check_elementwise(const LossFn& f, std::vector<Tensor> leaves, double h = 1e-5,
                            double analytic_scale = 1.0);

// Same normalization, probing `probes` random directions per leaf.
double fd_check_directional(const LossFn& f, std::vector<Tensor> leaves, std::uint64_t seed,
                            int probes = 3, double h = 1e-5, double analytic_scale = 1.0);

struct GradCheckResult {
  std::string name;
  double max_rel_err = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

struct GradCheckOptions {
  std::uint64_t seed = 17;
  std::size_t size = 4;        // grid edge used by field-based checks
  std::string corrupt;         // test hook: bias the named check's analytic gradient
};

// Runs the named finite-difference oracles of every differentiable module.
std::vector<GradCheckResult> run_gradcheck_suite(const GradCheckOptions& opts);

// Uniform random leaf tensor in [lo, hi].
Tensor random_tensor(Shape shape, std::mt19937_64& rng, double lo, double hi,
                     bool requires_grad = true);

}  // namespace dpreg
