// Per-pair registration by direct gradient-based optimization of sub-SVFs:
// split the domain by the moving label map, integrate each velocity field,
// compose the per-region deformations into one globally discontinuous field,
// warp, score the composite objective and iterate with Adam. The smooth
// baseline mode optimizes a single global SVF with a single diffusion
// penalty instead.

#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "dpreg/fields.hpp"
#include "dpreg/losses.hpp"
#include "dpreg/metrics.hpp"

namespace dpreg {

enum class RegistrationMode { discontinuous, smooth_baseline };

struct RegistrationProblem {
  Volume moving, fixed;
  LabelMap moving_mask, fixed_mask;
  LossWeights weights;
  int steps = 7;           // scaling-and-squaring integration steps
  int iters = 3000;        // see README: the default learning rate needs room
  double lr = 1e-3;
  int svf_grid_factor = 2; // SVFs parameterized at 1/factor resolution
  RegistrationMode mode = RegistrationMode::discontinuous;
  std::uint64_t seed = 0;  // recorded in reports; the solver itself is deterministic

  void validate() const;
};

struct IterationTrace {
  double seg = 0.0, mse = 0.0, dice = 0.0, reg = 0.0, total = 0.0;
};

struct RegistrationReport {
  // Velocity fields on the coarse grid, ordered (LVBP, LVM, RV, background)
  // in discontinuous mode; a single entry in smooth-baseline mode.
  std::vector<VectorField> svfs;
  Grid svf_grid;
  VectorField composed;  // full-resolution deformation
  std::vector<IterationTrace> trace;
  Volume warped_moving;
  LabelMap warped_mask;
  MetricsReport metrics;
  RegistrationProblem problem;
};

struct DivergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// img_k(x) = img(x) * [mask(x) == k], ordered (LVBP, LVM, RV, background).
// The four outputs sum voxelwise to the input exactly.
std::array<Volume, 4> split_by_masks(const Volume& img, const LabelMap& mask);

using ProgressFn = std::function<void(int iter, const IterationTrace&)>;

RegistrationReport register_pair(const RegistrationProblem& p,
                                 const ProgressFn& progress = nullptr);

// Apply a report's composed deformation to additional inputs.
Volume warp_with(const RegistrationReport& report, const Volume& extra);
LabelMap warp_with(const RegistrationReport& report, const LabelMap& extra);

// Jacobian determinants of each sub-deformation, evaluated at that region's
// voxels only (differences never mix two sub-fields, so no stencil straddles
// a region boundary). Returns min det per region over non-empty regions.
std::array<double, 4> per_region_min_jacobian(const RegistrationReport& report);

}  // namespace dpreg
