// Spatial-transformer resampling: out(x) = in(phi(x)) with trilinear
// interpolation and clamp-to-edge sampling, differentiable with respect to
// both the image and the deformation.

#pragma once

#include "dpreg/fields.hpp"
#include "dpreg/tensor.hpp"

namespace dpreg {

// values: (C, Wv, Hv, Dv); positions: (3, W, H, D) voxel coordinates into the
// values grid. Returns (C, W, H, D). Positions outside the domain clamp to the
// edge (their position-gradient is zero there).
Tensor sample_field(const Tensor& values, const Tensor& positions);

// One scaling-and-squaring step fused into a single node:
// out(x) = u(x) + u(x + u(x)), trilinear with clamp-to-edge. Equivalent to
// sample_field(u, id + u) + u but without materializing the intermediates.
Tensor self_compose_displacement(const Tensor& u);

Volume warp_volume(const Volume& img, const VectorField& phi);

// Each one-hot channel warped trilinearly; channels sum to 1.
Tensor warp_onehot(const LabelMap& seg, const VectorField& phi);

// Hard labels from a soft one-hot; ties resolve to the lowest label index.
LabelMap argmax_labels(const Tensor& onehot, const Grid& grid);

}  // namespace dpreg
