// Velocity / displacement / deformation fields on regular grids, label maps,
// diffeomorphic integration by scaling and squaring, mask-based composition
// and Jacobian analysis. Vector components are in voxel units throughout;
// physical spacing enters only in the metrics module.

#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "dpreg/tensor.hpp"

namespace dpreg {

struct Grid {
  std::array<std::size_t, 3> extents{0, 0, 0};   // (W, H, D)
  std::array<double, 3> spacing{1.0, 1.0, 1.0};  // mm per voxel

  std::size_t voxel_count() const { return extents[0] * extents[1] * extents[2]; }
  double voxel_volume_mm3() const { return spacing[0] * spacing[1] * spacing[2]; }
  bool operator==(const Grid& other) const = default;
  void validate() const;  // extents >= 2 per axis, spacing > 0
};

enum class FieldRole { velocity, displacement, deformation };

// Scalar intensity image, data shape (W, H, D), z fastest.
struct Volume {
  Grid grid;
  Tensor data;

  Volume() = default;
  Volume(Grid g, Tensor t);
};

// Label values: 0 background, 1 LVBP, 2 LVM, 3 RV.
inline constexpr int kNumLabels = 4;
inline constexpr std::uint8_t kBackground = 0;
inline constexpr std::uint8_t kLVBP = 1;
inline constexpr std::uint8_t kLVM = 2;
inline constexpr std::uint8_t kRV = 3;

struct LabelMap {
  Grid grid;
  std::vector<std::uint8_t> labels;

  LabelMap() = default;
  LabelMap(Grid g, std::vector<std::uint8_t> values);

  // Exact one-hot expansion, shape (4, W, H, D); rows sum to 1.
  Tensor one_hot() const;
  std::size_t count(std::uint8_t label) const;
};

// 3-component field, data shape (3, W, H, D).
struct VectorField {
  Grid grid;
  FieldRole role = FieldRole::velocity;
  Tensor data;

  VectorField() = default;
  VectorField(Grid g, FieldRole r, Tensor t);
};

// Constant (non-differentiable) voxel-coordinate grid, shape (3, W, H, D).
Tensor identity_grid(const Grid& grid);
VectorField identity_deformation(const Grid& grid);

// phi = id + u and u = phi - id, preserving differentiability.
VectorField deformation_from_displacement(const VectorField& u);
VectorField displacement_of(const VectorField& phi);

// phi = exp(v): halve v `steps` times, then self-compose the resulting small
// displacement `steps` times via trilinear resampling. Differentiable in v.
VectorField integrate_svf(const VectorField& v, int steps);

// Eq.-style mask composition: each voxel copies the vector of exactly one
// sub-field, chosen by the label map. phis ordered (LVBP, LVM, RV, background).
VectorField compose_fields(const std::array<VectorField, 4>& phis, const LabelMap& masks);

// out[v] = fields_by_label[labels[v]][:, v]; differentiable in every field.
Tensor select_by_label(const std::vector<Tensor>& fields_by_label,
                       const std::vector<std::uint8_t>& labels);

// det of the central-difference Jacobian (one-sided at boundaries).
// Plain analysis output, not differentiable.
Volume jacobian_determinant(const VectorField& phi);

// Mean squared forward-difference gradient of a displacement field, the
// diffusion regularizer. Each axis normalizes by its own difference count.
Tensor diffusion_energy(const VectorField& u);

// Mean |a - b| over voxels, optionally restricted to foreground of a mask.
double mean_endpoint_error(const VectorField& a, const VectorField& b,
                           const LabelMap* foreground = nullptr);

}  // namespace dpreg
