// Synthetic cardiac phantoms with analytically known ground-truth
// deformations. Structures are z-extruded: an LVBP disc inside an LVM
// annulus, plus an RV disc that becomes a crescent where it overlaps the LV
// epicardium. Masks are drawn analytically in both frames so every frame's
// labels are exact; the fixed image is the warped clean moving image plus
// noise.

#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "dpreg/fields.hpp"

namespace dpreg {

// Piecewise-constant structure intensities (artifact conventions).
inline constexpr double kIntensityBackground = 0.2;
inline constexpr double kIntensityLVBP = 1.0;
inline constexpr double kIntensityLVM = 0.6;
inline constexpr double kIntensityRV = 0.8;

enum class MotionKind { rigid_shift, contraction, sliding };

struct Motion {
  MotionKind kind = MotionKind::rigid_shift;
  // rigid_shift
  std::array<double, 3> shift{0, 0, 0};
  // contraction: blood-pool radius scales by `scale`; the myocardial shell
  // rethickens area-preservingly; displacement tapers to zero at taper_radius.
  double scale = 0.8;
  double taper_radius = 0.0;
  // sliding: voxels with coordinate >= plane_pos along plane_axis translate by
  // shift_positive, the rest by shift_negative; both must be tangential.
  int plane_axis = 0;
  double plane_pos = 0.0;
  std::array<double, 3> shift_positive{0, 0, 0};
  std::array<double, 3> shift_negative{0, 0, 0};
};

struct PhantomGeometry {
  std::array<double, 2> lv_center{0, 0};  // in-plane, voxels
  double lvbp_radius = 5.0;
  double lvm_thickness = 3.0;
  std::array<double, 2> rv_offset{10.0, 0.0};  // relative to lv_center
  double rv_radius = 4.0;
  double z_margin = 1.0;  // structures span [z_margin, D - z_margin)
};

struct PhantomSpec {
  Grid grid;
  PhantomGeometry geometry;
  Motion motion;
  double noise_sigma = 0.01;
  // Smooth deterministic intensity modulation inside structures (shared
  // between frames through the ground-truth warp). Piecewise-constant images
  // leave the interior deformation unconstrained, so registration oracles
  // need this pinned texture; set to 0 for flat structures.
  double texture_amp = 0.15;
  std::uint64_t seed = 1;

  void validate() const;
  static PhantomSpec from_json_file(const std::string& path);
  static PhantomSpec from_json_text(const std::string& text);
  std::string to_json() const;
};

struct PhantomPair {
  Volume moving, fixed;
  LabelMap moving_mask, fixed_mask;
  VectorField gt_deformation;  // maps the fixed grid into the moving image
};

PhantomPair generate_phantom(const PhantomSpec& spec);

}  // namespace dpreg
