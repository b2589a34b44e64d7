// Evaluation metrics on hard label maps: per-structure Dice, HD95 in mm, and
// the clinical indices LVEDV (mL) and LVMM (g).

#pragma once

#include <string>

#include "dpreg/fields.hpp"

namespace dpreg {

struct MetricsReport {
  double dice_lvbp = 0.0;
  double dice_lvm = 0.0;
  double dice_rv = 0.0;
  double dice_avg = 0.0;
  // Mean of per-structure HD95 over foreground structures present in both
  // maps; NaN when no structure is present in both.
  double hd95_mm = 0.0;
  double lvedv_ml = 0.0;
  double lvmm_g = 0.0;
};

// 2|A n B| / (|A| + |B|) on hard labels; 1 if both sets empty, 0 if exactly one.
double dice_score(const LabelMap& a, const LabelMap& b, std::uint8_t label);

// Max over both directions of the 95th percentile (linear interpolation
// between order statistics) of surface-to-surface distances in mm. Surfaces
// are set voxels with a six-connected neighbor outside the set (the grid
// boundary counts as outside). Throws if either set is empty.
double hd95(const LabelMap& a, const LabelMap& b, std::uint8_t label,
            const std::array<double, 3>& spacing_mm);

struct ClinicalIndices {
  double lvedv_ml = 0.0;
  double lvmm_g = 0.0;
};

// LVEDV from the LVBP voxel count, LVMM from the LVM count with myocardial
// density 1.05 g/mL.
ClinicalIndices clinical_indices(const LabelMap& seg,
                                 const std::array<double, 3>& spacing_mm);

// Dice/HD95 of pred against gt; clinical indices of pred.
MetricsReport compute_metrics(const LabelMap& pred, const LabelMap& gt);

std::string metrics_to_json(const MetricsReport& m);
std::string metrics_table(const MetricsReport& m);

}  // namespace dpreg
