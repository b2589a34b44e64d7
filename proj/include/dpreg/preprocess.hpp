// Cross-dataset preprocessing: quantile-based histogram matching and
// center crop / zero pad to a fixed size.

#pragma once

#include "dpreg/fields.hpp"

namespace dpreg {

// Monotone remapping of src intensities so their empirical CDF approximates
// ref's at `levels` quantiles. Output stays within [min(ref), max(ref)].
Volume histogram_match(const Volume& src, const Volume& ref, int levels = 256);

// Center-crop then zero-pad per axis; the extra voxel of an odd difference
// goes to the low-index side.
Volume crop_pad(const Volume& img, const std::array<std::size_t, 3>& target);
LabelMap crop_pad(const LabelMap& map, const std::array<std::size_t, 3>& target);

}  // namespace dpreg
