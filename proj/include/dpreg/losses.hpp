// The four training-objective terms and their weighted total.

#pragma once

#include "dpreg/fields.hpp"
#include "dpreg/tensor.hpp"

namespace dpreg {

struct LossWeights {
  double seg = 0.1;   // lambda0
  double mse = 1.0;   // lambda1
  double dice = 0.1;  // lambda2
  double reg = 0.01;  // lambda3
  void validate() const;  // all >= 0
};

// Mean squared intensity difference over the grid.
Tensor mse_loss(const Volume& warped, const Volume& fixed);

// Soft Dice consistency on one-hot maps (4,W,H,D), averaged over the three
// foreground channels; background excluded. Smoothing eps guards empty
// structures. Returns 1 - mean Dice.
Tensor dice_loss(const Tensor& warped_onehot, const Tensor& fixed_onehot,
                 double eps = 1e-5);

// Mean over voxels of -log p(ground-truth label); probabilities clipped to
// [1e-12, 1]. One image term; the objective sums moving and fixed terms when
// predictions exist for both.
Tensor cross_entropy_seg(const Tensor& pred_probs, const LabelMap& gt);

struct LossParts {
  Tensor seg, mse, dice, reg;
};

Tensor total_loss(const LossParts& parts, const LossWeights& w);

}  // namespace dpreg
