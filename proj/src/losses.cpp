#include "dpreg/losses.hpp"

#include <stdexcept>

namespace dpreg {

void LossWeights::validate() const {
  if (seg < 0 || mse < 0 || dice < 0 || reg < 0)
    throw std::invalid_argument("loss weights must be non-negative");
}

Tensor mse_loss(const Volume& warped, const Volume& fixed) {
  if (!(warped.grid == fixed.grid))
    throw std::invalid_argument("mse_loss: volumes live on different grids");
  return mean(square(sub(warped.data, fixed.data)));
}

Tensor dice_loss(const Tensor& warped_onehot, const Tensor& fixed_onehot, double eps) {
  if (warped_onehot.shape() != fixed_onehot.shape())
    throw std::invalid_argument("dice_loss: one-hot shapes differ: " +
                                shape_str(warped_onehot.shape()) + " vs " +
                                shape_str(fixed_onehot.shape()));
  if (warped_onehot.rank() != 4 || warped_onehot.shape()[0] != kNumLabels)
    throw std::invalid_argument("dice_loss: expected (4,W,H,D) one-hot tensors");
  const std::size_t N = warped_onehot.size() / kNumLabels;

  Tensor a = reshape(warped_onehot, Shape{kNumLabels, N});
  Tensor b = reshape(fixed_onehot, Shape{kNumLabels, N});
  Tensor inter = sum(mul(a, b), {1});  // (4,)
  Tensor sizes = add(sum(a, {1}), sum(b, {1}));
  Tensor dice = div(add(mul(inter, 2.0), eps), add(sizes, eps));
  Tensor fg = slice(dice, 0, 1, kNumLabels - 1);  // drop background channel
  return sub(1.0, mean(fg));
}

Tensor cross_entropy_seg(const Tensor& pred_probs, const LabelMap& gt) {
  if (pred_probs.rank() != 4 || pred_probs.shape()[0] != kNumLabels)
    throw std::invalid_argument("cross_entropy_seg: expected (4,W,H,D) probabilities");
  const std::size_t N = gt.grid.voxel_count();
  if (pred_probs.size() != kNumLabels * N)
    throw std::invalid_argument("cross_entropy_seg: probabilities do not match the "
                                "label map grid");

  // p(gt label) per voxel, then clip and take -mean log.
  const std::size_t C = kNumLabels;
  std::vector<double> out(N);
  const double* p = pred_probs.data();
  for (std::size_t i = 0; i < N; ++i) out[i] = p[gt.labels[i] * N + i];
  Tensor gathered =
      make_op("gather_label", {pred_probs},
              Shape{gt.grid.extents[0], gt.grid.extents[1], gt.grid.extents[2]},
              std::move(out), [pred_probs, labels = gt.labels, N, C](const Tensor& o) {
                if (!pred_probs.requires_grad()) return;
                const double* g = o.impl()->grad.data();
                auto& gp = pred_probs.impl()->grad_buffer();
                for (std::size_t i = 0; i < N; ++i) gp[labels[i] * N + i] += g[i];
              });
  return neg(mean(log(clamp(gathered, 1e-12, 1.0))));
}

Tensor total_loss(const LossParts& parts, const LossWeights& w) {
  w.validate();
  for (const Tensor* t : {&parts.seg, &parts.mse, &parts.dice, &parts.reg})
    if (t->size() != 1)
      throw std::invalid_argument("total_loss: every part must be scalar");
  return add(add(mul(parts.seg, w.seg), mul(parts.mse, w.mse)),
             add(mul(parts.dice, w.dice), mul(parts.reg, w.reg)));
}

}  // namespace dpreg
