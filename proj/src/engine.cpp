#include "dpreg/engine.hpp"

#include <cmath>
#include <limits>
#include <mutex>

#ifdef __GLIBC__
#include <malloc.h>
#endif

#include "dpreg/adam.hpp"
#include "dpreg/warp.hpp"

namespace dpreg {

void RegistrationProblem::validate() const {
  moving.grid.validate();
  if (!(moving.grid == fixed.grid) || !(moving.grid == moving_mask.grid) ||
      !(moving.grid == fixed_mask.grid))
    throw std::invalid_argument("registration problem: all volumes and masks must share "
                                "one grid");
  weights.validate();
  if (iters < 1) throw std::invalid_argument("registration problem: iters must be >= 1");
  if (steps < 1) throw std::invalid_argument("registration problem: steps must be >= 1");
  if (!(lr > 0.0)) throw std::invalid_argument("registration problem: lr must be positive");
  if (svf_grid_factor != 1 && svf_grid_factor != 2 && svf_grid_factor != 4)
    throw std::invalid_argument("registration problem: svf_grid_factor must be 1, 2 or 4");
}

std::array<Volume, 4> split_by_masks(const Volume& img, const LabelMap& mask) {
  if (!(img.grid == mask.grid))
    throw std::invalid_argument("split_by_masks: image and mask grids differ");
  const std::uint8_t order[4] = {kLVBP, kLVM, kRV, kBackground};
  std::array<Volume, 4> out;
  const std::size_t N = img.grid.voxel_count();
  for (int k = 0; k < 4; ++k) {
    std::vector<double> sel(N, 0.0);
    for (std::size_t i = 0; i < N; ++i)
      if (mask.labels[i] == order[k]) sel[i] = 1.0;
    Tensor mask_k(img.data.shape(), std::move(sel));
    out[k] = Volume(img.grid, mul(img.data, mask_k));
  }
  return out;
}

namespace {

Grid coarse_grid_of(const Grid& fine, int factor) {
  Grid g = fine;
  for (int a = 0; a < 3; ++a)
    g.extents[a] = (fine.extents[a] + factor - 1) / factor;
  g.validate();
  return g;
}

// Constant positions mapping fine voxels into coarse-grid coordinates.
Tensor upsample_positions(const Grid& fine, int factor) {
  const std::size_t W = fine.extents[0], H = fine.extents[1], D = fine.extents[2];
  const std::size_t N = W * H * D;
  const double inv = 1.0 / static_cast<double>(factor);
  std::vector<double> pos(3 * N);
  std::size_t i = 0;
  for (std::size_t x = 0; x < W; ++x)
    for (std::size_t y = 0; y < H; ++y)
      for (std::size_t z = 0; z < D; ++z, ++i) {
        pos[i] = static_cast<double>(x) * inv;
        pos[N + i] = static_cast<double>(y) * inv;
        pos[2 * N + i] = static_cast<double>(z) * inv;
      }
  return Tensor(Shape{3, W, H, D}, std::move(pos));
}

struct ForwardState {
  std::vector<VectorField> phis;  // per-region deformations (or one, smooth mode)
  VectorField composed;
  Volume warped;
  Tensor warped_onehot;
  LossParts parts;
  Tensor total;
};

ForwardState run_forward(const RegistrationProblem& p, const std::vector<Tensor>& params,
                         const Grid& cgrid, const Tensor& up_positions,
                         const Tensor& moving4, const Tensor& moving_onehot,
                         const Tensor& fixed_onehot) {
  ForwardState st;
  const Grid& grid = p.moving.grid;
  const bool disc = p.mode == RegistrationMode::discontinuous;

  std::vector<Tensor> displacements;
  for (const Tensor& prm : params) {
    Tensor v_full = sample_field(prm, up_positions);
    VectorField v(grid, FieldRole::velocity, v_full);
    VectorField phi = integrate_svf(v, p.steps);
    displacements.push_back(displacement_of(phi).data);
    st.phis.push_back(std::move(phi));
  }

  if (disc) {
    st.composed = compose_fields({st.phis[0], st.phis[1], st.phis[2], st.phis[3]},
                                 p.moving_mask);
    Tensor reg = diffusion_energy(
        VectorField(grid, FieldRole::displacement, displacements[0]));
    for (int k = 1; k < 4; ++k)
      reg = add(reg, diffusion_energy(
                         VectorField(grid, FieldRole::displacement, displacements[k])));
    st.parts.reg = mul(reg, 0.25);
  } else {
    st.composed = st.phis[0];
    st.parts.reg = diffusion_energy(
        VectorField(grid, FieldRole::displacement, displacements[0]));
  }

  Tensor warped = sample_field(moving4, st.composed.data);
  st.warped = Volume(grid, reshape(warped, Shape{grid.extents[0], grid.extents[1],
                                                 grid.extents[2]}));
  st.warped_onehot = sample_field(moving_onehot, st.composed.data);

  // Ground-truth masks are the inputs here, so there is no segmentation
  // prediction to score; the seg term stays zero but remains in the ledger.
  st.parts.seg = Tensor::scalar(0.0);
  st.parts.mse = mse_loss(st.warped, p.fixed);
  st.parts.dice = dice_loss(st.warped_onehot, fixed_onehot);
  st.total = total_loss(st.parts, p.weights);
  return st;
}

Tensor detached(const Tensor& t) { return Tensor(t.shape(), t.values()); }

}  // namespace

RegistrationReport register_pair(const RegistrationProblem& p, const ProgressFn& progress) {
#ifdef __GLIBC__
  // The per-iteration graph churns through multi-hundred-KB buffers; keeping
  // them off mmap lets the allocator reuse pages instead of refaulting them.
  static std::once_flag mallopt_once;
  std::call_once(mallopt_once, [] { mallopt(M_MMAP_THRESHOLD, 64 << 20); });
#endif
  p.validate();
  const Grid& grid = p.moving.grid;
  const Grid cgrid = coarse_grid_of(grid, p.svf_grid_factor);
  const bool disc = p.mode == RegistrationMode::discontinuous;
  const int nfields = disc ? 4 : 1;

  const Tensor up_positions = upsample_positions(grid, p.svf_grid_factor);
  const Tensor moving4 = reshape(p.moving.data, Shape{1, grid.extents[0], grid.extents[1],
                                                      grid.extents[2]});
  const Tensor moving_onehot = p.moving_mask.one_hot();
  const Tensor fixed_onehot = p.fixed_mask.one_hot();

  std::vector<Tensor> params;
  for (int k = 0; k < nfields; ++k)
    params.emplace_back(Shape{3, cgrid.extents[0], cgrid.extents[1], cgrid.extents[2]},
                        0.0, true);

  AdamState adam;
  RegistrationReport report;
  report.problem = p;
  report.svf_grid = cgrid;
  report.trace.reserve(p.iters);

  double initial_total = 0.0;
  for (int iter = 0; iter < p.iters; ++iter) {
    ForwardState st = run_forward(p, params, cgrid, up_positions, moving4, moving_onehot,
                                  fixed_onehot);
    IterationTrace tr;
    tr.seg = st.parts.seg.item();
    tr.mse = st.parts.mse.item();
    tr.dice = st.parts.dice.item();
    tr.reg = st.parts.reg.item();
    tr.total = st.total.item();
    report.trace.push_back(tr);
    if (progress) progress(iter, tr);

    // The absolute floor keeps the guard quiet when the pair starts perfectly
    // aligned (initial total can be exactly zero and the soft-dice pressure
    // lifts it off zero by a few 1e-5).
    if (iter == 0) initial_total = tr.total;
    if (tr.total > 10.0 * initial_total + 1e-3)
      throw DivergenceError("registration diverged at iteration " + std::to_string(iter) +
                            ": total loss " + std::to_string(tr.total) + " exceeds 10x its "
                            "initial value " + std::to_string(initial_total));

    backward(st.total);
    adam_step(params, adam, p.lr);
    for (auto& prm : params) prm.zero_grad();
  }

  // Final state from the post-update parameters, rebuilt without the tape.
  std::vector<Tensor> final_params;
  for (const auto& prm : params) final_params.push_back(detached(prm));
  ForwardState st = run_forward(p, final_params, cgrid, up_positions, moving4,
                                moving_onehot, fixed_onehot);

  for (int k = 0; k < nfields; ++k)
    report.svfs.emplace_back(cgrid, FieldRole::velocity, final_params[k]);
  report.composed = VectorField(grid, FieldRole::deformation, detached(st.composed.data));
  report.warped_moving = Volume(grid, detached(st.warped.data));
  report.warped_mask = argmax_labels(st.warped_onehot, grid);
  report.metrics = compute_metrics(report.warped_mask, p.fixed_mask);
  return report;
}

Volume warp_with(const RegistrationReport& report, const Volume& extra) {
  return warp_volume(extra, report.composed);
}

LabelMap warp_with(const RegistrationReport& report, const LabelMap& extra) {
  return argmax_labels(warp_onehot(extra, report.composed), extra.grid);
}

std::array<double, 4> per_region_min_jacobian(const RegistrationReport& report) {
  const RegistrationProblem& p = report.problem;
  const Grid& grid = p.moving.grid;
  const Tensor up_positions = upsample_positions(grid, p.svf_grid_factor);
  const std::uint8_t order[4] = {kLVBP, kLVM, kRV, kBackground};

  std::array<double, 4> mins;
  mins.fill(std::numeric_limits<double>::infinity());
  const std::size_t W = grid.extents[0], H = grid.extents[1], D = grid.extents[2];

  for (int k = 0; k < 4; ++k) {
    const VectorField& svf =
        report.svfs.size() == 4 ? report.svfs[k] : report.svfs[0];
    Tensor v_full = sample_field(svf.data, up_positions);
    VectorField phi = integrate_svf(VectorField(grid, FieldRole::velocity, v_full),
                                    p.steps);
    const Volume det = jacobian_determinant(phi);
    const double* d = det.data.data();
    // Interior voxels of this region only.
    for (std::size_t x = 1; x + 1 < W; ++x)
      for (std::size_t y = 1; y + 1 < H; ++y)
        for (std::size_t z = 1; z + 1 < D; ++z) {
          const std::size_t i = (x * H + y) * D + z;
          if (p.moving_mask.labels[i] != order[k]) continue;
          mins[k] = std::min(mins[k], d[i]);
        }
  }
  return mins;
}

}  // namespace dpreg
