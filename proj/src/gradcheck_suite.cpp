// The named finite-difference oracles behind `dpreg gradcheck` and the
// gradient acceptance suite. Tolerances: 1e-6 for smooth primitives, 1e-4 for
// composite operations, 1e-3 for interpolation-bearing ones.

#include <cmath>
#include <stdexcept>

#include "dpreg/coattention.hpp"
#include "dpreg/engine.hpp"
#include "dpreg/gradcheck.hpp"
#include "dpreg/losses.hpp"
#include "dpreg/phantom.hpp"
#include "dpreg/warp.hpp"

namespace dpreg {

namespace {

constexpr double kTolPrimitive = 1e-6;
constexpr double kTolComposite = 1e-4;
constexpr double kTolInterp = 1e-3;

// Displacements with fractional parts well away from the voxel lattice, so
// per-element finite differences stay inside one interpolation cell.
Tensor generic_displacement(const Shape& shape, std::mt19937_64& rng, double lo = 0.1,
                            double hi = 0.45) {
  std::uniform_real_distribution<double> mag(lo, hi);
  std::uniform_int_distribution<int> coin(0, 1);
  std::vector<double> data(shape_size(shape));
  for (auto& v : data) v = (coin(rng) ? 1.0 : -1.0) * mag(rng);
  return Tensor(shape, std::move(data), true);
}

// Smooth small velocity: coarse noise upsampled trilinearly.
Tensor smooth_velocity(const Grid& grid, std::mt19937_64& rng, double max_component) {
  const std::size_t cw = std::max<std::size_t>(2, grid.extents[0] / 4);
  const std::size_t ch = std::max<std::size_t>(2, grid.extents[1] / 4);
  const std::size_t cd = std::max<std::size_t>(2, grid.extents[2] / 4);
  Tensor coarse = random_tensor(Shape{3, cw, ch, cd}, rng, -1.0, 1.0, false);

  const std::size_t W = grid.extents[0], H = grid.extents[1], D = grid.extents[2];
  const std::size_t N = W * H * D;
  std::vector<double> pos(3 * N);
  std::size_t i = 0;
  for (std::size_t x = 0; x < W; ++x)
    for (std::size_t y = 0; y < H; ++y)
      for (std::size_t z = 0; z < D; ++z, ++i) {
        pos[i] = static_cast<double>(x) * (cw - 1.0) / (W - 1.0);
        pos[N + i] = static_cast<double>(y) * (ch - 1.0) / (H - 1.0);
        pos[2 * N + i] = static_cast<double>(z) * (cd - 1.0) / (D - 1.0);
      }
  Tensor up = sample_field(coarse, Tensor(Shape{3, W, H, D}, std::move(pos)));
  double mx = 0.0;
  for (std::size_t k = 0; k < up.size(); ++k) mx = std::max(mx, std::abs(up.data()[k]));
  std::vector<double> scaled(up.values());
  const double s = mx > 0 ? max_component / mx : 0.0;
  for (auto& v : scaled) v *= s;
  return Tensor(up.shape(), std::move(scaled), true);
}

struct CheckDef {
  const char* name;
  double tol;
  // Returns max relative error; `bias` scales the analytic side (test hook).
  std::function<double(const GradCheckOptions&, double bias)> run;
};

std::vector<CheckDef> build_checks() {
  std::vector<CheckDef> checks;

  auto weighted_sum = [](const Tensor& t, const Tensor& w) { return sum(mul(t, w)); };

  // --- autodiff primitives -------------------------------------------------
  checks.push_back({"add", kTolPrimitive, [=](const GradCheckOptions& o, double bias) {
    std::mt19937_64 rng(o.seed);
    Tensor a = random_tensor({2, 3}, rng, -2, 2), b = random_tensor({2, 3}, rng, -2, 2);
    Tensor w = random_tensor({2, 3}, rng, -2, 2, false);
    return fd_check_elementwise([&] { return weighted_sum(add(a, b), w); }, {a, b}, 1e-5,
                                bias);
  }});
  checks.push_back({"sub", kTolPrimitive, [=](const GradCheckOptions& o, double bias) {
    std::mt19937_64 rng(o.seed + 1);
    Tensor a = random_tensor({2, 3}, rng, -2, 2), b = random_tensor({2, 3}, rng, -2, 2);
    Tensor w = random_tensor({2, 3}, rng, -2, 2, false);
    return fd_check_elementwise([&] { return weighted_sum(sub(a, b), w); }, {a, b}, 1e-5,
                                bias);
  }});
  checks.push_back({"mul", kTolPrimitive, [=](const GradCheckOptions& o, double bias) {
    std::mt19937_64 rng(o.seed + 2);
    Tensor a = random_tensor({2, 3}, rng, -2, 2), b = random_tensor({3}, rng, -2, 2);
    Tensor w = random_tensor({2, 3}, rng, -2, 2, false);  // broadcast over rows
    return fd_check_elementwise([&] { return weighted_sum(mul(a, b), w); }, {a, b}, 1e-5,
                                bias);
  }});
  checks.push_back({"div", kTolPrimitive, [=](const GradCheckOptions& o, double bias) {
    std::mt19937_64 rng(o.seed + 3);
    Tensor a = random_tensor({2, 3}, rng, -2, 2), b = random_tensor({2, 3}, rng, 0.5, 2.5);
    Tensor w = random_tensor({2, 3}, rng, -2, 2, false);
    return fd_check_elementwise([&] { return weighted_sum(div(a, b), w); }, {a, b}, 1e-5,
                                bias);
  }});
  checks.push_back({"matmul", kTolPrimitive, [=](const GradCheckOptions& o, double bias) {
    std::mt19937_64 rng(o.seed + 4);
    Tensor a = random_tensor({4, 5}, rng, -2, 2), b = random_tensor({5, 3}, rng, -2, 2);
    Tensor w = random_tensor({4, 3}, rng, -2, 2, false);
    return fd_check_elementwise([&] { return weighted_sum(matmul(a, b), w); }, {a, b},
                                1e-5, bias);
  }});
  checks.push_back({"softmax", kTolPrimitive, [=](const GradCheckOptions& o, double bias) {
    std::mt19937_64 rng(o.seed + 5);
    Tensor a = random_tensor({6}, rng, -2, 2);
    Tensor w = random_tensor({6}, rng, -2, 2, false);
    return fd_check_elementwise([&] { return weighted_sum(softmax(a, 0), w); }, {a}, 1e-5,
                                bias);
  }});
  checks.push_back({"sigmoid", kTolPrimitive, [=](const GradCheckOptions& o, double bias) {
    std::mt19937_64 rng(o.seed + 6);
    Tensor a = random_tensor({2, 4}, rng, -2, 2);
    Tensor w = random_tensor({2, 4}, rng, -2, 2, false);
    return fd_check_elementwise([&] { return weighted_sum(sigmoid(a), w); }, {a}, 1e-5,
                                bias);
  }});
  checks.push_back({"exp", kTolPrimitive, [=](const GradCheckOptions& o, double bias) {
    std::mt19937_64 rng(o.seed + 7);
    Tensor a = random_tensor({2, 4}, rng, -2, 2);
    Tensor w = random_tensor({2, 4}, rng, -2, 2, false);
    return fd_check_elementwise([&] { return weighted_sum(exp(a), w); }, {a}, 1e-5, bias);
  }});
  checks.push_back({"log", kTolPrimitive, [=](const GradCheckOptions& o, double bias) {
    std::mt19937_64 rng(o.seed + 8);
    Tensor a = random_tensor({2, 4}, rng, 0.5, 2.5);
    Tensor w = random_tensor({2, 4}, rng, -2, 2, false);
    return fd_check_elementwise([&] { return weighted_sum(log(a), w); }, {a}, 1e-5, bias);
  }});
  checks.push_back({"square", kTolPrimitive, [=](const GradCheckOptions& o, double bias) {
    std::mt19937_64 rng(o.seed + 9);
    Tensor a = random_tensor({2, 4}, rng, -2, 2);
    Tensor w = random_tensor({2, 4}, rng, -2, 2, false);
    return fd_check_elementwise([&] { return weighted_sum(square(a), w); }, {a}, 1e-5,
                                bias);
  }});
  checks.push_back({"clamp", kTolPrimitive, [=](const GradCheckOptions& o, double bias) {
    std::mt19937_64 rng(o.seed + 10);
    // Keep samples clear of the clamp knees so differences stay one-sided.
    Tensor a = random_tensor({3, 3}, rng, -2, 2);
    for (std::size_t i = 0; i < a.size(); ++i) {
      double& v = a.data()[i];
      if (std::abs(std::abs(v) - 1.0) < 0.05) v += 0.1;
    }
    Tensor w = random_tensor({3, 3}, rng, -2, 2, false);
    return fd_check_elementwise([&] { return weighted_sum(clamp(a, -1.0, 1.0), w); }, {a},
                                1e-5, bias);
  }});
  checks.push_back({"sum", kTolPrimitive, [=](const GradCheckOptions& o, double bias) {
    std::mt19937_64 rng(o.seed + 11);
    Tensor a = random_tensor({2, 3, 4}, rng, -2, 2);
    Tensor w = random_tensor({2, 4}, rng, -2, 2, false);
    return fd_check_elementwise([&] { return weighted_sum(sum(a, {1}), w); }, {a}, 1e-5,
                                bias);
  }});
  checks.push_back({"mean", kTolPrimitive, [=](const GradCheckOptions& o, double bias) {
    std::mt19937_64 rng(o.seed + 12);
    Tensor a = random_tensor({2, 3, 4}, rng, -2, 2);
    Tensor w = random_tensor({3}, rng, -2, 2, false);
    return fd_check_elementwise([&] { return weighted_sum(mean(a, {0, 2}), w); }, {a},
                                1e-5, bias);
  }});
  checks.push_back({"concat", kTolPrimitive, [=](const GradCheckOptions& o, double bias) {
    std::mt19937_64 rng(o.seed + 13);
    Tensor a = random_tensor({2, 3}, rng, -2, 2), b = random_tensor({2, 4}, rng, -2, 2);
    Tensor w = random_tensor({2, 7}, rng, -2, 2, false);
    return fd_check_elementwise([&] { return weighted_sum(concat({a, b}, 1), w); }, {a, b},
                                1e-5, bias);
  }});
  checks.push_back({"slice", kTolPrimitive, [=](const GradCheckOptions& o, double bias) {
    std::mt19937_64 rng(o.seed + 14);
    Tensor a = random_tensor({4, 5}, rng, -2, 2);
    Tensor w = random_tensor({4, 2}, rng, -2, 2, false);
    return fd_check_elementwise([&] { return weighted_sum(slice(a, 1, 1, 2), w); }, {a},
                                1e-5, bias);
  }});
  checks.push_back({"reshape", kTolPrimitive, [=](const GradCheckOptions& o, double bias) {
    std::mt19937_64 rng(o.seed + 15);
    Tensor a = random_tensor({2, 6}, rng, -2, 2);
    Tensor w = random_tensor({3, 4}, rng, -2, 2, false);
    return fd_check_elementwise([&] { return weighted_sum(reshape(a, {3, 4}), w); }, {a},
                                1e-5, bias);
  }});
  checks.push_back({"transpose", kTolPrimitive, [=](const GradCheckOptions& o, double bias) {
    std::mt19937_64 rng(o.seed + 16);
    Tensor a = random_tensor({3, 5}, rng, -2, 2);
    Tensor w = random_tensor({5, 3}, rng, -2, 2, false);
    return fd_check_elementwise([&] { return weighted_sum(transpose(a), w); }, {a}, 1e-5,
                                bias);
  }});
  checks.push_back({"select_by_label", kTolPrimitive,
                    [=](const GradCheckOptions& o, double bias) {
    std::mt19937_64 rng(o.seed + 17);
    const Shape shape{3, 2, 2, 2};
    std::vector<Tensor> fields;
    for (int k = 0; k < 4; ++k) fields.push_back(random_tensor(shape, rng, -2, 2));
    std::uniform_int_distribution<int> lab(0, 3);
    std::vector<std::uint8_t> labels(8);
    for (auto& l : labels) l = static_cast<std::uint8_t>(lab(rng));
    Tensor w = random_tensor(shape, rng, -2, 2, false);
    return fd_check_elementwise(
        [&] { return weighted_sum(select_by_label(fields, labels), w); },
        {fields[0], fields[1], fields[2], fields[3]}, 1e-5, bias);
  }});

  // --- composite losses ----------------------------------------------------
  checks.push_back({"mse_loss", kTolComposite, [=](const GradCheckOptions& o, double bias) {
    std::mt19937_64 rng(o.seed + 20);
    Grid g{{3, 3, 2}, {1, 1, 1}};
    Tensor a = random_tensor({3, 3, 2}, rng, -1, 1);
    Tensor b = random_tensor({3, 3, 2}, rng, -1, 1, false);
    return fd_check_elementwise(
        [&] { return mse_loss(Volume(g, a), Volume(g, b)); }, {a}, 1e-5, bias);
  }});
  checks.push_back({"dice_loss", kTolComposite, [=](const GradCheckOptions& o, double bias) {
    std::mt19937_64 rng(o.seed + 21);
    Tensor la = random_tensor({4, 2, 2, 2}, rng, -1, 1);
    Tensor lb = random_tensor({4, 2, 2, 2}, rng, -1, 1);
    return fd_check_elementwise(
        [&] { return dice_loss(softmax(la, 0), softmax(lb, 0)); }, {la, lb}, 1e-5, bias);
  }});
  checks.push_back({"cross_entropy_seg", kTolComposite,
                    [=](const GradCheckOptions& o, double bias) {
    std::mt19937_64 rng(o.seed + 22);
    Grid g{{2, 2, 2}, {1, 1, 1}};
    Tensor logits = random_tensor({4, 2, 2, 2}, rng, -1, 1);
    std::uniform_int_distribution<int> lab(0, 3);
    std::vector<std::uint8_t> labels(8);
    for (auto& l : labels) l = static_cast<std::uint8_t>(lab(rng));
    LabelMap gt(g, labels);
    return fd_check_elementwise(
        [&] { return cross_entropy_seg(softmax(logits, 0), gt); }, {logits}, 1e-5, bias);
  }});
  checks.push_back({"total_loss", kTolComposite, [=](const GradCheckOptions& o, double bias) {
    std::mt19937_64 rng(o.seed + 23);
    Tensor s = random_tensor({1}, rng, 0, 2), m = random_tensor({1}, rng, 0, 2);
    Tensor d = random_tensor({1}, rng, 0, 2), r = random_tensor({1}, rng, 0, 2);
    LossWeights w;
    return fd_check_elementwise(
        [&] { return total_loss({s, m, d, r}, w); }, {s, m, d, r}, 1e-5, bias);
  }});
  checks.push_back({"diffusion_energy", kTolComposite,
                    [=](const GradCheckOptions& o, double bias) {
    std::mt19937_64 rng(o.seed + 24);
    Grid g{{3, 3, 3}, {1, 1, 1}};
    Tensor u = random_tensor({3, 3, 3, 3}, rng, -1, 1);
    return fd_check_elementwise(
        [&] { return diffusion_energy(VectorField(g, FieldRole::displacement, u)); }, {u},
        1e-5, bias);
  }});
  checks.push_back({"coattend", kTolComposite, [=](const GradCheckOptions& o, double bias) {
    std::mt19937_64 rng(o.seed + 25);
    const std::size_t s = o.size > 0 ? o.size : 2;
    const Shape fshape{4, s, s, s};
    // The budget guard is part of the contract; oversized requests must
    // surface the explicit error rather than run.
    Tensor fm = random_tensor(fshape, rng, -1, 1);
    Tensor ff = random_tensor(fshape, rng, -1, 1);
    CoAttentionParams params = CoAttentionParams::init(4, o.seed + 26);
    std::vector<Tensor> leaves = {fm, ff};
    for (auto& t : params.parameters()) leaves.push_back(t);
    auto f = [&] {
      auto [om, of] = coattend(FeatureMap(fm), FeatureMap(ff), params);
      Tensor w_m(om.data.shape(), 0.5);
      Tensor w_f2(of.data.shape(), 0.25);
      return add(sum(mul(om.data, w_m)), sum(mul(of.data, w_f2)));
    };
    return fd_check_elementwise(f, leaves, 1e-5, bias);
  }});

  // --- interpolation-bearing ops -------------------------------------------
  checks.push_back({"warp_volume_image", kTolInterp,
                    [=](const GradCheckOptions& o, double bias) {
    std::mt19937_64 rng(o.seed + 30);
    const std::size_t s = std::max<std::size_t>(3, o.size);
    Grid g{{s, s, std::max<std::size_t>(2, s / 2)}, {1, 1, 1}};
    Tensor img = random_tensor({g.extents[0], g.extents[1], g.extents[2]}, rng, 0, 1);
    Tensor u = generic_displacement({3, g.extents[0], g.extents[1], g.extents[2]}, rng);
    u.set_requires_grad(false);
    Tensor w = random_tensor({g.extents[0], g.extents[1], g.extents[2]}, rng, -1, 1,
                             false);
    auto f = [&] {
      VectorField phi(g, FieldRole::deformation, add(identity_grid(g), u));
      return sum(mul(warp_volume(Volume(g, img), phi).data, w));
    };
    return fd_check_elementwise(f, {img}, 1e-5, bias);
  }});
  checks.push_back({"warp_volume_positions", kTolInterp,
                    [=](const GradCheckOptions& o, double bias) {
    std::mt19937_64 rng(o.seed + 31);
    const std::size_t s = std::max<std::size_t>(3, o.size);
    Grid g{{s, s, std::max<std::size_t>(2, s / 2)}, {1, 1, 1}};
    Tensor img = random_tensor({g.extents[0], g.extents[1], g.extents[2]}, rng, 0, 1,
                               false);
    Tensor u = generic_displacement({3, g.extents[0], g.extents[1], g.extents[2]}, rng);
    Tensor w = random_tensor({g.extents[0], g.extents[1], g.extents[2]}, rng, -1, 1,
                             false);
    auto f = [&] {
      VectorField phi(g, FieldRole::deformation, add(identity_grid(g), u));
      return sum(mul(warp_volume(Volume(g, img), phi).data, w));
    };
    return fd_check_elementwise(f, {u}, 1e-5, bias);
  }});
  checks.push_back({"warp_onehot", kTolInterp, [=](const GradCheckOptions& o, double bias) {
    std::mt19937_64 rng(o.seed + 32);
    const std::size_t s = std::max<std::size_t>(3, o.size);
    Grid g{{s, s, std::max<std::size_t>(2, s / 2)}, {1, 1, 1}};
    std::uniform_int_distribution<int> lab(0, 3);
    std::vector<std::uint8_t> labels(g.voxel_count());
    for (auto& l : labels) l = static_cast<std::uint8_t>(lab(rng));
    LabelMap seg(g, labels);
    Tensor u = generic_displacement({3, g.extents[0], g.extents[1], g.extents[2]}, rng);
    Tensor w = random_tensor({4, g.extents[0], g.extents[1], g.extents[2]}, rng, -1, 1,
                             false);
    auto f = [&] {
      VectorField phi(g, FieldRole::deformation, add(identity_grid(g), u));
      return sum(mul(warp_onehot(seg, phi), w));
    };
    return fd_check_elementwise(f, {u}, 1e-5, bias);
  }});
  checks.push_back({"upsample_values", kTolInterp,
                    [=](const GradCheckOptions& o, double bias) {
    std::mt19937_64 rng(o.seed + 33);
    const std::size_t s = std::max<std::size_t>(3, o.size);
    Grid g{{2 * s, 2 * s, s}, {1, 1, 1}};
    const Shape cshape{3, s, s, std::max<std::size_t>(2, s / 2)};
    Tensor coarse = random_tensor(cshape, rng, -1, 1);
    const std::size_t W = g.extents[0], H = g.extents[1], D = g.extents[2];
    const std::size_t N = W * H * D;
    std::vector<double> pos(3 * N);
    std::size_t i = 0;
    for (std::size_t x = 0; x < W; ++x)
      for (std::size_t y = 0; y < H; ++y)
        for (std::size_t z = 0; z < D; ++z, ++i) {
          pos[i] = x * 0.5;
          pos[N + i] = y * 0.5;
          pos[2 * N + i] = z * 0.5;
        }
    Tensor positions(Shape{3, W, H, D}, std::move(pos));
    Tensor w = random_tensor({3, W, H, D}, rng, -1, 1, false);
    auto f = [&] { return sum(mul(sample_field(coarse, positions), w)); };
    return fd_check_elementwise(f, {coarse}, 1e-5, bias);
  }});
  checks.push_back({"integrate_svf", kTolInterp,
                    [=](const GradCheckOptions& o, double bias) {
    std::mt19937_64 rng(o.seed + 34);
    const std::size_t s = std::max<std::size_t>(4, o.size);
    Grid g{{s, s, std::max<std::size_t>(2, s / 2)}, {1, 1, 1}};
    Tensor v = smooth_velocity(g, rng, 0.5);
    Tensor w = random_tensor({3, g.extents[0], g.extents[1], g.extents[2]}, rng, -1, 1,
                             false);
    auto f = [&] {
      VectorField phi = integrate_svf(VectorField(g, FieldRole::velocity, v), 7);
      return sum(mul(phi.data, w));
    };
    return fd_check_directional(f, {v}, o.seed + 35, 4, 1e-5, bias);
  }});
  checks.push_back({"engine_objective", kTolInterp,
                    [=](const GradCheckOptions& o, double bias) {
    std::mt19937_64 rng(o.seed + 36);
    const std::size_t s = std::max<std::size_t>(4, o.size);
    PhantomSpec spec;
    spec.grid = Grid{{2 * s, 2 * s, s}, {1, 1, 1}};
    spec.geometry.lv_center = {s * 1.0 - 1.0, s * 1.0};
    spec.geometry.lvbp_radius = s * 0.3;
    spec.geometry.lvm_thickness = s * 0.2;
    spec.geometry.rv_offset = {s * 0.75, 0.0};
    spec.geometry.rv_radius = s * 0.25;
    spec.geometry.z_margin = 1.0;
    spec.motion.kind = MotionKind::rigid_shift;
    spec.motion.shift = {1.0, 0.0, 0.0};
    spec.noise_sigma = 0.01;
    spec.seed = o.seed;
    PhantomPair pair = generate_phantom(spec);
    const Grid& g = spec.grid;
    const Grid cg{{g.extents[0] / 2, g.extents[1] / 2, g.extents[2] / 2}, g.spacing};

    std::vector<Tensor> params;
    for (int k = 0; k < 4; ++k)
      params.push_back(random_tensor({3, cg.extents[0], cg.extents[1], cg.extents[2]},
                                     rng, -0.3, 0.3));
    const std::size_t W = g.extents[0], H = g.extents[1], D = g.extents[2];
    const std::size_t N = W * H * D;
    std::vector<double> pos(3 * N);
    std::size_t i = 0;
    for (std::size_t x = 0; x < W; ++x)
      for (std::size_t y = 0; y < H; ++y)
        for (std::size_t z = 0; z < D; ++z, ++i) {
          pos[i] = x * 0.5;
          pos[N + i] = y * 0.5;
          pos[2 * N + i] = z * 0.5;
        }
    Tensor up_positions(Shape{3, W, H, D}, std::move(pos));
    Tensor moving4 = reshape(pair.moving.data, Shape{1, W, H, D});
    Tensor moving_oh = pair.moving_mask.one_hot();
    Tensor fixed_oh = pair.fixed_mask.one_hot();
    LossWeights lw;

    auto f = [&] {
      std::array<VectorField, 4> phis;
      Tensor reg;
      for (int k = 0; k < 4; ++k) {
        Tensor vf = sample_field(params[k], up_positions);
        phis[k] = integrate_svf(VectorField(g, FieldRole::velocity, vf), 7);
        Tensor r = diffusion_energy(displacement_of(phis[k]));
        reg = (k == 0) ? r : add(reg, r);
      }
      VectorField composed = compose_fields(phis, pair.moving_mask);
      Tensor warped = sample_field(moving4, composed.data);
      Volume wv(g, reshape(warped, Shape{W, H, D}));
      Tensor woh = sample_field(moving_oh, composed.data);
      LossParts parts{Tensor::scalar(0.0), mse_loss(wv, pair.fixed),
                      dice_loss(woh, fixed_oh), mul(reg, 0.25)};
      return total_loss(parts, lw);
    };
    return fd_check_directional(f, params, o.seed + 37, 3, 1e-5, bias);
  }});

  return checks;
}

}  // namespace

std::vector<GradCheckResult> run_gradcheck_suite(const GradCheckOptions& opts) {
  std::vector<GradCheckResult> results;
  for (const auto& check : build_checks()) {
    const double bias = (opts.corrupt == check.name) ? 1.05 : 1.0;
    GradCheckResult r;
    r.name = check.name;
    r.tolerance = check.tol;
    r.max_rel_err = check.run(opts, bias);
    r.pass = r.max_rel_err < check.tol;
    results.push_back(std::move(r));
  }
  return results;
}

}  // namespace dpreg
