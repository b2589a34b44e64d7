#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "dpreg/fields.hpp"
#include "dpreg/gradcheck.hpp"
#include "dpreg/warp.hpp"
#include "oracles.hpp"

using namespace dpreg;

namespace {
Grid cube(std::size_t n) { return Grid{{n, n, n}, {1, 1, 1}}; }

Volume random_volume(const Grid& g, std::mt19937_64& rng) {
  return Volume(g, random_tensor({g.extents[0], g.extents[1], g.extents[2]}, rng, 0, 1,
                                 false));
}
}  // namespace

TEST_CASE("identity warp is exact") {
  std::mt19937_64 rng(1);
  Grid g = cube(8);
  Volume img = random_volume(g, rng);
  Volume out = warp_volume(img, identity_deformation(g));
  CHECK(out.data.values() == img.data.values());  // bitwise
}

TEST_CASE("integer shift equals array indexing in the interior") {
  Grid g = cube(8);
  const std::size_t N = g.voxel_count();
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> ints(0, 9);
  std::vector<double> vals(N);
  for (auto& v : vals) v = double(ints(rng));
  Volume img(g, Tensor(Shape{8, 8, 8}, vals));

  Tensor shift(Shape{3, 8, 8, 8}, 0.0);
  for (std::size_t i = 0; i < N; ++i) shift.data()[i] = 1.0;  // +1 along x
  VectorField phi(g, FieldRole::deformation, add(identity_grid(g), shift));
  Volume out = warp_volume(img, phi);
  for (std::size_t x = 0; x < 7; ++x)
    for (std::size_t y = 0; y < 8; ++y)
      for (std::size_t z = 0; z < 8; ++z)
        CHECK(out.data.data()[(x * 8 + y) * 8 + z] ==
              img.data.data()[((x + 1) * 8 + y) * 8 + z]);
}

TEST_CASE("warp is linear in the image argument") {
  std::mt19937_64 rng(3);
  Grid g = cube(6);
  Volume i1 = random_volume(g, rng);
  Volume i2 = random_volume(g, rng);
  Tensor u = random_tensor({3, 6, 6, 6}, rng, -1.5, 1.5, false);
  VectorField phi(g, FieldRole::deformation, add(identity_grid(g), u));

  const double a = 0.7, b = -1.3;
  Volume combo(g, add(mul(i1.data, a), mul(i2.data, b)));
  Volume w_combo = warp_volume(combo, phi);
  Volume w1 = warp_volume(i1, phi);
  Volume w2 = warp_volume(i2, phi);
  for (std::size_t i = 0; i < g.voxel_count(); ++i)
    CHECK(w_combo.data.data()[i] ==
          doctest::Approx(a * w1.data.data()[i] + b * w2.data.data()[i]).epsilon(1e-12));
}

TEST_CASE("warp gradient w.r.t. the deformation matches finite differences") {
  std::mt19937_64 rng(4);
  Grid g = cube(5);
  Volume img = random_volume(g, rng);
  // Fractional parts away from the lattice keep per-element FD inside a cell.
  std::uniform_real_distribution<double> mag(0.1, 0.45);
  std::uniform_int_distribution<int> coin(0, 1);
  Tensor u(Shape{3, 5, 5, 5}, 0.0, true);
  for (std::size_t i = 0; i < u.size(); ++i)
    u.data()[i] = (coin(rng) ? 1 : -1) * mag(rng);
  Tensor w = random_tensor({5, 5, 5}, rng, -1, 1, false);
  auto f = [&] {
    VectorField phi(g, FieldRole::deformation, add(identity_grid(g), u));
    return sum(mul(warp_volume(img, phi).data, w));
  };
  CHECK(fd_check_elementwise(f, {u}) < 1e-3);
}

TEST_CASE("warp gradient w.r.t. the image matches finite differences") {
  std::mt19937_64 rng(5);
  Grid g = cube(4);
  Tensor img = random_tensor({4, 4, 4}, rng, 0, 1);
  Tensor u = random_tensor({3, 4, 4, 4}, rng, -0.45, 0.45, false);
  auto f = [&] {
    VectorField phi(g, FieldRole::deformation, add(identity_grid(g), u));
    return sum(warp_volume(Volume(g, img), phi).data);
  };
  CHECK(fd_check_elementwise(f, {img}) < 1e-3);
}

TEST_CASE("svf warp followed by inverse svf warp restores a smooth image") {
  std::mt19937_64 rng(6);
  Grid g = cube(16);
  const std::size_t N = g.voxel_count();
  // Smooth test image.
  std::vector<double> img(N);
  for (std::size_t x = 0; x < 16; ++x)
    for (std::size_t y = 0; y < 16; ++y)
      for (std::size_t z = 0; z < 16; ++z)
        img[(x * 16 + y) * 16 + z] =
            0.5 + 0.5 * std::sin(x * 0.4) * std::cos(y * 0.3) * std::sin(z * 0.5 + 1.0);
  Volume vol(g, Tensor(Shape{16, 16, 16}, img));

  Tensor v = oracles::smooth_random_velocity(g, rng, 1.0);
  VectorField phi = integrate_svf(VectorField(g, FieldRole::velocity, v), 7);
  VectorField phi_inv =
      integrate_svf(VectorField(g, FieldRole::velocity, neg(v)), 7);
  Volume roundtrip = warp_volume(warp_volume(vol, phi), phi_inv);

  double mean_abs = 0;
  for (std::size_t i = 0; i < N; ++i)
    mean_abs += std::abs(roundtrip.data.data()[i] - vol.data.data()[i]);
  mean_abs /= double(N);
  CHECK(mean_abs < 0.02);
}

TEST_CASE("warp_onehot: identity is exact, channels sum to one, shifts move labels") {
  Grid g = cube(8);
  const std::size_t N = g.voxel_count();
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> lab(0, 3);
  std::vector<std::uint8_t> labels(N);
  for (auto& l : labels) l = std::uint8_t(lab(rng));
  LabelMap seg(g, labels);

  Tensor oh_id = warp_onehot(seg, identity_deformation(g));
  CHECK(oh_id.values() == seg.one_hot().values());

  Tensor u = random_tensor({3, 8, 8, 8}, rng, -1.5, 1.5, false);
  VectorField phi(g, FieldRole::deformation, add(identity_grid(g), u));
  Tensor oh = warp_onehot(seg, phi);
  for (std::size_t i = 0; i < N; ++i) {
    double s = 0;
    for (int c = 0; c < 4; ++c) s += oh.data()[c * N + i];
    CHECK(s == doctest::Approx(1.0).epsilon(1e-9));
  }

  Tensor shift(Shape{3, 8, 8, 8}, 0.0);
  for (std::size_t i = 0; i < N; ++i) shift.data()[N + i] = 2.0;  // +2 along y
  VectorField phi2(g, FieldRole::deformation, add(identity_grid(g), shift));
  LabelMap moved = argmax_labels(warp_onehot(seg, phi2), g);
  for (std::size_t x = 0; x < 8; ++x)
    for (std::size_t y = 0; y < 6; ++y)
      for (std::size_t z = 0; z < 8; ++z)
        CHECK(moved.labels[(x * 8 + y) * 8 + z] == labels[(x * 8 + y + 2) * 8 + z]);
}

TEST_CASE("argmax ties resolve to the lowest label") {
  Grid g = cube(2);
  Tensor oh(Shape{4, 2, 2, 2}, 0.25);  // all-tied soft labels
  LabelMap m = argmax_labels(oh, g);
  for (auto l : m.labels) CHECK(l == 0);
}

TEST_CASE("grid mismatch errors") {
  std::mt19937_64 rng(8);
  Volume img = random_volume(cube(4), rng);
  CHECK_THROWS_AS(warp_volume(img, identity_deformation(cube(5))), std::invalid_argument);
}
