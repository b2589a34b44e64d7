#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "dpreg/metrics.hpp"

using namespace dpreg;

namespace {
Grid cube(std::size_t n, double sx = 1, double sy = 1, double sz = 1) {
  return Grid{{n, n, n}, {sx, sy, sz}};
}

LabelMap boxmap(std::size_t n, std::uint8_t label, std::array<std::size_t, 3> start,
                std::array<std::size_t, 3> edge) {
  std::vector<std::uint8_t> labels(n * n * n, 0);
  for (std::size_t x = start[0]; x < start[0] + edge[0]; ++x)
    for (std::size_t y = start[1]; y < start[1] + edge[1]; ++y)
      for (std::size_t z = start[2]; z < start[2] + edge[2]; ++z)
        labels[(x * n + y) * n + z] = label;
  return LabelMap(cube(n), labels);
}
}  // namespace

TEST_CASE("dice score examples") {
  LabelMap a = boxmap(16, 1, {0, 0, 0}, {8, 8, 8});
  CHECK(dice_score(a, a, 1) == 1.0);

  LabelMap b = boxmap(16, 1, {8, 8, 8}, {8, 8, 8});
  CHECK(dice_score(a, b, 1) == 0.0);

  LabelMap shifted = boxmap(16, 1, {4, 0, 0}, {8, 8, 8});
  // Overlap 4*8*8 voxels of 512 each: 2*256/1024 = 0.5.
  CHECK(dice_score(a, shifted, 1) == doctest::Approx(0.5));

  // Empty-set conventions.
  LabelMap empty(cube(16), std::vector<std::uint8_t>(16 * 16 * 16, 0));
  CHECK(dice_score(empty, empty, 1) == 1.0);
  CHECK(dice_score(a, empty, 1) == 0.0);
}

TEST_CASE("dice is symmetric") {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> lab(0, 3);
  std::vector<std::uint8_t> la(8 * 8 * 8), lb(8 * 8 * 8);
  for (auto& l : la) l = std::uint8_t(lab(rng));
  for (auto& l : lb) l = std::uint8_t(lab(rng));
  LabelMap a(cube(8), la), b(cube(8), lb);
  for (std::uint8_t k : {std::uint8_t(1), std::uint8_t(2), std::uint8_t(3)})
    CHECK(dice_score(a, b, k) == dice_score(b, a, k));
}

TEST_CASE("hd95 analytic examples") {
  LabelMap a = boxmap(16, 1, {2, 2, 2}, {4, 4, 4});
  CHECK(hd95(a, a, 1, {1, 1, 1}) == 0.0);

  // Two single-voxel sets 3 voxels apart along x at UKBB-like spacing.
  LabelMap p = boxmap(16, 1, {4, 8, 8}, {1, 1, 1});
  LabelMap q = boxmap(16, 1, {7, 8, 8}, {1, 1, 1});
  CHECK(hd95(p, q, 1, {1.8, 1.8, 10.0}) == doctest::Approx(5.4).epsilon(1e-12));

  LabelMap empty(cube(16), std::vector<std::uint8_t>(16 * 16 * 16, 0));
  CHECK_THROWS_WITH_AS(hd95(a, empty, 1, {1, 1, 1}), doctest::Contains("undefined HD95"),
                       std::invalid_argument);
}

TEST_CASE("hd95 matches a brute-force all-pairs percentile oracle") {
  const std::size_t n = 12;
  LabelMap a = boxmap(n, 1, {1, 1, 1}, {8, 8, 8});
  LabelMap b = boxmap(n, 1, {3, 1, 1}, {8, 8, 8});

  // Oracle: recompute surfaces and the interpolated percentile from scratch.
  auto surface = [&](const LabelMap& m) {
    std::vector<std::array<double, 3>> pts;
    for (std::size_t x = 0; x < n; ++x)
      for (std::size_t y = 0; y < n; ++y)
        for (std::size_t z = 0; z < n; ++z) {
          if (m.labels[(x * n + y) * n + z] != 1) continue;
          bool edge = false;
          const long long c[3] = {(long long)x, (long long)y, (long long)z};
          for (int axis = 0; axis < 3 && !edge; ++axis)
            for (int dir = -1; dir <= 1 && !edge; dir += 2) {
              long long q[3] = {c[0], c[1], c[2]};
              q[axis] += dir;
              if (q[0] < 0 || q[1] < 0 || q[2] < 0 || q[0] >= (long long)n ||
                  q[1] >= (long long)n || q[2] >= (long long)n)
                edge = true;
              else if (m.labels[(q[0] * n + q[1]) * n + q[2]] != 1)
                edge = true;
            }
          if (edge) pts.push_back({double(x), double(y), double(z)});
        }
    return pts;
  };
  auto directed = [&](const std::vector<std::array<double, 3>>& from,
                      const std::vector<std::array<double, 3>>& to) {
    std::vector<double> d;
    for (const auto& p : from) {
      double best = 1e300;
      for (const auto& q : to)
        best = std::min(best, std::hypot(p[0] - q[0], std::hypot(p[1] - q[1], p[2] - q[2])));
      d.push_back(best);
    }
    std::sort(d.begin(), d.end());
    const double rank = 0.95 * (d.size() - 1);
    const std::size_t lo = std::size_t(rank);
    const double frac = rank - double(lo);
    return lo + 1 < d.size() ? d[lo] + frac * (d[lo + 1] - d[lo]) : d.back();
  };
  const auto sa = surface(a), sb = surface(b);
  const double oracle = std::max(directed(sa, sb), directed(sb, sa));
  CHECK(hd95(a, b, 1, {1, 1, 1}) == doctest::Approx(oracle).epsilon(1e-12));
}

TEST_CASE("hd95 is symmetric and scales linearly with spacing") {
  LabelMap a = boxmap(12, 2, {1, 2, 3}, {4, 4, 4});
  LabelMap b = boxmap(12, 2, {4, 3, 2}, {5, 4, 4});
  CHECK(hd95(a, b, 2, {1, 1, 1}) == hd95(b, a, 2, {1, 1, 1}));
  CHECK(hd95(a, b, 2, {2, 2, 2}) == doctest::Approx(2.0 * hd95(a, b, 2, {1, 1, 1})));
}

TEST_CASE("clinical indices") {
  // Empty LVBP -> zero volume.
  LabelMap empty(cube(16), std::vector<std::uint8_t>(16 * 16 * 16, 0));
  CHECK(clinical_indices(empty, {1.8, 1.8, 10}).lvedv_ml == 0.0);

  // 1000 LVBP voxels at 1.8 x 1.8 x 10 mm: 32.4 mL.
  LabelMap bp = boxmap(16, 1, {0, 0, 0}, {10, 10, 10});
  CHECK(clinical_indices(bp, {1.8, 1.8, 10}).lvedv_ml ==
        doctest::Approx(32.4).epsilon(1e-12));

  // 2000 LVM voxels at unit spacing: 2 mL -> 2.1 g at 1.05 g/mL.
  std::vector<std::uint8_t> labels(16 * 16 * 16, 0);
  for (std::size_t i = 0; i < 2000; ++i) labels[i] = 2;
  LabelMap lvm(cube(16), labels);
  const auto ci = clinical_indices(lvm, {1, 1, 1});
  CHECK(ci.lvmm_g == doctest::Approx(2.1).epsilon(1e-12));
  CHECK(ci.lvedv_ml == 0.0);
}

TEST_CASE("clinical indices depend only on voxel counts") {
  std::mt19937_64 rng(3);
  std::vector<std::uint8_t> la(8 * 8 * 8, 0), lb(8 * 8 * 8, 0);
  for (int i = 0; i < 50; ++i) la[i] = 1;
  // A scrambled map with the same counts gives identical indices.
  lb = la;
  std::shuffle(lb.begin(), lb.end(), rng);
  const auto ca = clinical_indices(LabelMap(cube(8), la), {1.5, 1.5, 2});
  const auto cb = clinical_indices(LabelMap(cube(8), lb), {1.5, 1.5, 2});
  CHECK(ca.lvedv_ml == cb.lvedv_ml);
  CHECK(ca.lvmm_g == cb.lvmm_g);
}

TEST_CASE("metrics report aggregates and dice_avg invariant") {
  LabelMap gt = boxmap(16, 1, {2, 2, 2}, {6, 6, 6});
  for (std::size_t x = 9; x < 13; ++x)
    for (std::size_t y = 2; y < 8; ++y)
      for (std::size_t z = 2; z < 8; ++z) gt.labels[(x * 16 + y) * 16 + z] = 2;
  for (std::size_t x = 2; x < 6; ++x)
    for (std::size_t y = 9; y < 13; ++y)
      for (std::size_t z = 2; z < 8; ++z) gt.labels[(x * 16 + y) * 16 + z] = 3;

  LabelMap pred = gt;  // same grid/labels
  MetricsReport m = compute_metrics(pred, gt);
  CHECK(m.dice_avg ==
        doctest::Approx((m.dice_lvbp + m.dice_lvm + m.dice_rv) / 3.0).epsilon(1e-12));
  CHECK(m.dice_avg == 1.0);
  CHECK(m.hd95_mm == 0.0);
  CHECK(std::isfinite(m.lvedv_ml));
  CHECK(std::isfinite(m.lvmm_g));

  const std::string json = metrics_to_json(m);
  CHECK(json.find("dice_avg") != std::string::npos);
  const std::string table = metrics_table(m);
  CHECK(table.find("hd95") != std::string::npos);
}
