#include "dpreg/preprocess.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dpreg {

namespace {

std::vector<double> quantile_table(std::vector<double> sorted, int levels) {
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  std::vector<double> q(levels);
  for (int j = 0; j < levels; ++j) {
    const double rank =
        static_cast<double>(j) / (levels - 1) * static_cast<double>(n - 1);
    const std::size_t lo = static_cast<std::size_t>(std::floor(rank));
    const double frac = rank - static_cast<double>(lo);
    q[j] = (lo + 1 < n) ? sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]) : sorted[n - 1];
  }
  return q;
}

// Per-axis crop/pad window: the extra voxel of odd differences goes left.
struct AxisWindow {
  std::size_t src_start, copy_len, dst_start;
};

AxisWindow axis_window(std::size_t cur, std::size_t target) {
  AxisWindow w{0, cur, 0};
  if (cur > target) {
    const std::size_t diff = cur - target;
    w.src_start = (diff + 1) / 2;
    w.copy_len = target;
  } else if (cur < target) {
    const std::size_t diff = target - cur;
    w.dst_start = (diff + 1) / 2;
  }
  return w;
}

template <class T>
std::vector<T> crop_pad_raw(const std::vector<T>& src,
                            const std::array<std::size_t, 3>& cur,
                            const std::array<std::size_t, 3>& target, T fill) {
  const AxisWindow wx = axis_window(cur[0], target[0]);
  const AxisWindow wy = axis_window(cur[1], target[1]);
  const AxisWindow wz = axis_window(cur[2], target[2]);
  std::vector<T> out(target[0] * target[1] * target[2], fill);
  for (std::size_t x = 0; x < wx.copy_len; ++x)
    for (std::size_t y = 0; y < wy.copy_len; ++y)
      for (std::size_t z = 0; z < wz.copy_len; ++z) {
        const std::size_t si =
            ((x + wx.src_start) * cur[1] + (y + wy.src_start)) * cur[2] + (z + wz.src_start);
        const std::size_t di =
            ((x + wx.dst_start) * target[1] + (y + wy.dst_start)) * target[2] +
            (z + wz.dst_start);
        out[di] = src[si];
      }
  return out;
}

}  // namespace

Volume histogram_match(const Volume& src, const Volume& ref, int levels) {
  if (levels < 2)
    throw std::invalid_argument("histogram_match: levels must be >= 2, got " +
                                std::to_string(levels));
  const auto qs = quantile_table(src.data.values(), levels);
  const auto qr = quantile_table(ref.data.values(), levels);

  std::vector<double> out(src.data.size());
  const double* p = src.data.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double v = p[i];
    if (v <= qs.front()) {
      out[i] = qr.front();
      continue;
    }
    if (v >= qs.back()) {
      out[i] = qr.back();
      continue;
    }
    const auto it = std::upper_bound(qs.begin(), qs.end(), v);
    std::size_t j = static_cast<std::size_t>(it - qs.begin()) - 1;
    const double width = qs[j + 1] - qs[j];
    const double frac = width > 0.0 ? (v - qs[j]) / width : 0.0;
    out[i] = qr[j] + frac * (qr[j + 1] - qr[j]);
  }
  return Volume(src.grid, Tensor(src.data.shape(), std::move(out)));
}

Volume crop_pad(const Volume& img, const std::array<std::size_t, 3>& target) {
  for (auto t : target)
    if (t == 0) throw std::invalid_argument("crop_pad: target extents must be positive");
  Grid g = img.grid;
  g.extents = target;
  auto out = crop_pad_raw(img.data.values(), img.grid.extents, target, 0.0);
  return Volume(g, Tensor(Shape{target[0], target[1], target[2]}, std::move(out)));
}

LabelMap crop_pad(const LabelMap& map, const std::array<std::size_t, 3>& target) {
  for (auto t : target)
    if (t == 0) throw std::invalid_argument("crop_pad: target extents must be positive");
  Grid g = map.grid;
  g.extents = target;
  auto out = crop_pad_raw(map.labels, map.grid.extents, target,
                          static_cast<std::uint8_t>(kBackground));
  return LabelMap(g, std::move(out));
}

}  // namespace dpreg
