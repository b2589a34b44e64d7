#include "dpreg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "json.hpp"

namespace dpreg {

double dice_score(const LabelMap& a, const LabelMap& b, std::uint8_t label) {
  if (!(a.grid == b.grid))
    throw std::invalid_argument("dice_score: label maps live on different grids");
  std::size_t na = 0, nb = 0, inter = 0;
  for (std::size_t i = 0; i < a.labels.size(); ++i) {
    const bool ia = a.labels[i] == label;
    const bool ib = b.labels[i] == label;
    na += ia;
    nb += ib;
    inter += (ia && ib);
  }
  if (na == 0 && nb == 0) return 1.0;
  if (na == 0 || nb == 0) return 0.0;
  return 2.0 * static_cast<double>(inter) / static_cast<double>(na + nb);
}

namespace {

// Voxel centers (in mm) of set voxels with a six-connected neighbor outside.
std::vector<std::array<double, 3>> surface_points(const LabelMap& m, std::uint8_t label,
                                                  const std::array<double, 3>& sp) {
  const std::size_t W = m.grid.extents[0], H = m.grid.extents[1], D = m.grid.extents[2];
  auto inside = [&](long long x, long long y, long long z) {
    if (x < 0 || y < 0 || z < 0 || x >= (long long)W || y >= (long long)H ||
        z >= (long long)D)
      return false;
    return m.labels[(static_cast<std::size_t>(x) * H + static_cast<std::size_t>(y)) * D +
                    static_cast<std::size_t>(z)] == label;
  };
  std::vector<std::array<double, 3>> pts;
  for (std::size_t x = 0; x < W; ++x)
    for (std::size_t y = 0; y < H; ++y)
      for (std::size_t z = 0; z < D; ++z) {
        if (m.labels[(x * H + y) * D + z] != label) continue;
        const long long xi = (long long)x, yi = (long long)y, zi = (long long)z;
        const bool boundary = !inside(xi - 1, yi, zi) || !inside(xi + 1, yi, zi) ||
                              !inside(xi, yi - 1, zi) || !inside(xi, yi + 1, zi) ||
                              !inside(xi, yi, zi - 1) || !inside(xi, yi, zi + 1);
        if (boundary)
          pts.push_back({static_cast<double>(x) * sp[0], static_cast<double>(y) * sp[1],
                         static_cast<double>(z) * sp[2]});
      }
  return pts;
}

double percentile_95(std::vector<double>& values) {
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  if (n == 1) return values[0];
  const double rank = 0.95 * static_cast<double>(n - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(rank));
  const double frac = rank - static_cast<double>(lo);
  if (lo + 1 >= n) return values[n - 1];
  return values[lo] + frac * (values[lo + 1] - values[lo]);
}

double directed_distances_p95(const std::vector<std::array<double, 3>>& from,
                              const std::vector<std::array<double, 3>>& to) {
  std::vector<double> dists;
  dists.reserve(from.size());
  for (const auto& p : from) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& q : to) {
      const double dx = p[0] - q[0], dy = p[1] - q[1], dz = p[2] - q[2];
      best = std::min(best, dx * dx + dy * dy + dz * dz);
    }
    dists.push_back(std::sqrt(best));
  }
  return percentile_95(dists);
}

}  // namespace

double hd95(const LabelMap& a, const LabelMap& b, std::uint8_t label,
            const std::array<double, 3>& spacing_mm) {
  if (!(a.grid == b.grid))
    throw std::invalid_argument("hd95: label maps live on different grids");
  const auto sa = surface_points(a, label, spacing_mm);
  const auto sb = surface_points(b, label, spacing_mm);
  if (sa.empty() || sb.empty())
    throw std::invalid_argument("undefined HD95: structure " + std::to_string(int(label)) +
                                " is empty in " + (sa.empty() ? "the first" : "the second") +
                                " label map");
  return std::max(directed_distances_p95(sa, sb), directed_distances_p95(sb, sa));
}

ClinicalIndices clinical_indices(const LabelMap& seg,
                                 const std::array<double, 3>& spacing_mm) {
  const double voxvol = spacing_mm[0] * spacing_mm[1] * spacing_mm[2];
  ClinicalIndices out;
  out.lvedv_ml = static_cast<double>(seg.count(kLVBP)) * voxvol / 1000.0;
  out.lvmm_g = static_cast<double>(seg.count(kLVM)) * voxvol / 1000.0 * 1.05;
  return out;
}

MetricsReport compute_metrics(const LabelMap& pred, const LabelMap& gt) {
  if (!(pred.grid == gt.grid))
    throw std::invalid_argument("compute_metrics: label maps live on different grids");
  MetricsReport m;
  m.dice_lvbp = dice_score(pred, gt, kLVBP);
  m.dice_lvm = dice_score(pred, gt, kLVM);
  m.dice_rv = dice_score(pred, gt, kRV);
  m.dice_avg = (m.dice_lvbp + m.dice_lvm + m.dice_rv) / 3.0;

  double hd_sum = 0.0;
  int hd_count = 0;
  for (std::uint8_t label : {kLVBP, kLVM, kRV}) {
    if (pred.count(label) == 0 || gt.count(label) == 0) continue;
    hd_sum += hd95(pred, gt, label, pred.grid.spacing);
    ++hd_count;
  }
  m.hd95_mm = hd_count ? hd_sum / hd_count : std::numeric_limits<double>::quiet_NaN();

  const ClinicalIndices ci = clinical_indices(pred, pred.grid.spacing);
  m.lvedv_ml = ci.lvedv_ml;
  m.lvmm_g = ci.lvmm_g;
  return m;
}

std::string metrics_to_json(const MetricsReport& m) {
  nlohmann::json j;
  j["dice_lvbp"] = m.dice_lvbp;
  j["dice_lvm"] = m.dice_lvm;
  j["dice_rv"] = m.dice_rv;
  j["dice_avg"] = m.dice_avg;
  if (std::isnan(m.hd95_mm))
    j["hd95_mm"] = nullptr;
  else
    j["hd95_mm"] = m.hd95_mm;
  j["lvedv_ml"] = m.lvedv_ml;
  j["lvmm_g"] = m.lvmm_g;
  return j.dump(2);
}

std::string metrics_table(const MetricsReport& m) {
  std::ostringstream os;
  auto row = [&](const char* name, double v, const char* unit) {
    os.setf(std::ios::fixed);
    os.precision(4);
    os.width(12);
    os << std::left << name;
    os.width(12);
    os << std::right << v << "  " << unit << "\n";
  };
  row("dice_lvbp", m.dice_lvbp, "");
  row("dice_lvm", m.dice_lvm, "");
  row("dice_rv", m.dice_rv, "");
  row("dice_avg", m.dice_avg, "");
  row("hd95", m.hd95_mm, "mm");
  row("lvedv", m.lvedv_ml, "mL");
  row("lvmm", m.lvmm_g, "g");
  return os.str();
}

}  // namespace dpreg
