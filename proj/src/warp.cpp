#include "dpreg/warp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace dpreg {

namespace {

// Corner indices and interpolation fractions for one clamped sample position.
struct CellRef {
  std::size_t x0, y0, z0;
  std::size_t x1, y1, z1;
  double fx, fy, fz;
  bool open_x, open_y, open_z;  // position strictly inside (0, E-1)
};

inline CellRef locate(double px, double py, double pz, std::size_t W, std::size_t H,
                      std::size_t D) {
  CellRef c;
  const double ex = static_cast<double>(W - 1);
  const double ey = static_cast<double>(H - 1);
  const double ez = static_cast<double>(D - 1);
  c.open_x = px > 0.0 && px < ex;
  c.open_y = py > 0.0 && py < ey;
  c.open_z = pz > 0.0 && pz < ez;
  const double qx = std::min(std::max(px, 0.0), ex);
  const double qy = std::min(std::max(py, 0.0), ey);
  const double qz = std::min(std::max(pz, 0.0), ez);
  double x0 = std::floor(qx), y0 = std::floor(qy), z0 = std::floor(qz);
  if (W >= 2 && x0 > static_cast<double>(W - 2)) x0 = static_cast<double>(W - 2);
  if (H >= 2 && y0 > static_cast<double>(H - 2)) y0 = static_cast<double>(H - 2);
  if (D >= 2 && z0 > static_cast<double>(D - 2)) z0 = static_cast<double>(D - 2);
  c.x0 = static_cast<std::size_t>(x0);
  c.y0 = static_cast<std::size_t>(y0);
  c.z0 = static_cast<std::size_t>(z0);
  c.x1 = (W >= 2) ? c.x0 + 1 : c.x0;
  c.y1 = (H >= 2) ? c.y0 + 1 : c.y0;
  c.z1 = (D >= 2) ? c.z0 + 1 : c.z0;
  c.fx = qx - x0;
  c.fy = qy - y0;
  c.fz = qz - z0;
  return c;
}

}  // namespace

Tensor sample_field(const Tensor& values, const Tensor& positions) {
  if (values.rank() != 4)
    throw std::invalid_argument("sample_field: values must be (C,W,H,D), got " +
                                shape_str(values.shape()));
  if (positions.rank() != 4 || positions.shape()[0] != 3)
    throw std::invalid_argument("sample_field: positions must be (3,W,H,D), got " +
                                shape_str(positions.shape()));
  const std::size_t C = values.shape()[0];
  const std::size_t Wv = values.shape()[1], Hv = values.shape()[2], Dv = values.shape()[3];
  const std::size_t W = positions.shape()[1], H = positions.shape()[2],
                    D = positions.shape()[3];
  const std::size_t N = W * H * D;
  const std::size_t Nv = Wv * Hv * Dv;

  std::vector<double> out(C * N);
  const double* val = values.data();
  const double* pos = positions.data();

#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (N >= 4096)
#endif
  for (long long ii = 0; ii < static_cast<long long>(N); ++ii) {
    const std::size_t i = static_cast<std::size_t>(ii);
    const CellRef cl = locate(pos[i], pos[N + i], pos[2 * N + i], Wv, Hv, Dv);
    const double w000 = (1 - cl.fx) * (1 - cl.fy) * (1 - cl.fz);
    const double w001 = (1 - cl.fx) * (1 - cl.fy) * cl.fz;
    const double w010 = (1 - cl.fx) * cl.fy * (1 - cl.fz);
    const double w011 = (1 - cl.fx) * cl.fy * cl.fz;
    const double w100 = cl.fx * (1 - cl.fy) * (1 - cl.fz);
    const double w101 = cl.fx * (1 - cl.fy) * cl.fz;
    const double w110 = cl.fx * cl.fy * (1 - cl.fz);
    const double w111 = cl.fx * cl.fy * cl.fz;
    const std::size_t i000 = (cl.x0 * Hv + cl.y0) * Dv + cl.z0;
    const std::size_t i001 = (cl.x0 * Hv + cl.y0) * Dv + cl.z1;
    const std::size_t i010 = (cl.x0 * Hv + cl.y1) * Dv + cl.z0;
    const std::size_t i011 = (cl.x0 * Hv + cl.y1) * Dv + cl.z1;
    const std::size_t i100 = (cl.x1 * Hv + cl.y0) * Dv + cl.z0;
    const std::size_t i101 = (cl.x1 * Hv + cl.y0) * Dv + cl.z1;
    const std::size_t i110 = (cl.x1 * Hv + cl.y1) * Dv + cl.z0;
    const std::size_t i111 = (cl.x1 * Hv + cl.y1) * Dv + cl.z1;
    for (std::size_t c = 0; c < C; ++c) {
      const double* v = val + c * Nv;
      out[c * N + i] = w000 * v[i000] + w001 * v[i001] + w010 * v[i010] + w011 * v[i011] +
                       w100 * v[i100] + w101 * v[i101] + w110 * v[i110] + w111 * v[i111];
    }
  }

  Shape out_shape{C, W, H, D};
  return make_op(
      "sample_field", {values, positions}, std::move(out_shape), std::move(out),
      [values, positions, C, Wv, Hv, Dv, W, H, D, N, Nv](const Tensor& o) {
        const double* g = o.impl()->grad.data();
        const double* val = values.data();
        const double* pos = positions.data();
        const bool need_values = values.requires_grad();
        const bool need_pos = positions.requires_grad();

        if (need_values) {
          // Scatter; kept serial so accumulation order is fixed.
          auto& gv = values.impl()->grad_buffer();
          for (std::size_t i = 0; i < N; ++i) {
            const CellRef cl = locate(pos[i], pos[N + i], pos[2 * N + i], Wv, Hv, Dv);
            const double w000 = (1 - cl.fx) * (1 - cl.fy) * (1 - cl.fz);
            const double w001 = (1 - cl.fx) * (1 - cl.fy) * cl.fz;
            const double w010 = (1 - cl.fx) * cl.fy * (1 - cl.fz);
            const double w011 = (1 - cl.fx) * cl.fy * cl.fz;
            const double w100 = cl.fx * (1 - cl.fy) * (1 - cl.fz);
            const double w101 = cl.fx * (1 - cl.fy) * cl.fz;
            const double w110 = cl.fx * cl.fy * (1 - cl.fz);
            const double w111 = cl.fx * cl.fy * cl.fz;
            const std::size_t i000 = (cl.x0 * Hv + cl.y0) * Dv + cl.z0;
            const std::size_t i001 = (cl.x0 * Hv + cl.y0) * Dv + cl.z1;
            const std::size_t i010 = (cl.x0 * Hv + cl.y1) * Dv + cl.z0;
            const std::size_t i011 = (cl.x0 * Hv + cl.y1) * Dv + cl.z1;
            const std::size_t i100 = (cl.x1 * Hv + cl.y0) * Dv + cl.z0;
            const std::size_t i101 = (cl.x1 * Hv + cl.y0) * Dv + cl.z1;
            const std::size_t i110 = (cl.x1 * Hv + cl.y1) * Dv + cl.z0;
            const std::size_t i111 = (cl.x1 * Hv + cl.y1) * Dv + cl.z1;
            for (std::size_t c = 0; c < C; ++c) {
              const double gc = g[c * N + i];
              double* gvc = gv.data() + c * Nv;
              gvc[i000] += gc * w000;
              gvc[i001] += gc * w001;
              gvc[i010] += gc * w010;
              gvc[i011] += gc * w011;
              gvc[i100] += gc * w100;
              gvc[i101] += gc * w101;
              gvc[i110] += gc * w110;
              gvc[i111] += gc * w111;
            }
          }
        }

        if (need_pos) {
          auto& gp = positions.impl()->grad_buffer();
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (N >= 4096)
#endif
          for (long long ii = 0; ii < static_cast<long long>(N); ++ii) {
            const std::size_t i = static_cast<std::size_t>(ii);
            const CellRef cl = locate(pos[i], pos[N + i], pos[2 * N + i], Wv, Hv, Dv);
            const std::size_t i000 = (cl.x0 * Hv + cl.y0) * Dv + cl.z0;
            const std::size_t i001 = (cl.x0 * Hv + cl.y0) * Dv + cl.z1;
            const std::size_t i010 = (cl.x0 * Hv + cl.y1) * Dv + cl.z0;
            const std::size_t i011 = (cl.x0 * Hv + cl.y1) * Dv + cl.z1;
            const std::size_t i100 = (cl.x1 * Hv + cl.y0) * Dv + cl.z0;
            const std::size_t i101 = (cl.x1 * Hv + cl.y0) * Dv + cl.z1;
            const std::size_t i110 = (cl.x1 * Hv + cl.y1) * Dv + cl.z0;
            const std::size_t i111 = (cl.x1 * Hv + cl.y1) * Dv + cl.z1;
            double ax = 0.0, ay = 0.0, az = 0.0;
            for (std::size_t c = 0; c < C; ++c) {
              const double gc = g[c * N + i];
              if (gc == 0.0) continue;
              const double* v = val + c * Nv;
              const double v000 = v[i000], v001 = v[i001], v010 = v[i010], v011 = v[i011];
              const double v100 = v[i100], v101 = v[i101], v110 = v[i110], v111 = v[i111];
              // d(out)/d(frac) per axis.
              const double dx = (1 - cl.fy) * (1 - cl.fz) * (v100 - v000) +
                                (1 - cl.fy) * cl.fz * (v101 - v001) +
                                cl.fy * (1 - cl.fz) * (v110 - v010) +
                                cl.fy * cl.fz * (v111 - v011);
              const double dy = (1 - cl.fx) * (1 - cl.fz) * (v010 - v000) +
                                (1 - cl.fx) * cl.fz * (v011 - v001) +
                                cl.fx * (1 - cl.fz) * (v110 - v100) +
                                cl.fx * cl.fz * (v111 - v101);
              const double dz = (1 - cl.fx) * (1 - cl.fy) * (v001 - v000) +
                                (1 - cl.fx) * cl.fy * (v011 - v010) +
                                cl.fx * (1 - cl.fy) * (v101 - v100) +
                                cl.fx * cl.fy * (v111 - v110);
              ax += gc * dx;
              ay += gc * dy;
              az += gc * dz;
            }
            if (cl.open_x) gp[i] += ax;
            if (cl.open_y) gp[N + i] += ay;
            if (cl.open_z) gp[2 * N + i] += az;
          }
        }
      });
}

Tensor self_compose_displacement(const Tensor& u) {
  if (u.rank() != 4 || u.shape()[0] != 3)
    throw std::invalid_argument("self_compose_displacement: expected (3,W,H,D), got " +
                                shape_str(u.shape()));
  const std::size_t W = u.shape()[1], H = u.shape()[2], D = u.shape()[3];
  const std::size_t N = W * H * D;
  const double* ud = u.data();

  std::vector<double> out(3 * N);
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (N >= 4096)
#endif
  for (long long xx = 0; xx < static_cast<long long>(W); ++xx) {
    const std::size_t x = static_cast<std::size_t>(xx);
    for (std::size_t y = 0; y < H; ++y)
      for (std::size_t z = 0; z < D; ++z) {
        const std::size_t i = (x * H + y) * D + z;
        const CellRef cl = locate(double(x) + ud[i], double(y) + ud[N + i],
                                  double(z) + ud[2 * N + i], W, H, D);
        const double w000 = (1 - cl.fx) * (1 - cl.fy) * (1 - cl.fz);
        const double w001 = (1 - cl.fx) * (1 - cl.fy) * cl.fz;
        const double w010 = (1 - cl.fx) * cl.fy * (1 - cl.fz);
        const double w011 = (1 - cl.fx) * cl.fy * cl.fz;
        const double w100 = cl.fx * (1 - cl.fy) * (1 - cl.fz);
        const double w101 = cl.fx * (1 - cl.fy) * cl.fz;
        const double w110 = cl.fx * cl.fy * (1 - cl.fz);
        const double w111 = cl.fx * cl.fy * cl.fz;
        const std::size_t i000 = (cl.x0 * H + cl.y0) * D + cl.z0;
        const std::size_t i001 = (cl.x0 * H + cl.y0) * D + cl.z1;
        const std::size_t i010 = (cl.x0 * H + cl.y1) * D + cl.z0;
        const std::size_t i011 = (cl.x0 * H + cl.y1) * D + cl.z1;
        const std::size_t i100 = (cl.x1 * H + cl.y0) * D + cl.z0;
        const std::size_t i101 = (cl.x1 * H + cl.y0) * D + cl.z1;
        const std::size_t i110 = (cl.x1 * H + cl.y1) * D + cl.z0;
        const std::size_t i111 = (cl.x1 * H + cl.y1) * D + cl.z1;
        for (std::size_t c = 0; c < 3; ++c) {
          const double* v = ud + c * N;
          out[c * N + i] = v[i] + w000 * v[i000] + w001 * v[i001] + w010 * v[i010] +
                           w011 * v[i011] + w100 * v[i100] + w101 * v[i101] +
                           w110 * v[i110] + w111 * v[i111];
        }
      }
  }

  return make_op(
      "self_compose_displacement", {u}, u.shape(), std::move(out),
      [u, W, H, D, N](const Tensor& o) {
        if (!u.requires_grad()) return;
        const double* g = o.impl()->grad.data();
        const double* ud = u.data();
        auto& gu = u.impl()->grad_buffer();
        // Serial: the value-scatter and the direct/position terms all land in
        // the same buffer and their accumulation order must stay fixed.
        for (std::size_t x = 0; x < W; ++x)
          for (std::size_t y = 0; y < H; ++y)
            for (std::size_t z = 0; z < D; ++z) {
              const std::size_t i = (x * H + y) * D + z;
              const CellRef cl = locate(double(x) + ud[i], double(y) + ud[N + i],
                                        double(z) + ud[2 * N + i], W, H, D);
              const double w000 = (1 - cl.fx) * (1 - cl.fy) * (1 - cl.fz);
              const double w001 = (1 - cl.fx) * (1 - cl.fy) * cl.fz;
              const double w010 = (1 - cl.fx) * cl.fy * (1 - cl.fz);
              const double w011 = (1 - cl.fx) * cl.fy * cl.fz;
              const double w100 = cl.fx * (1 - cl.fy) * (1 - cl.fz);
              const double w101 = cl.fx * (1 - cl.fy) * cl.fz;
              const double w110 = cl.fx * cl.fy * (1 - cl.fz);
              const double w111 = cl.fx * cl.fy * cl.fz;
              const std::size_t i000 = (cl.x0 * H + cl.y0) * D + cl.z0;
              const std::size_t i001 = (cl.x0 * H + cl.y0) * D + cl.z1;
              const std::size_t i010 = (cl.x0 * H + cl.y1) * D + cl.z0;
              const std::size_t i011 = (cl.x0 * H + cl.y1) * D + cl.z1;
              const std::size_t i100 = (cl.x1 * H + cl.y0) * D + cl.z0;
              const std::size_t i101 = (cl.x1 * H + cl.y0) * D + cl.z1;
              const std::size_t i110 = (cl.x1 * H + cl.y1) * D + cl.z0;
              const std::size_t i111 = (cl.x1 * H + cl.y1) * D + cl.z1;
              double ax = 0.0, ay = 0.0, az = 0.0;
              for (std::size_t c = 0; c < 3; ++c) {
                const double gc = g[c * N + i];
                gu[c * N + i] += gc;  // direct u(x) term
                if (gc == 0.0) continue;
                double* guc = gu.data() + c * N;
                guc[i000] += gc * w000;
                guc[i001] += gc * w001;
                guc[i010] += gc * w010;
                guc[i011] += gc * w011;
                guc[i100] += gc * w100;
                guc[i101] += gc * w101;
                guc[i110] += gc * w110;
                guc[i111] += gc * w111;
                const double* v = ud + c * N;
                const double v000 = v[i000], v001 = v[i001], v010 = v[i010],
                             v011 = v[i011], v100 = v[i100], v101 = v[i101],
                             v110 = v[i110], v111 = v[i111];
                ax += gc * ((1 - cl.fy) * (1 - cl.fz) * (v100 - v000) +
                            (1 - cl.fy) * cl.fz * (v101 - v001) +
                            cl.fy * (1 - cl.fz) * (v110 - v010) +
                            cl.fy * cl.fz * (v111 - v011));
                ay += gc * ((1 - cl.fx) * (1 - cl.fz) * (v010 - v000) +
                            (1 - cl.fx) * cl.fz * (v011 - v001) +
                            cl.fx * (1 - cl.fz) * (v110 - v100) +
                            cl.fx * cl.fz * (v111 - v101));
                az += gc * ((1 - cl.fx) * (1 - cl.fy) * (v001 - v000) +
                            (1 - cl.fx) * cl.fy * (v011 - v010) +
                            cl.fx * (1 - cl.fy) * (v101 - v100) +
                            cl.fx * cl.fy * (v111 - v110));
              }
              if (cl.open_x) gu[i] += ax;
              if (cl.open_y) gu[N + i] += ay;
              if (cl.open_z) gu[2 * N + i] += az;
            }
      });
}

Volume warp_volume(const Volume& img, const VectorField& phi) {
  if (!(img.grid == phi.grid))
    throw std::invalid_argument("warp_volume: image and deformation grids differ");
  if (phi.role != FieldRole::deformation)
    throw std::invalid_argument("warp_volume: field role must be deformation");
  const auto& e = img.grid.extents;
  Tensor img4 = reshape(img.data, Shape{1, e[0], e[1], e[2]});
  Tensor warped = sample_field(img4, phi.data);
  return Volume(img.grid, reshape(warped, Shape{e[0], e[1], e[2]}));
}

Tensor warp_onehot(const LabelMap& seg, const VectorField& phi) {
  if (!(seg.grid == phi.grid))
    throw std::invalid_argument("warp_onehot: label map and deformation grids differ");
  if (phi.role != FieldRole::deformation)
    throw std::invalid_argument("warp_onehot: field role must be deformation");
  return sample_field(seg.one_hot(), phi.data);
}

LabelMap argmax_labels(const Tensor& onehot, const Grid& grid) {
  if (onehot.rank() != 4 || onehot.shape()[0] != kNumLabels)
    throw std::invalid_argument("argmax_labels: expected (4,W,H,D), got " +
                                shape_str(onehot.shape()));
  const std::size_t N = grid.voxel_count();
  if (onehot.size() != kNumLabels * N)
    throw std::invalid_argument("argmax_labels: tensor does not match grid");
  std::vector<std::uint8_t> labels(N);
  const double* p = onehot.data();
  for (std::size_t i = 0; i < N; ++i) {
    int best = 0;
    double best_v = p[i];
    for (int c = 1; c < kNumLabels; ++c) {
      const double v = p[c * N + i];
      if (v > best_v) {  // ties keep the lowest label
        best_v = v;
        best = c;
      }
    }
    labels[i] = static_cast<std::uint8_t>(best);
  }
  return LabelMap(grid, std::move(labels));
}

}  // namespace dpreg
