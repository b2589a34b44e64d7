#include "dpreg/fields.hpp"

#include <cmath>
#include <stdexcept>

#include "dpreg/warp.hpp"

namespace dpreg {

void Grid::validate() const {
  for (int a = 0; a < 3; ++a) {
    if (extents[a] < 2)
      throw std::invalid_argument("grid extents must be >= 2 per axis (gradients need "
                                  "neighbors), axis " + std::to_string(a) + " has " +
                                  std::to_string(extents[a]));
    if (!(spacing[a] > 0.0))
      throw std::invalid_argument("grid spacing must be positive, axis " +
                                  std::to_string(a));
  }
}

Volume::Volume(Grid g, Tensor t) : grid(g), data(std::move(t)) {
  if (data.shape() != Shape{g.extents[0], g.extents[1], g.extents[2]})
    throw std::invalid_argument("volume data shape " + shape_str(data.shape()) +
                                " does not match grid");
}

LabelMap::LabelMap(Grid g, std::vector<std::uint8_t> values)
    : grid(g), labels(std::move(values)) {
  if (labels.size() != grid.voxel_count())
    throw std::invalid_argument("label map has " + std::to_string(labels.size()) +
                                " voxels, grid expects " +
                                std::to_string(grid.voxel_count()));
  for (auto v : labels)
    if (v >= kNumLabels)
      throw std::invalid_argument("label value " + std::to_string(int(v)) +
                                  " outside {0..3}");
}

Tensor LabelMap::one_hot() const {
  const std::size_t N = grid.voxel_count();
  std::vector<double> data(kNumLabels * N, 0.0);
  for (std::size_t i = 0; i < N; ++i) data[labels[i] * N + i] = 1.0;
  return Tensor(Shape{kNumLabels, grid.extents[0], grid.extents[1], grid.extents[2]},
                std::move(data));
}

std::size_t LabelMap::count(std::uint8_t label) const {
  std::size_t n = 0;
  for (auto v : labels) n += (v == label);
  return n;
}

VectorField::VectorField(Grid g, FieldRole r, Tensor t)
    : grid(g), role(r), data(std::move(t)) {
  if (data.shape() != Shape{3, g.extents[0], g.extents[1], g.extents[2]})
    throw std::invalid_argument("vector field data shape " + shape_str(data.shape()) +
                                " does not match grid");
}

Tensor identity_grid(const Grid& grid) {
  const std::size_t W = grid.extents[0], H = grid.extents[1], D = grid.extents[2];
  const std::size_t N = W * H * D;
  std::vector<double> data(3 * N);
  std::size_t i = 0;
  for (std::size_t x = 0; x < W; ++x)
    for (std::size_t y = 0; y < H; ++y)
      for (std::size_t z = 0; z < D; ++z, ++i) {
        data[i] = static_cast<double>(x);
        data[N + i] = static_cast<double>(y);
        data[2 * N + i] = static_cast<double>(z);
      }
  return Tensor(Shape{3, W, H, D}, std::move(data));
}

VectorField identity_deformation(const Grid& grid) {
  return VectorField(grid, FieldRole::deformation, identity_grid(grid));
}

VectorField deformation_from_displacement(const VectorField& u) {
  if (u.role != FieldRole::displacement)
    throw std::invalid_argument("deformation_from_displacement: expects displacement role");
  return VectorField(u.grid, FieldRole::deformation, add(identity_grid(u.grid), u.data));
}

VectorField displacement_of(const VectorField& phi) {
  if (phi.role != FieldRole::deformation)
    throw std::invalid_argument("displacement_of: expects deformation role");
  return VectorField(phi.grid, FieldRole::displacement,
                     sub(phi.data, identity_grid(phi.grid)));
}

VectorField integrate_svf(const VectorField& v, int steps) {
  if (v.role != FieldRole::velocity)
    throw std::invalid_argument("integrate_svf: field role must be velocity");
  if (steps < 1)
    throw std::invalid_argument("integrate_svf: steps must be >= 1, got " +
                                std::to_string(steps));
  Tensor u = mul(v.data, std::ldexp(1.0, -steps));  // v / 2^steps
  for (int k = 0; k < steps; ++k) u = self_compose_displacement(u);
  return VectorField(v.grid, FieldRole::deformation, add(identity_grid(v.grid), u));
}

Tensor select_by_label(const std::vector<Tensor>& fields_by_label,
                       const std::vector<std::uint8_t>& labels) {
  if (fields_by_label.empty())
    throw std::invalid_argument("select_by_label: needs at least one field");
  const Shape& shape = fields_by_label[0].shape();
  for (const auto& f : fields_by_label)
    if (f.shape() != shape)
      throw std::invalid_argument("select_by_label: field shapes differ");
  if (shape.empty() || shape_size(shape) % shape[0] != 0)
    throw std::invalid_argument("select_by_label: bad field shape " + shape_str(shape));
  const std::size_t C = shape[0];
  const std::size_t N = shape_size(shape) / C;
  if (labels.size() != N)
    throw std::invalid_argument("select_by_label: label count " +
                                std::to_string(labels.size()) + " does not match " +
                                std::to_string(N) + " voxels");
  for (auto l : labels)
    if (l >= fields_by_label.size())
      throw std::invalid_argument("select_by_label: label exceeds field list");

  std::vector<double> out(C * N);
  for (std::size_t i = 0; i < N; ++i) {
    const double* src = fields_by_label[labels[i]].data();
    for (std::size_t c = 0; c < C; ++c) out[c * N + i] = src[c * N + i];
  }
  return make_op("select_by_label", fields_by_label, shape, std::move(out),
                 [fields = fields_by_label, labels, C, N](const Tensor& o) {
                   const double* g = o.impl()->grad.data();
                   std::vector<std::vector<double>*> bufs(fields.size(), nullptr);
                   for (std::size_t k = 0; k < fields.size(); ++k)
                     if (fields[k].requires_grad())
                       bufs[k] = &fields[k].impl()->grad_buffer();
                   for (std::size_t i = 0; i < N; ++i) {
                     auto* buf = bufs[labels[i]];
                     if (!buf) continue;
                     for (std::size_t c = 0; c < C; ++c)
                       (*buf)[c * N + i] += g[c * N + i];
                   }
                 });
}

VectorField compose_fields(const std::array<VectorField, 4>& phis, const LabelMap& masks) {
  for (const auto& p : phis) {
    if (!(p.grid == masks.grid))
      throw std::invalid_argument("compose_fields: all fields and masks must share a grid");
    if (p.role != FieldRole::deformation)
      throw std::invalid_argument("compose_fields: all fields must have deformation role");
  }
  // Input is ordered (LVBP, LVM, RV, background); selection is by label value.
  std::vector<Tensor> by_label = {phis[3].data, phis[0].data, phis[1].data, phis[2].data};
  return VectorField(masks.grid, FieldRole::deformation,
                     select_by_label(by_label, masks.labels));
}

Volume jacobian_determinant(const VectorField& phi) {
  if (phi.role != FieldRole::deformation)
    throw std::invalid_argument("jacobian_determinant: expects deformation role");
  const std::size_t W = phi.grid.extents[0], H = phi.grid.extents[1],
                    D = phi.grid.extents[2];
  const std::size_t N = W * H * D;
  const double* p = phi.data.data();
  std::vector<double> det(N);

  const std::size_t ext[3] = {W, H, D};
  const std::size_t stride[3] = {H * D, D, 1};
  for (std::size_t x = 0; x < W; ++x)
    for (std::size_t y = 0; y < H; ++y)
      for (std::size_t z = 0; z < D; ++z) {
        const std::size_t i = (x * H + y) * D + z;
        const std::size_t xyz[3] = {x, y, z};
        double J[3][3];
        for (int a = 0; a < 3; ++a) {  // derivative axis
          std::size_t ip = i, im = i;
          double denom;
          if (xyz[a] == 0) {
            ip = i + stride[a];
            denom = 1.0;
          } else if (xyz[a] == ext[a] - 1) {
            im = i - stride[a];
            denom = 1.0;
          } else {
            ip = i + stride[a];
            im = i - stride[a];
            denom = 2.0;
          }
          for (int c = 0; c < 3; ++c)
            J[c][a] = (p[c * N + ip] - p[c * N + im]) / denom;
        }
        det[i] = J[0][0] * (J[1][1] * J[2][2] - J[1][2] * J[2][1]) -
                 J[0][1] * (J[1][0] * J[2][2] - J[1][2] * J[2][0]) +
                 J[0][2] * (J[1][0] * J[2][1] - J[1][1] * J[2][0]);
      }
  return Volume(phi.grid, Tensor(Shape{W, H, D}, std::move(det)));
}

Tensor diffusion_energy(const VectorField& u) {
  if (u.role != FieldRole::displacement)
    throw std::invalid_argument("diffusion_energy: expects displacement role");
  const std::size_t W = u.grid.extents[0], H = u.grid.extents[1], D = u.grid.extents[2];
  const std::size_t N = W * H * D;
  const std::size_t ext[3] = {W, H, D};
  const std::size_t stride[3] = {H * D, D, 1};
  const double* p = u.data.data();

  // Sum over components and axes of mean squared forward differences;
  // each axis normalizes by its own valid-difference count.
  double total = 0.0;
  double inv_count[3];
  for (int a = 0; a < 3; ++a)
    inv_count[a] = 1.0 / static_cast<double>((ext[a] - 1) * (N / ext[a]));
  for (int c = 0; c < 3; ++c) {
    const double* comp = p + c * N;
    for (int a = 0; a < 3; ++a) {
      double acc = 0.0;
      for (std::size_t x = 0; x < W - (a == 0 ? 1 : 0); ++x)
        for (std::size_t y = 0; y < H - (a == 1 ? 1 : 0); ++y)
          for (std::size_t z = 0; z < D - (a == 2 ? 1 : 0); ++z) {
            const std::size_t i = (x * H + y) * D + z;
            const double d = comp[i + stride[a]] - comp[i];
            acc += d * d;
          }
      total += acc * inv_count[a];
    }
  }

  Tensor data = u.data;
  return make_op("diffusion_energy", {data}, Shape{1}, {total},
                 [data, W, H, D, N](const Tensor& o) {
                   if (!data.requires_grad()) return;
                   const double g = o.impl()->grad.data()[0];
                   auto& gd = data.impl()->grad_buffer();
                   const double* p = data.data();
                   const std::size_t ext[3] = {W, H, D};
                   const std::size_t stride[3] = {H * D, D, 1};
                   double inv_count[3];
                   for (int a = 0; a < 3; ++a)
                     inv_count[a] = 1.0 / static_cast<double>((ext[a] - 1) * (N / ext[a]));
                   for (int c = 0; c < 3; ++c) {
                     const double* comp = p + c * N;
                     double* gcomp = gd.data() + c * N;
                     for (int a = 0; a < 3; ++a) {
                       const double coef = 2.0 * g * inv_count[a];
                       for (std::size_t x = 0; x < W - (a == 0 ? 1 : 0); ++x)
                         for (std::size_t y = 0; y < H - (a == 1 ? 1 : 0); ++y)
                           for (std::size_t z = 0; z < D - (a == 2 ? 1 : 0); ++z) {
                             const std::size_t i = (x * H + y) * D + z;
                             const double d = comp[i + stride[a]] - comp[i];
                             gcomp[i + stride[a]] += coef * d;
                             gcomp[i] -= coef * d;
                           }
                     }
                   }
                 });
}

double mean_endpoint_error(const VectorField& a, const VectorField& b,
                           const LabelMap* foreground) {
  if (!(a.grid == b.grid))
    throw std::invalid_argument("mean_endpoint_error: grids differ");
  const std::size_t N = a.grid.voxel_count();
  const double* pa = a.data.data();
  const double* pb = b.data.data();
  double acc = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < N; ++i) {
    if (foreground && foreground->labels[i] == kBackground) continue;
    const double dx = pa[i] - pb[i];
    const double dy = pa[N + i] - pb[N + i];
    const double dz = pa[2 * N + i] - pb[2 * N + i];
    acc += std::sqrt(dx * dx + dy * dy + dz * dz);
    ++count;
  }
  return count ? acc / static_cast<double>(count) : 0.0;
}

}  // namespace dpreg
