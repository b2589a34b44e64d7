#include "dpreg/phantom.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

#include "dpreg/warp.hpp"

namespace dpreg {

namespace {

using json = nlohmann::json;

double motion_max_displacement(const PhantomSpec& s) {
  auto norm3 = [](const std::array<double, 3>& v) {
    return std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
  };
  switch (s.motion.kind) {
    case MotionKind::rigid_shift:
      return norm3(s.motion.shift);
    case MotionKind::sliding:
      return std::max(norm3(s.motion.shift_positive), norm3(s.motion.shift_negative));
    case MotionKind::contraction: {
      // The radial map's largest offset sits at the contracted blood-pool edge.
      const double r0 = s.geometry.lvbp_radius;
      return r0 * (1.0 - s.motion.scale);
    }
  }
  return 0.0;
}

struct StructureFrame {
  // One frame's analytic geometry.
  std::array<double, 2> lv_center;
  double lvbp_radius;
  double lvm_outer;
  std::array<double, 2> rv_center;
  double rv_radius;
  double z_lo, z_hi;
};

StructureFrame moving_frame(const PhantomSpec& s) {
  StructureFrame f;
  f.lv_center = s.geometry.lv_center;
  f.lvbp_radius = s.geometry.lvbp_radius;
  f.lvm_outer = s.geometry.lvbp_radius + s.geometry.lvm_thickness;
  f.rv_center = {s.geometry.lv_center[0] + s.geometry.rv_offset[0],
                 s.geometry.lv_center[1] + s.geometry.rv_offset[1]};
  f.rv_radius = s.geometry.rv_radius;
  f.z_lo = s.geometry.z_margin;
  f.z_hi = static_cast<double>(s.grid.extents[2]) - s.geometry.z_margin;
  return f;
}

// Side of the sliding plane a structure's center falls on, and its shift.
const std::array<double, 3>& side_shift(const Motion& m, double center_coord) {
  return center_coord >= m.plane_pos ? m.shift_positive : m.shift_negative;
}

double structure_center_coord(const StructureFrame& f, const std::array<double, 2>& c,
                              int axis) {
  if (axis == 0) return c[0];
  if (axis == 1) return c[1];
  return 0.5 * (f.z_lo + f.z_hi);
}

StructureFrame fixed_frame(const PhantomSpec& s) {
  StructureFrame f = moving_frame(s);
  switch (s.motion.kind) {
    case MotionKind::rigid_shift:
      // Warp convention: fixed(x) = moving(x + shift), so structures appear
      // moved by -shift in the fixed frame.
      f.lv_center[0] -= s.motion.shift[0];
      f.lv_center[1] -= s.motion.shift[1];
      f.rv_center[0] -= s.motion.shift[0];
      f.rv_center[1] -= s.motion.shift[1];
      f.z_lo -= s.motion.shift[2];
      f.z_hi -= s.motion.shift[2];
      break;
    case MotionKind::sliding: {
      const StructureFrame mv = moving_frame(s);
      const auto& lv_shift =
          side_shift(s.motion, structure_center_coord(mv, mv.lv_center, s.motion.plane_axis));
      const auto& rv_shift =
          side_shift(s.motion, structure_center_coord(mv, mv.rv_center, s.motion.plane_axis));
      f.lv_center[0] -= lv_shift[0];
      f.lv_center[1] -= lv_shift[1];
      f.rv_center[0] -= rv_shift[0];
      f.rv_center[1] -= rv_shift[1];
      // Tangential shifts may carry a z component; the LV band moves with LV.
      f.z_lo -= lv_shift[2];
      f.z_hi -= lv_shift[2];
      break;
    }
    case MotionKind::contraction: {
      const double r0 = s.geometry.lvbp_radius;
      const double R0 = r0 + s.geometry.lvm_thickness;
      const double r1 = s.motion.scale * r0;
      f.lvbp_radius = r1;
      f.lvm_outer = std::sqrt(R0 * R0 - r0 * r0 + r1 * r1);
      break;
    }
  }
  return f;
}

std::uint8_t label_at(const StructureFrame& f, double x, double y, double z) {
  if (z < f.z_lo || z >= f.z_hi) return kBackground;
  const double dlx = x - f.lv_center[0], dly = y - f.lv_center[1];
  const double rl = std::sqrt(dlx * dlx + dly * dly);
  if (rl <= f.lvbp_radius) return kLVBP;
  if (rl <= f.lvm_outer) return kLVM;
  const double drx = x - f.rv_center[0], dry = y - f.rv_center[1];
  if (std::sqrt(drx * drx + dry * dry) <= f.rv_radius) return kRV;
  return kBackground;
}

double intensity_of(std::uint8_t label) {
  switch (label) {
    case kLVBP: return kIntensityLVBP;
    case kLVM: return kIntensityLVM;
    case kRV: return kIntensityRV;
    default: return kIntensityBackground;
  }
}

// Low-frequency per-structure modulation in moving-frame coordinates. The
// fixed image inherits it through the ground-truth warp, which pins the
// deformation away from structure boundaries.
double texture_at(std::uint8_t label, double amp, double x, double y, double z) {
  if (amp == 0.0) return 0.0;
  static const double freq[4][3] = {{0.55, 0.75, 0.85},
                                    {0.95, 0.65, 0.75},
                                    {0.70, 1.00, 0.60},
                                    {0.85, 0.55, 0.95}};
  static const double phase[4][3] = {{0.3, 1.1, 2.0},
                                     {1.7, 0.4, 0.9},
                                     {0.8, 2.3, 1.5},
                                     {2.6, 1.9, 0.2}};
  const double a = label == kBackground ? amp / 3.0 : amp;
  return a * std::sin(freq[label][0] * x + phase[label][0]) *
         std::sin(freq[label][1] * y + phase[label][1]) *
         std::sin(freq[label][2] * z + phase[label][2]);
}

LabelMap rasterize_labels(const Grid& g, const StructureFrame& f) {
  const std::size_t W = g.extents[0], H = g.extents[1], D = g.extents[2];
  std::vector<std::uint8_t> labels(g.voxel_count());
  std::size_t i = 0;
  for (std::size_t x = 0; x < W; ++x)
    for (std::size_t y = 0; y < H; ++y)
      for (std::size_t z = 0; z < D; ++z, ++i)
        labels[i] = label_at(f, static_cast<double>(x), static_cast<double>(y),
                             static_cast<double>(z));
  return LabelMap(g, std::move(labels));
}

// Radial map of the contraction motion: fixed-frame radius -> moving-frame
// radius. Piecewise: linear inside the blood pool, area-preserving through
// the wall, tapering to the identity at taper_radius.
double radial_map(const PhantomSpec& s, double rho) {
  const double r0 = s.geometry.lvbp_radius;
  const double R0 = r0 + s.geometry.lvm_thickness;
  const double r1 = s.motion.scale * r0;
  const double R1 = std::sqrt(R0 * R0 - r0 * r0 + r1 * r1);
  const double taper = s.motion.taper_radius;
  if (rho <= r1) return rho / s.motion.scale;
  if (rho <= R1) return std::sqrt(rho * rho - r1 * r1 + r0 * r0);
  if (rho < taper) {
    const double delta = R0 - R1;
    return rho + delta * (taper - rho) / (taper - R1);
  }
  return rho;
}

void gt_displacement(const PhantomSpec& s, double x, double y, double z, double* u) {
  switch (s.motion.kind) {
    case MotionKind::rigid_shift:
      u[0] = s.motion.shift[0];
      u[1] = s.motion.shift[1];
      u[2] = s.motion.shift[2];
      return;
    case MotionKind::sliding: {
      const double coord = s.motion.plane_axis == 0 ? x : (s.motion.plane_axis == 1 ? y : z);
      const auto& sh = side_shift(s.motion, coord);
      u[0] = sh[0];
      u[1] = sh[1];
      u[2] = sh[2];
      return;
    }
    case MotionKind::contraction: {
      const double dx = x - s.geometry.lv_center[0];
      const double dy = y - s.geometry.lv_center[1];
      const double rho = std::sqrt(dx * dx + dy * dy);
      if (rho < 1e-12) {
        u[0] = u[1] = u[2] = 0.0;
        return;
      }
      const double scale = radial_map(s, rho) / rho - 1.0;
      u[0] = dx * scale;
      u[1] = dy * scale;
      u[2] = 0.0;
      return;
    }
  }
}

void check_sliding_sides(const PhantomSpec& s) {
  const Motion& m = s.motion;
  if (m.plane_axis < 0 || m.plane_axis > 2)
    throw std::invalid_argument("phantom spec invalid: sliding plane_axis must be 0, 1 or 2");
  if (m.shift_positive[m.plane_axis] != 0.0 || m.shift_negative[m.plane_axis] != 0.0)
    throw std::invalid_argument(
        "phantom spec invalid: sliding shifts must be tangential (zero component along "
        "the plane axis)");
  const StructureFrame f = moving_frame(s);
  struct Extent {
    const char* name;
    double lo, hi;
  };
  const double lv_r = f.lvm_outer;
  Extent lv{"LV complex", 0, 0}, rv{"RV", 0, 0};
  if (m.plane_axis == 2) {
    lv = {"LV complex", f.z_lo, f.z_hi};
    rv = {"RV", f.z_lo, f.z_hi};
  } else {
    const int a = m.plane_axis;
    lv = {"LV complex", f.lv_center[a] - lv_r, f.lv_center[a] + lv_r};
    rv = {"RV", f.rv_center[a] - f.rv_radius, f.rv_center[a] + f.rv_radius};
  }
  for (const auto& e : {lv, rv}) {
    const bool below = e.hi < m.plane_pos;
    const bool above = e.lo >= m.plane_pos;
    if (!below && !above)
      throw std::invalid_argument(std::string("phantom spec invalid: ") + e.name +
                                  " straddles the sliding plane");
  }
}

}  // namespace

void PhantomSpec::validate() const {
  grid.validate();
  if (!(geometry.lvbp_radius > 0.0))
    throw std::invalid_argument("phantom spec invalid: lvbp_radius must be positive");
  if (!(geometry.lvm_thickness > 0.0))
    throw std::invalid_argument(
        "phantom spec invalid: lvm_thickness must be positive (LVM must strictly "
        "enclose LVBP)");
  if (!(geometry.rv_radius > 0.0))
    throw std::invalid_argument("phantom spec invalid: rv_radius must be positive");
  if (geometry.z_margin < 0.0 ||
      2.0 * geometry.z_margin >= static_cast<double>(grid.extents[2]))
    throw std::invalid_argument("phantom spec invalid: z_margin leaves no z band");
  if (noise_sigma < 0.0)
    throw std::invalid_argument("phantom spec invalid: noise_sigma must be >= 0");
  if (texture_amp < 0.0)
    throw std::invalid_argument("phantom spec invalid: texture_amp must be >= 0");

  if (motion.kind == MotionKind::contraction) {
    if (!(motion.scale > 0.0 && motion.scale <= 1.0))
      throw std::invalid_argument(
          "phantom spec invalid: contraction scale must be in (0, 1]");
    const double R0 = geometry.lvbp_radius + geometry.lvm_thickness;
    if (!(motion.taper_radius > R0))
      throw std::invalid_argument(
          "phantom spec invalid: taper_radius must exceed the epicardial radius");
    const double rv_inner = std::sqrt(geometry.rv_offset[0] * geometry.rv_offset[0] +
                                      geometry.rv_offset[1] * geometry.rv_offset[1]) -
                            geometry.rv_radius;
    if (rv_inner < motion.taper_radius)
      throw std::invalid_argument(
          "phantom spec invalid: RV must lie outside the contraction taper radius");
  }
  if (motion.kind == MotionKind::sliding) check_sliding_sides(*this);

  const double mag = motion_max_displacement(*this);
  if (mag > 4.0)
    throw std::invalid_argument("phantom spec invalid: motion magnitude " +
                                std::to_string(mag) + " exceeds 4 voxels");
}

PhantomSpec PhantomSpec::from_json_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("file not found: '" + path + "'");
  std::ostringstream buf;
  buf << is.rdbuf();
  return from_json_text(buf.str());
}

PhantomSpec PhantomSpec::from_json_text(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("phantom spec is not valid JSON: ") + e.what());
  }
  PhantomSpec s;
  try {
    const auto& jg = j.at("grid");
    const auto ext = jg.at("extents");
    const auto sp = jg.at("spacing");
    for (int a = 0; a < 3; ++a) {
      s.grid.extents[a] = ext.at(a).get<std::size_t>();
      s.grid.spacing[a] = sp.at(a).get<double>();
    }
    const auto& ge = j.at("geometry");
    s.geometry.lv_center = {ge.at("lv_center").at(0).get<double>(),
                            ge.at("lv_center").at(1).get<double>()};
    s.geometry.lvbp_radius = ge.at("lvbp_radius").get<double>();
    s.geometry.lvm_thickness = ge.at("lvm_thickness").get<double>();
    s.geometry.rv_offset = {ge.at("rv_offset").at(0).get<double>(),
                            ge.at("rv_offset").at(1).get<double>()};
    s.geometry.rv_radius = ge.at("rv_radius").get<double>();
    if (ge.contains("z_margin")) s.geometry.z_margin = ge.at("z_margin").get<double>();

    const auto& jm = j.at("motion");
    const std::string kind = jm.at("type").get<std::string>();
    if (kind == "rigid_shift") {
      s.motion.kind = MotionKind::rigid_shift;
      for (int a = 0; a < 3; ++a) s.motion.shift[a] = jm.at("shift").at(a).get<double>();
    } else if (kind == "contraction") {
      s.motion.kind = MotionKind::contraction;
      s.motion.scale = jm.at("scale").get<double>();
      s.motion.taper_radius = jm.at("taper_radius").get<double>();
    } else if (kind == "sliding") {
      s.motion.kind = MotionKind::sliding;
      s.motion.plane_axis = jm.at("plane_axis").get<int>();
      s.motion.plane_pos = jm.at("plane_pos").get<double>();
      for (int a = 0; a < 3; ++a) {
        s.motion.shift_positive[a] = jm.at("shift_positive").at(a).get<double>();
        s.motion.shift_negative[a] = jm.at("shift_negative").at(a).get<double>();
      }
    } else {
      throw std::invalid_argument("phantom spec invalid: unknown motion type '" + kind +
                                  "'");
    }
    if (j.contains("noise_sigma")) s.noise_sigma = j.at("noise_sigma").get<double>();
    if (j.contains("texture_amp")) s.texture_amp = j.at("texture_amp").get<double>();
    if (j.contains("seed")) s.seed = j.at("seed").get<std::uint64_t>();
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("phantom spec is missing fields: ") + e.what());
  }
  s.validate();
  return s;
}

std::string PhantomSpec::to_json() const {
  json j;
  j["grid"]["extents"] = {grid.extents[0], grid.extents[1], grid.extents[2]};
  j["grid"]["spacing"] = {grid.spacing[0], grid.spacing[1], grid.spacing[2]};
  j["geometry"]["lv_center"] = {geometry.lv_center[0], geometry.lv_center[1]};
  j["geometry"]["lvbp_radius"] = geometry.lvbp_radius;
  j["geometry"]["lvm_thickness"] = geometry.lvm_thickness;
  j["geometry"]["rv_offset"] = {geometry.rv_offset[0], geometry.rv_offset[1]};
  j["geometry"]["rv_radius"] = geometry.rv_radius;
  j["geometry"]["z_margin"] = geometry.z_margin;
  switch (motion.kind) {
    case MotionKind::rigid_shift:
      j["motion"]["type"] = "rigid_shift";
      j["motion"]["shift"] = {motion.shift[0], motion.shift[1], motion.shift[2]};
      break;
    case MotionKind::contraction:
      j["motion"]["type"] = "contraction";
      j["motion"]["scale"] = motion.scale;
      j["motion"]["taper_radius"] = motion.taper_radius;
      break;
    case MotionKind::sliding:
      j["motion"]["type"] = "sliding";
      j["motion"]["plane_axis"] = motion.plane_axis;
      j["motion"]["plane_pos"] = motion.plane_pos;
      j["motion"]["shift_positive"] = {motion.shift_positive[0], motion.shift_positive[1],
                                       motion.shift_positive[2]};
      j["motion"]["shift_negative"] = {motion.shift_negative[0], motion.shift_negative[1],
                                       motion.shift_negative[2]};
      break;
  }
  j["noise_sigma"] = noise_sigma;
  j["texture_amp"] = texture_amp;
  j["seed"] = seed;
  return j.dump(2);
}

PhantomPair generate_phantom(const PhantomSpec& spec) {
  spec.validate();
  const Grid& g = spec.grid;
  const std::size_t W = g.extents[0], H = g.extents[1], D = g.extents[2];
  const std::size_t N = g.voxel_count();

  const StructureFrame mv = moving_frame(spec);
  const StructureFrame fx = fixed_frame(spec);

  PhantomPair pair;
  pair.moving_mask = rasterize_labels(g, mv);
  pair.fixed_mask = rasterize_labels(g, fx);

  std::vector<double> clean(N);
  {
    std::size_t i = 0;
    for (std::size_t x = 0; x < W; ++x)
      for (std::size_t y = 0; y < H; ++y)
        for (std::size_t z = 0; z < D; ++z, ++i) {
          const std::uint8_t lab = pair.moving_mask.labels[i];
          clean[i] = intensity_of(lab) +
                     texture_at(lab, spec.texture_amp, double(x), double(y), double(z));
        }
  }

  std::vector<double> disp(3 * N);
  {
    std::size_t i = 0;
    for (std::size_t x = 0; x < W; ++x)
      for (std::size_t y = 0; y < H; ++y)
        for (std::size_t z = 0; z < D; ++z, ++i) {
          double u[3];
          gt_displacement(spec, static_cast<double>(x), static_cast<double>(y),
                          static_cast<double>(z), u);
          disp[i] = u[0];
          disp[N + i] = u[1];
          disp[2 * N + i] = u[2];
        }
  }
  Tensor phi = add(identity_grid(g), Tensor(Shape{3, W, H, D}, std::move(disp)));
  pair.gt_deformation = VectorField(g, FieldRole::deformation, phi);

  Tensor clean_t(Shape{1, W, H, D}, clean);
  Tensor warped = sample_field(clean_t, phi);

  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> noise(0.0, spec.noise_sigma);
  std::vector<double> moving_data = clean;
  if (spec.noise_sigma > 0.0)
    for (auto& v : moving_data) v += noise(rng);
  std::vector<double> fixed_data(warped.data(), warped.data() + N);
  if (spec.noise_sigma > 0.0)
    for (auto& v : fixed_data) v += noise(rng);

  pair.moving = Volume(g, Tensor(Shape{W, H, D}, std::move(moving_data)));
  pair.fixed = Volume(g, Tensor(Shape{W, H, D}, std::move(fixed_data)));
  return pair;
}

}  // namespace dpreg
