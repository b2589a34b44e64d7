// Acceptance suite: one pass/fail line per criterion. Exit code 0 only when
// every criterion holds at its stated tolerance.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "dpreg/engine.hpp"
#include "dpreg/gradcheck.hpp"
#include "dpreg/metrics.hpp"
#include "dpreg/nifti.hpp"
#include "dpreg/phantom.hpp"
#include "dpreg/warp.hpp"
#include "oracles.hpp"

using namespace dpreg;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(int criterion, bool pass, const std::string& detail) {
  std::printf("[%s] criterion %2d: %s\n", pass ? "PASS" : "FAIL", criterion,
              detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// --- phantom configurations -------------------------------------------------

PhantomSpec shift_spec_32cube(std::uint64_t seed) {
  PhantomSpec s;
  s.grid = Grid{{32, 32, 32}, {1, 1, 1}};
  s.geometry.lv_center = {13.0, 16.0};
  s.geometry.lvbp_radius = 5.0;
  s.geometry.lvm_thickness = 3.0;
  s.geometry.rv_offset = {10.5, 0.0};
  s.geometry.rv_radius = 4.5;
  s.geometry.z_margin = 4.0;
  s.motion.kind = MotionKind::rigid_shift;
  s.motion.shift = {2.0, 0.0, 0.0};
  s.noise_sigma = 0.01;
  s.seed = seed;
  return s;
}

PhantomSpec shift_spec_slab(std::uint64_t seed) {
  PhantomSpec s;
  s.grid = Grid{{32, 32, 8}, {1, 1, 1}};
  s.geometry.lv_center = {13.0, 16.0};
  s.geometry.lvbp_radius = 4.5;
  s.geometry.lvm_thickness = 2.5;
  s.geometry.rv_offset = {10.0, 0.0};
  s.geometry.rv_radius = 4.0;
  s.geometry.z_margin = 1.0;
  s.motion.kind = MotionKind::rigid_shift;
  s.motion.shift = {2.0, 0.0, 0.0};
  s.noise_sigma = 0.01;
  s.seed = seed;
  return s;
}

PhantomSpec sliding_spec(std::uint64_t seed) {
  PhantomSpec s;
  s.grid = Grid{{32, 32, 8}, {1, 1, 1}};
  s.geometry.lv_center = {9.5, 16.0};
  s.geometry.lvbp_radius = 3.5;
  s.geometry.lvm_thickness = 2.5;
  s.geometry.rv_offset = {14.0, 0.0};
  s.geometry.rv_radius = 4.5;
  s.geometry.z_margin = 1.0;
  s.motion.kind = MotionKind::sliding;
  s.motion.plane_axis = 0;
  s.motion.plane_pos = 16.5;
  s.motion.shift_positive = {0.0, -3.0, 0.0};
  s.motion.shift_negative = {0.0, 3.0, 0.0};
  s.noise_sigma = 0.01;
  s.seed = seed;
  return s;
}

PhantomSpec contraction_spec(std::uint64_t seed) {
  PhantomSpec s;
  s.grid = Grid{{48, 48, 8}, {1, 1, 1}};
  s.geometry.lv_center = {24.0, 24.0};
  s.geometry.lvbp_radius = 6.0;
  s.geometry.lvm_thickness = 3.0;
  s.geometry.rv_offset = {15.5, 0.0};
  s.geometry.rv_radius = 3.5;
  s.geometry.z_margin = 1.0;
  s.motion.kind = MotionKind::contraction;
  s.motion.scale = 0.75;
  s.motion.taper_radius = 12.0;
  s.noise_sigma = 0.01;
  s.seed = seed;
  return s;
}

RegistrationProblem problem_for(const PhantomPair& pair) {
  RegistrationProblem p;
  p.moving = pair.moving;
  p.fixed = pair.fixed;
  p.moving_mask = pair.moving_mask;
  p.fixed_mask = pair.fixed_mask;
  return p;
}

// --- criteria ----------------------------------------------------------------

void criterion1_gradient_suite() {
  const auto t0 = std::chrono::steady_clock::now();
  GradCheckOptions opts;
  opts.seed = 20240601;
  opts.size = 4;
  const auto results = run_gradcheck_suite(opts);
  bool all = true;
  std::string worst;
  for (const auto& r : results) {
    if (!r.pass) {
      all = false;
      worst = r.name + " err " + std::to_string(r.max_rel_err);
      break;
    }
  }
  const double dt = seconds_since(t0);
  const bool in_time = dt < 120.0;
  std::ostringstream os;
  os << "gradient suite: " << results.size() << " checks, "
     << (all ? "all within tolerance" : ("first failure " + worst)) << ", "
     << dt << " s (< 120 s)";
  report(1, all && in_time, os.str());
}

void criterion2_integration_oracle() {
  std::mt19937_64 rng(77);
  Grid g{{16, 16, 16}, {1, 1, 1}};
  const std::size_t N = g.voxel_count();
  double worst_mean = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    Tensor v = oracles::smooth_random_velocity(g, rng, 0.95);
    VectorField phi = integrate_svf(VectorField(g, FieldRole::velocity, v), 7);
    double err = 0.0;
    for (std::size_t x = 0; x < 16; ++x)
      for (std::size_t y = 0; y < 16; ++y)
        for (std::size_t z = 0; z < 16; ++z) {
          const std::size_t i = (x * 16 + y) * 16 + z;
          const auto end = oracles::euler_endpoint(
              v.values(), 16, 16, 16, {double(x), double(y), double(z)}, 1024);
          const double dx = phi.data.data()[i] - end[0];
          const double dy = phi.data.data()[N + i] - end[1];
          const double dz = phi.data.data()[2 * N + i] - end[2];
          err += std::sqrt(dx * dx + dy * dy + dz * dz);
        }
    worst_mean = std::max(worst_mean, err / double(N));
  }
  std::ostringstream os;
  os << "scaling-and-squaring vs 1024-step Euler on 20 smooth SVFs: worst mean "
        "endpoint error "
     << worst_mean << " voxels (< 0.05)";
  report(2, worst_mean < 0.05, os.str());
}

void criterion3_composition_exactness() {
  std::mt19937_64 rng(123);
  bool ok = true;
  for (int trial = 0; trial < 5 && ok; ++trial) {
    Grid g{{10, 9, 7}, {1, 1, 1}};
    const std::size_t N = g.voxel_count();
    std::array<VectorField, 4> phis;
    for (auto& p : phis)
      p = VectorField(g, FieldRole::deformation,
                      add(identity_grid(g),
                          random_tensor({3, 10, 9, 7}, rng, -3, 3, false)));
    std::uniform_int_distribution<int> lab(0, 3);
    std::vector<std::uint8_t> labels(N);
    for (auto& l : labels) l = std::uint8_t(lab(rng));
    LabelMap masks(g, labels);
    VectorField composed = compose_fields(phis, masks);

    const int phi_of_label[4] = {3, 0, 1, 2};
    for (std::size_t i = 0; i < N && ok; ++i) {
      const VectorField& src = phis[phi_of_label[labels[i]]];
      for (int c = 0; c < 3; ++c)
        if (composed.data.data()[c * N + i] != src.data.data()[c * N + i]) ok = false;
    }
  }
  report(3, ok,
         "compose_fields equals brute-force per-voxel selection bitwise; per-region "
         "restriction equals the sub-field exactly");
}

void criterion4_diffeomorphism_per_region() {
  bool all_positive = true;
  double global_min = 1e300;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    PhantomPair pair = generate_phantom(shift_spec_32cube(seed));
    RegistrationProblem p = problem_for(pair);
    p.iters = 500;
    p.lr = 1e-2;
    RegistrationReport rep = register_pair(p);
    const auto mins = per_region_min_jacobian(rep);
    for (double m : mins) {
      if (std::isfinite(m)) {
        global_min = std::min(global_min, m);
        if (m <= 0.0) all_positive = false;
      }
    }
  }
  std::ostringstream os;
  os << "per-region Jacobian determinants over 10 shift-phantom registrations "
        "(32^3, 500 iters): min "
     << global_min << " (> 0)";
  report(4, all_positive, os.str());
}

void criterion5_discontinuity_benefit() {
  const auto t0 = std::chrono::steady_clock::now();
  int wins = 0;
  double min_gap = 1e300;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    PhantomPair pair = generate_phantom(sliding_spec(seed));
    RegistrationProblem base = problem_for(pair);
    base.iters = 350;
    base.lr = 2e-2;

    RegistrationProblem disc = base;
    disc.mode = RegistrationMode::discontinuous;
    RegistrationProblem smooth = base;
    smooth.mode = RegistrationMode::smooth_baseline;

    const double dice_disc = register_pair(disc).metrics.dice_avg;
    const double dice_smooth = register_pair(smooth).metrics.dice_avg;
    const double gap = dice_disc - dice_smooth;
    min_gap = std::min(min_gap, gap);
    if (gap >= 0.05) ++wins;
  }
  const double dt = seconds_since(t0);
  std::ostringstream os;
  os << "sliding phantom, discontinuous vs smooth baseline: " << wins
     << "/10 seeds with gap >= 5 Dice points (min gap " << 100.0 * min_gap
     << " points), " << dt << " s (< 600 s)";
  report(5, wins == 10 && dt < 600.0, os.str());
}

void criterion6_recovery_accuracy() {
  PhantomPair pair = generate_phantom(shift_spec_slab(6));
  RegistrationProblem p = problem_for(pair);  // spec defaults throughout
  RegistrationReport rep = register_pair(p);
  const double err =
      mean_endpoint_error(rep.composed, pair.gt_deformation, &pair.fixed_mask);
  std::ostringstream os;
  os << "2-voxel shift with defaults (lr " << p.lr << ", " << p.iters
     << " iters): mean foreground endpoint error " << err << " voxels (< 0.5), dice_avg "
     << rep.metrics.dice_avg << " (>= 0.9)";
  report(6, err < 0.5 && rep.metrics.dice_avg >= 0.9, os.str());
}

void criterion7_metric_oracles() {
  bool ok = true;
  std::ostringstream os;

  // HD95 fixture: two single-voxel sets 3 voxels apart at (1.8, 1.8, 10) mm.
  {
    Grid g{{16, 16, 16}, {1.8, 1.8, 10}};
    std::vector<std::uint8_t> a(g.voxel_count(), 0), b(g.voxel_count(), 0);
    a[(4 * 16 + 8) * 16 + 8] = 1;
    b[(7 * 16 + 8) * 16 + 8] = 1;
    const double v = hd95(LabelMap(g, a), LabelMap(g, b), 1, g.spacing);
    if (std::abs(v - 5.4) > 1e-12) ok = false;
    os << "hd95 fixture " << v << " mm (= 5.4); ";
  }

  // Dice fixture: 8^3 cube vs 4-voxel shifted copy -> 0.5.
  {
    Grid g{{16, 16, 16}, {1, 1, 1}};
    std::vector<std::uint8_t> a(g.voxel_count(), 0), b(g.voxel_count(), 0);
    for (std::size_t x = 0; x < 8; ++x)
      for (std::size_t y = 0; y < 8; ++y)
        for (std::size_t z = 0; z < 8; ++z) {
          a[(x * 16 + y) * 16 + z] = 1;
          b[((x + 4) * 16 + y) * 16 + z] = 1;
        }
    const double d = dice_score(LabelMap(g, a), LabelMap(g, b), 1);
    if (d != 0.5) ok = false;
    os << "dice fixture " << d << " (= 0.5); ";
  }

  // LVEDV fixture: 1000 LVBP voxels at (1.8, 1.8, 10) -> 32.4 mL.
  {
    Grid g{{16, 16, 16}, {1.8, 1.8, 10}};
    std::vector<std::uint8_t> labels(g.voxel_count(), 0);
    for (std::size_t i = 0; i < 1000; ++i) labels[i] = kLVBP;
    const double v = clinical_indices(LabelMap(g, labels), g.spacing).lvedv_ml;
    if (std::abs(v - 32.4) > 1e-12) ok = false;
    os << "lvedv fixture " << v << " mL (= 32.4); ";
  }

  // LVMM fixture: 2000 LVM voxels at unit spacing -> 2.1 g.
  {
    Grid g{{16, 16, 16}, {1, 1, 1}};
    std::vector<std::uint8_t> labels(g.voxel_count(), 0);
    for (std::size_t i = 0; i < 2000; ++i) labels[i] = kLVM;
    const double v = clinical_indices(LabelMap(g, labels), g.spacing).lvmm_g;
    if (std::abs(v - 2.1) > 1e-12) ok = false;
    os << "lvmm fixture " << v << " g (= 2.1)";
  }

  report(7, ok, os.str());
}

void criterion8_clinical_index_preservation() {
  PhantomPair pair = generate_phantom(contraction_spec(8));
  RegistrationProblem p = problem_for(pair);
  p.iters = 500;
  p.lr = 1e-2;
  RegistrationReport rep = register_pair(p);

  const double lvmm_moving =
      clinical_indices(pair.moving_mask, pair.moving.grid.spacing).lvmm_g;
  const double lvmm_warped =
      clinical_indices(rep.warped_mask, pair.moving.grid.spacing).lvmm_g;
  const double rel = std::abs(lvmm_warped - lvmm_moving) / lvmm_moving;
  std::ostringstream os;
  os << "contraction phantom LVMM: moving " << lvmm_moving << " g, warped moving "
     << lvmm_warped << " g, relative difference " << 100.0 * rel << "% (< 5%)";
  report(8, rel < 0.05, os.str());
}

void criterion9_bookkeeping() {
  PhantomPair pair = generate_phantom(shift_spec_slab(9));
  RegistrationProblem p = problem_for(pair);
  p.iters = 120;
  p.lr = 1e-2;
  const LossWeights w;  // defaults
  const bool defaults_ok =
      w.seg == 0.1 && w.mse == 1.0 && w.dice == 0.1 && w.reg == 0.01;

  RegistrationReport rep = register_pair(p);
  double worst = 0.0;
  for (const auto& t : rep.trace) {
    const double combo = p.weights.seg * t.seg + p.weights.mse * t.mse +
                         p.weights.dice * t.dice + p.weights.reg * t.reg;
    worst = std::max(worst, std::abs(t.total - combo));
  }
  std::ostringstream os;
  os << "trace total vs weighted parts: max deviation " << worst
     << " (< 1e-9); defaults (0.1, 1, 0.1, 0.01) " << (defaults_ok ? "ok" : "WRONG");
  report(9, worst < 1e-9 && defaults_ok, os.str());
}

struct CliRunner {
  std::string binary;
  fs::path dir;

  int run(const std::string& args) const {
    const std::string cmd = binary + " " + args + " > /dev/null 2>&1";
    return WEXITSTATUS(std::system(cmd.c_str()));
  }
};

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream buf;
  buf << is.rdbuf();
  return buf.str();
}

void criterion10_determinism_and_io() {
  const char* cli = std::getenv("DPREG_CLI");
  if (!cli) {
    report(10, false, "DPREG_CLI not set; cannot drive the binary");
    return;
  }
  CliRunner runner{cli, fs::temp_directory_path() / "dpreg_acceptance"};
  fs::remove_all(runner.dir);
  fs::create_directories(runner.dir);

  const PhantomSpec spec = shift_spec_slab(10);
  const fs::path spec_path = runner.dir / "spec.json";
  std::ofstream(spec_path) << spec.to_json();

  bool ok = true;
  std::ostringstream os;

  const fs::path s1 = runner.dir / "s1", s2 = runner.dir / "s2";
  ok &= runner.run("synth --spec " + spec_path.string() + " --out " + s1.string()) == 0;
  ok &= runner.run("synth --spec " + spec_path.string() + " --out " + s2.string()) == 0;
  for (const char* f :
       {"moving.nii", "fixed.nii", "moving_mask.nii", "fixed_mask.nii", "gt_field.nii"})
    if (slurp(s1 / f) != slurp(s2 / f)) ok = false;
  os << "same-seed synth byte-identical: " << (ok ? "yes" : "no");

  const std::string reg_common =
      "register --moving " + (s1 / "moving.nii").string() + " --fixed " +
      (s1 / "fixed.nii").string() + " --moving-mask " + (s1 / "moving_mask.nii").string() +
      " --fixed-mask " + (s1 / "fixed_mask.nii").string() +
      " --iters 80 --lr 0.01 --seed 3 --out ";
  bool reg_ok = true;
  reg_ok &= runner.run(reg_common + (runner.dir / "r1").string()) == 0;
  reg_ok &= runner.run(reg_common + (runner.dir / "r2").string()) == 0;
  for (const char* f : {"composed_field.nii", "warped_moving.nii", "warped_mask.nii",
                        "loss_trace.csv", "metrics.json"})
    if (slurp(runner.dir / "r1" / f) != slurp(runner.dir / "r2" / f)) reg_ok = false;
  ok &= reg_ok;
  os << "; same-seed register byte-identical: " << (reg_ok ? "yes" : "no");

  // NIfTI round trip losslessness on the supported subset.
  bool rt_ok = true;
  {
    std::mt19937_64 rng(10);
    Grid g{{16, 12, 8}, {1.8, 1.8, 10}};
    Volume v(g, random_tensor({16, 12, 8}, rng, -3, 3, false));
    const fs::path vp = runner.dir / "rt_vol.nii";
    write_nifti(v, vp.string());
    if (read_volume(vp.string()).data.values() != v.data.values()) rt_ok = false;

    VectorField f(g, FieldRole::deformation,
                  random_tensor({3, 16, 12, 8}, rng, -3, 3, false));
    const fs::path fp = runner.dir / "rt_field.nii";
    write_nifti(f, fp.string());
    if (read_field(fp.string()).data.values() != f.data.values()) rt_ok = false;

    std::uniform_int_distribution<int> lab(0, 3);
    std::vector<std::uint8_t> labels(g.voxel_count());
    for (auto& l : labels) l = std::uint8_t(lab(rng));
    LabelMap m(g, labels);
    const fs::path mp = runner.dir / "rt_mask.nii";
    write_nifti(m, mp.string());
    if (read_labelmap(mp.string()).labels != m.labels) rt_ok = false;
  }
  ok &= rt_ok;
  os << "; NIfTI round trip lossless: " << (rt_ok ? "yes" : "no");

  report(10, ok, os.str());
}

}  // namespace

int main() {
  std::printf("acceptance suite\n================\n");
  criterion1_gradient_suite();
  criterion2_integration_oracle();
  criterion3_composition_exactness();
  criterion4_diffeomorphism_per_region();
  criterion5_discontinuity_benefit();
  criterion6_recovery_accuracy();
  criterion7_metric_oracles();
  criterion8_clinical_index_preservation();
  criterion9_bookkeeping();
  criterion10_determinism_and_io();
  if (g_failures) {
    std::printf("\n%d criterion(s) FAILED\n", g_failures);
    return 1;
  }
  std::printf("\nall criteria passed\n");
  return 0;
}
