#include "commands.hpp"

#include <cinttypes>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "json.hpp"

#include "dpreg/engine.hpp"
#include "dpreg/gradcheck.hpp"
#include "dpreg/metrics.hpp"
#include "dpreg/nifti.hpp"
#include "dpreg/phantom.hpp"

namespace dpreg::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  os << text;
}

}  // namespace

int cmd_synth(const SynthArgs& args) {
  PhantomSpec spec = PhantomSpec::from_json_file(args.spec_path);
  PhantomPair pair = generate_phantom(spec);

  fs::create_directories(args.out_dir);
  const fs::path out(args.out_dir);
  write_nifti(pair.moving, (out / "moving.nii").string());
  write_nifti(pair.fixed, (out / "fixed.nii").string());
  write_nifti(pair.moving_mask, (out / "moving_mask.nii").string());
  write_nifti(pair.fixed_mask, (out / "fixed_mask.nii").string());
  write_nifti(pair.gt_deformation, (out / "gt_field.nii").string());

  json manifest;
  manifest["spec"] = json::parse(spec.to_json());
  manifest["outputs"] = {"moving.nii", "fixed.nii", "moving_mask.nii", "fixed_mask.nii",
                         "gt_field.nii"};
  write_text(out / "manifest.json", manifest.dump(2) + "\n");
  std::cerr << "phantom written to " << out.string() << "\n";
  return kExitOk;
}

int cmd_register(const RegisterArgs& args) {
  RegistrationProblem p;
  p.moving = read_volume(args.moving);
  p.fixed = read_volume(args.fixed);
  p.moving_mask = read_labelmap(args.moving_mask);
  p.fixed_mask = read_labelmap(args.fixed_mask);
  if (args.mode == "disc")
    p.mode = RegistrationMode::discontinuous;
  else if (args.mode == "smooth")
    p.mode = RegistrationMode::smooth_baseline;
  else
    throw std::invalid_argument("--mode must be 'disc' or 'smooth', got '" + args.mode +
                                "'");
  p.iters = args.iters;
  p.lr = args.lr;
  p.weights = LossWeights{args.lambda0, args.lambda1, args.lambda2, args.lambda3};
  p.steps = args.steps;
  p.svf_grid_factor = args.svf_factor;
  p.seed = args.seed;

  const int every =
      args.progress_every > 0 ? args.progress_every : std::max(1, args.iters / 10);
  auto progress = [&](int iter, const IterationTrace& tr) {
    if (iter % every == 0 || iter + 1 == args.iters)
      std::fprintf(stderr, "iter %6d  total %.6f  mse %.6f  dice %.6f  reg %.6f\n", iter,
                   tr.total, tr.mse, tr.dice, tr.reg);
  };

  RegistrationReport report = register_pair(p, progress);

  fs::create_directories(args.out_dir);
  const fs::path out(args.out_dir);
  write_nifti(report.composed, (out / "composed_field.nii").string());
  write_nifti(report.warped_moving, (out / "warped_moving.nii").string());
  write_nifti(report.warped_mask, (out / "warped_mask.nii").string());
  for (std::size_t k = 0; k < report.svfs.size(); ++k)
    write_nifti(report.svfs[k], (out / ("svf_" + std::to_string(k) + ".nii")).string());

  std::string csv = "iter,seg,mse,dice,reg,total\n";
  char line[256];
  for (std::size_t i = 0; i < report.trace.size(); ++i) {
    const auto& t = report.trace[i];
    std::snprintf(line, sizeof(line), "%zu,%.17g,%.17g,%.17g,%.17g,%.17g\n", i, t.seg,
                  t.mse, t.dice, t.reg, t.total);
    csv += line;
  }
  write_text(out / "loss_trace.csv", csv);
  write_text(out / "metrics.json", metrics_to_json(report.metrics) + "\n");

  json manifest;
  manifest["inputs"] = {{"moving", args.moving},
                        {"fixed", args.fixed},
                        {"moving_mask", args.moving_mask},
                        {"fixed_mask", args.fixed_mask}};
  manifest["config"] = {{"mode", args.mode},
                        {"iters", args.iters},
                        {"lr", args.lr},
                        {"lambda", {args.lambda0, args.lambda1, args.lambda2, args.lambda3}},
                        {"steps", args.steps},
                        {"svf_grid_factor", args.svf_factor},
                        {"seed", args.seed}};
  manifest["final_loss"] = {{"seg", report.trace.back().seg},
                            {"mse", report.trace.back().mse},
                            {"dice", report.trace.back().dice},
                            {"reg", report.trace.back().reg},
                            {"total", report.trace.back().total}};
  manifest["outputs"] = {"composed_field.nii", "warped_moving.nii", "warped_mask.nii",
                         "loss_trace.csv", "metrics.json"};
  write_text(out / "manifest.json", manifest.dump(2) + "\n");

  std::cerr << "report written to " << out.string() << "\n";
  std::cerr << metrics_table(report.metrics);
  return kExitOk;
}

int cmd_evaluate(const EvaluateArgs& args) {
  LabelMap pred = read_labelmap(args.pred_seg);
  LabelMap gt = read_labelmap(args.gt_seg);
  if (!args.spacing_from.empty()) {
    const NiftiInfo info = read_nifti_header(args.spacing_from);
    pred.grid.spacing = info.grid.spacing;
    gt.grid.spacing = info.grid.spacing;
  }
  if (pred.grid.extents != gt.grid.extents)
    throw std::invalid_argument("evaluate: segmentations have different extents");
  gt.grid = pred.grid;

  const MetricsReport m = compute_metrics(pred, gt);
  std::cout << metrics_to_json(m) << "\n";
  std::cerr << metrics_table(m);
  return kExitOk;
}

int cmd_gradcheck(const GradcheckArgs& args) {
  GradCheckOptions opts;
  opts.seed = args.seed;
  opts.size = args.size;
  opts.corrupt = args.corrupt;

  const auto results = run_gradcheck_suite(opts);
  std::printf("%-24s %-14s %-10s %s\n", "check", "max_rel_err", "tol", "status");
  bool all_pass = true;
  std::string first_fail;
  for (const auto& r : results) {
    std::printf("%-24s %-14.3e %-10.0e %s\n", r.name.c_str(), r.max_rel_err, r.tolerance,
                r.pass ? "PASS" : "FAIL");
    if (!r.pass && all_pass) {
      all_pass = false;
      first_fail = r.name;
    }
  }
  if (!all_pass) {
    std::fprintf(stderr, "gradcheck FAILED: %s\n", first_fail.c_str());
    return kExitFailure;
  }
  return kExitOk;
}

}  // namespace dpreg::cli
