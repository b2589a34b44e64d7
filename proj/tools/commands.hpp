#pragma once

#include <string>

namespace dpreg::cli {

// Exit codes: 0 success, 2 usage/validation, 3 numerical divergence, 1 other.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitDivergence = 3;

struct SynthArgs {
  std::string spec_path;
  std::string out_dir;
};

struct RegisterArgs {
  std::string moving, fixed, moving_mask, fixed_mask;
  std::string mode = "disc";
  int iters = 3000;
  double lr = 1e-3;
  double lambda0 = 0.1, lambda1 = 1.0, lambda2 = 0.1, lambda3 = 0.01;
  int steps = 7;
  int svf_factor = 2;
  std::uint64_t seed = 0;
  std::string out_dir;
  int progress_every = 0;  // 0 picks iters/10
};

struct EvaluateArgs {
  std::string pred_seg, gt_seg, spacing_from;
};

struct GradcheckArgs {
  std::uint64_t seed = 17;
  std::size_t size = 4;
  std::string corrupt;
};

int cmd_synth(const SynthArgs& args);
int cmd_register(const RegisterArgs& args);
int cmd_evaluate(const EvaluateArgs& args);
int cmd_gradcheck(const GradcheckArgs& args);

}  // namespace dpreg::cli
