// Command-line front end: phantom synthesis, registration, evaluation and
// gradient self-verification.

#include <exception>
#include <iostream>
#include <memory>

#include "CLI11.hpp"
#include "json.hpp"

#include "commands.hpp"
#include "dpreg/engine.hpp"

namespace {

// JSON config file support: a flat object whose keys are long option names.
// Command-line flags win on conflict (CLI11 applies config values only to
// options not already set).
class ConfigJSON : public CLI::Config {
 public:
  std::string to_config(const CLI::App* app, bool default_also, bool, std::string) const
      override {
    nlohmann::json j;
    for (const CLI::Option* opt : app->get_options({})) {
      if (!opt->get_lnames().empty() && opt->get_configurable()) {
        const std::string name = opt->get_lnames()[0];
        if (opt->count() == 1)
          j[name] = opt->results().at(0);
        else if (opt->count() > 1)
          j[name] = opt->results();
        else if (default_also)
          j[name] = opt->get_default_str();
      }
    }
    return j.dump(2);
  }

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    nlohmann::json j;
    try {
      input >> j;
    } catch (const nlohmann::json::parse_error& e) {
      throw CLI::FileError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) throw CLI::FileError("config must be a JSON object");
    std::vector<CLI::ConfigItem> items;
    for (auto it = j.begin(); it != j.end(); ++it) {
      CLI::ConfigItem item;
      item.name = it.key();
      if (it.value().is_array())
        for (const auto& v : it.value())
          item.inputs.push_back(v.is_string() ? v.get<std::string>() : v.dump());
      else
        item.inputs.push_back(it.value().is_string() ? it.value().get<std::string>()
                                                     : it.value().dump());
      items.push_back(std::move(item));
    }
    return items;
  }
};

}  // namespace

int main(int argc, char** argv) {
  using namespace dpreg::cli;

  CLI::App app{"Discontinuity-preserving diffeomorphic registration toolkit"};
  app.require_subcommand(1);

  SynthArgs synth_args;
  CLI::App* synth = app.add_subcommand("synth", "Generate a phantom pair from a JSON spec");
  synth->add_option("--spec", synth_args.spec_path, "Phantom spec (JSON)")->required();
  synth->add_option("--out", synth_args.out_dir, "Output directory")->required();

  RegisterArgs reg_args;
  CLI::App* reg = app.add_subcommand("register", "Register a moving image to a fixed image");
  reg->add_option("--moving", reg_args.moving, "Moving image (NIfTI)")->required();
  reg->add_option("--fixed", reg_args.fixed, "Fixed image (NIfTI)")->required();
  reg->add_option("--moving-mask", reg_args.moving_mask, "Moving label map")->required();
  reg->add_option("--fixed-mask", reg_args.fixed_mask, "Fixed label map")->required();
  reg->add_option("--mode", reg_args.mode, "disc (per-region fields) or smooth (one field)")
      ->check(CLI::IsMember({"disc", "smooth"}))
      ->capture_default_str();
  reg->add_option("--iters", reg_args.iters, "Optimizer iterations")->capture_default_str();
  reg->add_option("--lr", reg_args.lr, "Adam learning rate")->capture_default_str();
  reg->add_option("--lambda0", reg_args.lambda0, "Segmentation loss weight")
      ->capture_default_str();
  reg->add_option("--lambda1", reg_args.lambda1, "Intensity MSE weight")
      ->capture_default_str();
  reg->add_option("--lambda2", reg_args.lambda2, "Dice consistency weight")
      ->capture_default_str();
  reg->add_option("--lambda3", reg_args.lambda3, "Diffusion regularizer weight")
      ->capture_default_str();
  reg->add_option("--steps", reg_args.steps, "Scaling-and-squaring steps")
      ->capture_default_str();
  reg->add_option("--svf-factor", reg_args.svf_factor, "SVF grid downsampling factor")
      ->check(CLI::IsMember({1, 2, 4}))
      ->capture_default_str();
  reg->add_option("--seed", reg_args.seed, "Recorded in the report manifest")
      ->capture_default_str();
  reg->add_option("--out", reg_args.out_dir, "Report directory")->required();
  reg->add_option("--progress-every", reg_args.progress_every,
                  "Progress line period (stderr)");
  reg->set_config("--config", "", "JSON config; explicit flags win on conflict");
  reg->config_formatter(std::make_shared<ConfigJSON>());

  EvaluateArgs eval_args;
  CLI::App* eval = app.add_subcommand("evaluate", "Metrics between two segmentations");
  eval->add_option("--pred-seg", eval_args.pred_seg, "Predicted/warped label map")
      ->required();
  eval->add_option("--gt-seg", eval_args.gt_seg, "Reference label map")->required();
  eval->add_option("--spacing-from", eval_args.spacing_from,
                   "NIfTI file supplying voxel spacing");

  GradcheckArgs gc_args;
  CLI::App* gc = app.add_subcommand("gradcheck", "Finite-difference gradient self-test");
  gc->add_option("--seed", gc_args.seed, "RNG seed")->capture_default_str();
  gc->add_option("--size", gc_args.size, "Grid edge for field-based checks")
      ->capture_default_str();
  gc->add_option("--corrupt", gc_args.corrupt,
                 "Test hook: bias the named check's analytic gradient");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);  // prints message/help
    return e.get_exit_code() == static_cast<int>(CLI::ExitCodes::Success) ? kExitOk
                                                                          : kExitUsage;
  }

  try {
    if (synth->parsed()) return cmd_synth(synth_args);
    if (reg->parsed()) return cmd_register(reg_args);
    if (eval->parsed()) return cmd_evaluate(eval_args);
    if (gc->parsed()) return cmd_gradcheck(gc_args);
  } catch (const dpreg::DivergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitDivergence;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::runtime_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitUsage;
}
