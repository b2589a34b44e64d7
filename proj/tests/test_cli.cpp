// End-to-end checks of the command-line tool, driven through the built
// binary (path supplied via the DPREG_CLI environment variable).

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "json.hpp"

namespace fs = std::filesystem;

namespace {

std::string cli_path() {
  const char* p = std::getenv("DPREG_CLI");
  REQUIRE_MESSAGE(p != nullptr, "DPREG_CLI must point at the built binary");
  return p;
}

struct RunResult {
  int exit_code;
  std::string stdout_text;
};

RunResult run(const std::string& args) {
  const fs::path out = fs::temp_directory_path() / "dpreg_cli_stdout.txt";
  const std::string cmd = cli_path() + " " + args + " > " + out.string() + " 2>/dev/null";
  const int raw = std::system(cmd.c_str());
  std::ifstream is(out);
  std::ostringstream buf;
  buf << is.rdbuf();
  return {WEXITSTATUS(raw), buf.str()};
}

fs::path tmpdir(const std::string& name) {
  auto p = fs::temp_directory_path() / "dpreg_cli_tests" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string shift_spec_json(unsigned seed) {
  return R"({
    "grid": {"extents": [24, 24, 8], "spacing": [1.0, 1.0, 1.0]},
    "geometry": {"lv_center": [10.0, 12.0], "lvbp_radius": 3.5,
                 "lvm_thickness": 2.5, "rv_offset": [8.0, 0.0],
                 "rv_radius": 3.5, "z_margin": 1.0},
    "motion": {"type": "rigid_shift", "shift": [2.0, 0.0, 0.0]},
    "noise_sigma": 0.01,
    "seed": )" + std::to_string(seed) + "}";
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::ostringstream buf;
  buf << is.rdbuf();
  return buf.str();
}

}  // namespace

TEST_CASE("synth writes the five NIfTI files and a manifest") {
  const auto dir = tmpdir("synth");
  const auto spec = dir / "spec.json";
  std::ofstream(spec) << shift_spec_json(5);
  RunResult r = run("synth --spec " + spec.string() + " --out " + dir.string());
  CHECK(r.exit_code == 0);
  for (const char* f : {"moving.nii", "fixed.nii", "moving_mask.nii", "fixed_mask.nii",
                        "gt_field.nii", "manifest.json"})
    CHECK(fs::exists(dir / f));
}

TEST_CASE("synth rejects inverted radii with exit code 2") {
  const auto dir = tmpdir("synth_bad");
  const auto spec = dir / "spec.json";
  std::ofstream(spec) << R"({
    "grid": {"extents": [24, 24, 8], "spacing": [1, 1, 1]},
    "geometry": {"lv_center": [10, 12], "lvbp_radius": 3.5,
                 "lvm_thickness": -2.5, "rv_offset": [8, 0],
                 "rv_radius": 3.5, "z_margin": 1},
    "motion": {"type": "rigid_shift", "shift": [2, 0, 0]},
    "noise_sigma": 0.01, "seed": 1})";
  RunResult r = run("synth --spec " + spec.string() + " --out " + dir.string());
  CHECK(r.exit_code == 2);
}

TEST_CASE("synth is byte-identical for the same seed") {
  const auto d1 = tmpdir("synth_seed_a");
  const auto d2 = tmpdir("synth_seed_b");
  const auto spec = d1 / "spec.json";
  std::ofstream(spec) << shift_spec_json(42);
  CHECK(run("synth --spec " + spec.string() + " --out " + d1.string()).exit_code == 0);
  CHECK(run("synth --spec " + spec.string() + " --out " + d2.string()).exit_code == 0);
  for (const char* f : {"moving.nii", "fixed.nii", "moving_mask.nii", "fixed_mask.nii",
                        "gt_field.nii"})
    CHECK(slurp(d1 / f) == slurp(d2 / f));
}

TEST_CASE("register on the shift phantom produces a usable report") {
  const auto dir = tmpdir("register");
  const auto spec = dir / "spec.json";
  std::ofstream(spec) << shift_spec_json(9);
  REQUIRE(run("synth --spec " + spec.string() + " --out " + dir.string()).exit_code == 0);

  const auto rep = dir / "report";
  RunResult r = run("register --moving " + (dir / "moving.nii").string() + " --fixed " +
                    (dir / "fixed.nii").string() + " --moving-mask " +
                    (dir / "moving_mask.nii").string() + " --fixed-mask " +
                    (dir / "fixed_mask.nii").string() + " --iters 400 --lr 0.01 --out " +
                    rep.string());
  CHECK(r.exit_code == 0);
  for (const char* f : {"composed_field.nii", "warped_moving.nii", "warped_mask.nii",
                        "loss_trace.csv", "metrics.json", "manifest.json"})
    CHECK(fs::exists(rep / f));

  const auto metrics = nlohmann::json::parse(slurp(rep / "metrics.json"));
  CHECK(metrics.at("dice_avg").get<double>() >= 0.9);

  // The loss trace has one row per iteration plus a header.
  std::istringstream csv(slurp(rep / "loss_trace.csv"));
  std::string line;
  int rows = 0;
  while (std::getline(csv, line))
    if (!line.empty()) ++rows;
  CHECK(rows == 401);
}

TEST_CASE("register honors a JSON config file with flag precedence") {
  const auto dir = tmpdir("register_config");
  const auto spec = dir / "spec.json";
  std::ofstream(spec) << shift_spec_json(10);
  REQUIRE(run("synth --spec " + spec.string() + " --out " + dir.string()).exit_code == 0);

  const auto cfg = dir / "config.json";
  std::ofstream(cfg) << R"({"iters": 7, "lr": 0.01, "mode": "smooth"})";
  const auto rep = dir / "report";
  RunResult r = run("register --moving " + (dir / "moving.nii").string() + " --fixed " +
                    (dir / "fixed.nii").string() + " --moving-mask " +
                    (dir / "moving_mask.nii").string() + " --fixed-mask " +
                    (dir / "fixed_mask.nii").string() + " --config " + cfg.string() +
                    " --iters 5 --out " + rep.string());
  CHECK(r.exit_code == 0);
  const auto manifest = nlohmann::json::parse(slurp(rep / "manifest.json"));
  CHECK(manifest.at("config").at("iters").get<int>() == 5);  // flag wins
  CHECK(manifest.at("config").at("mode").get<std::string>() == "smooth");
  CHECK(manifest.at("config").at("lr").get<double>() == 0.01);
}

TEST_CASE("register reports a missing mask file with exit code 2") {
  const auto dir = tmpdir("register_missing");
  const auto spec = dir / "spec.json";
  std::ofstream(spec) << shift_spec_json(11);
  REQUIRE(run("synth --spec " + spec.string() + " --out " + dir.string()).exit_code == 0);
  RunResult r = run("register --moving " + (dir / "moving.nii").string() + " --fixed " +
                    (dir / "fixed.nii").string() + " --moving-mask " +
                    (dir / "nowhere.nii").string() + " --fixed-mask " +
                    (dir / "fixed_mask.nii").string() + " --iters 5 --out " +
                    (dir / "rep").string());
  CHECK(r.exit_code == 2);
}

TEST_CASE("same-seed register runs are byte-identical") {
  const auto dir = tmpdir("register_det");
  const auto spec = dir / "spec.json";
  std::ofstream(spec) << shift_spec_json(12);
  REQUIRE(run("synth --spec " + spec.string() + " --out " + dir.string()).exit_code == 0);
  const std::string common = "register --moving " + (dir / "moving.nii").string() +
                             " --fixed " + (dir / "fixed.nii").string() +
                             " --moving-mask " + (dir / "moving_mask.nii").string() +
                             " --fixed-mask " + (dir / "fixed_mask.nii").string() +
                             " --iters 60 --lr 0.01 --seed 4 --out ";
  REQUIRE(run(common + (dir / "rep1").string()).exit_code == 0);
  REQUIRE(run(common + (dir / "rep2").string()).exit_code == 0);
  for (const char* f : {"composed_field.nii", "warped_moving.nii", "warped_mask.nii",
                        "loss_trace.csv", "metrics.json"})
    CHECK(slurp(dir / "rep1" / f) == slurp(dir / "rep2" / f));
}

TEST_CASE("evaluate: identical segmentations score perfectly") {
  const auto dir = tmpdir("evaluate");
  const auto spec = dir / "spec.json";
  std::ofstream(spec) << shift_spec_json(13);
  REQUIRE(run("synth --spec " + spec.string() + " --out " + dir.string()).exit_code == 0);
  RunResult r = run("evaluate --pred-seg " + (dir / "moving_mask.nii").string() +
                    " --gt-seg " + (dir / "moving_mask.nii").string() +
                    " --spacing-from " + (dir / "moving.nii").string());
  CHECK(r.exit_code == 0);
  const auto m = nlohmann::json::parse(r.stdout_text);
  CHECK(m.at("dice_avg").get<double>() == 1.0);
  CHECK(m.at("hd95_mm").get<double>() == 0.0);
}

TEST_CASE("evaluate rejects label maps with out-of-range values") {
  const auto dir = tmpdir("evaluate_bad");
  // Hand-craft a NIfTI uint8 volume with a value outside {0..3}.
  const auto path = dir / "bad_mask.nii";
  {
    std::ofstream os(path, std::ios::binary);
    std::vector<char> header(352, 0);
    const std::int32_t sz = 348;
    std::memcpy(header.data(), &sz, 4);
    const std::int16_t dim[8] = {3, 4, 4, 4, 1, 1, 1, 1};
    std::memcpy(header.data() + 40, dim, sizeof(dim));
    const std::int16_t datatype = 2, bitpix = 8;
    std::memcpy(header.data() + 70, &datatype, 2);
    std::memcpy(header.data() + 72, &bitpix, 2);
    const float pixdim[8] = {1, 1, 1, 1, 1, 1, 1, 1};
    std::memcpy(header.data() + 76, pixdim, sizeof(pixdim));
    const float vox_offset = 352;
    std::memcpy(header.data() + 108, &vox_offset, 4);
    std::memcpy(header.data() + 344, "n+1", 4);
    os.write(header.data(), header.size());
    std::vector<unsigned char> payload(64, 9);  // 9 is not a valid label
    os.write(reinterpret_cast<char*>(payload.data()), payload.size());
  }
  RunResult r = run("evaluate --pred-seg " + path.string() + " --gt-seg " + path.string());
  CHECK(r.exit_code == 2);
}

TEST_CASE("gradcheck passes, and the corrupt hook fails it by name") {
  RunResult ok = run("gradcheck --seed 3 --size 3");
  CHECK(ok.exit_code == 0);
  CHECK(ok.stdout_text.find("PASS") != std::string::npos);

  RunResult bad = run("gradcheck --seed 3 --size 3 --corrupt matmul");
  CHECK(bad.exit_code != 0);
  CHECK(bad.stdout_text.find("FAIL") != std::string::npos);
  CHECK(bad.stdout_text.find("matmul") != std::string::npos);
}

TEST_CASE("gradcheck rejects sizes beyond the co-attention budget") {
  RunResult r = run("gradcheck --seed 3 --size 17");  // 17^3 > 4096 positions
  CHECK(r.exit_code == 2);
}

TEST_CASE("unknown flags are a usage error") {
  RunResult r = run("register --bogus 1");
  CHECK(r.exit_code == 2);
}
