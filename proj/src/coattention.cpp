#include "dpreg/coattention.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "dpreg/tensor_io.hpp"

namespace dpreg {

FeatureMap::FeatureMap(Tensor t) : data(std::move(t)) {
  if (data.rank() != 4)
    throw std::invalid_argument("feature map must be (C,W,H,D), got " +
                                shape_str(data.shape()));
}

CoAttentionParams CoAttentionParams::init(std::size_t channels, std::uint64_t seed) {
  if (channels == 0) throw std::invalid_argument("co-attention needs channels >= 1");
  CoAttentionParams p;
  p.channels = channels;
  std::mt19937_64 rng(seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(channels));
  std::uniform_real_distribution<double> dist(-bound, bound);
  auto uniform = [&](Shape shape) {
    std::vector<double> data(shape_size(shape));
    for (auto& v : data) v = dist(rng);
    return Tensor(std::move(shape), std::move(data), true);
  };
  const std::size_t C = channels;
  p.w_f = uniform({C, C});
  p.w_g = uniform({C, C});
  p.w_h1 = uniform({C, C});
  p.w_h2 = uniform({C, C});
  p.gate_w_mov = Tensor(Shape{C, 1}, 0.0, true);
  p.gate_w_fix = Tensor(Shape{C, 1}, 0.0, true);
  p.gate_b_mov = Tensor(Shape{1}, 0.0, true);
  p.gate_b_fix = Tensor(Shape{1}, 0.0, true);
  p.w_o_mov = uniform({2 * C, C});
  p.w_o_fix = uniform({2 * C, C});
  p.b_o_mov = Tensor(Shape{1, C}, 0.0, true);
  p.b_o_fix = Tensor(Shape{1, C}, 0.0, true);
  p.scale_mov = Tensor(Shape{1, C}, 1.0, true);
  p.scale_fix = Tensor(Shape{1, C}, 1.0, true);
  p.shift_mov = Tensor(Shape{1, C}, 0.0, true);
  p.shift_fix = Tensor(Shape{1, C}, 0.0, true);
  return p;
}

std::vector<Tensor> CoAttentionParams::parameters() const {
  std::vector<Tensor> out;
  for (auto& [name, t] : named_parameters()) out.push_back(t);
  return out;
}

std::vector<std::pair<std::string, Tensor>> CoAttentionParams::named_parameters() const {
  return {{"w_f", w_f},           {"w_g", w_g},
          {"w_h1", w_h1},         {"w_h2", w_h2},
          {"gate_w_mov", gate_w_mov}, {"gate_w_fix", gate_w_fix},
          {"gate_b_mov", gate_b_mov}, {"gate_b_fix", gate_b_fix},
          {"w_o_mov", w_o_mov},   {"w_o_fix", w_o_fix},
          {"b_o_mov", b_o_mov},   {"b_o_fix", b_o_fix},
          {"scale_mov", scale_mov}, {"scale_fix", scale_fix},
          {"shift_mov", shift_mov}, {"shift_fix", shift_fix}};
}

void CoAttentionParams::save(const std::string& path) const {
  save_tensors(path, named_parameters());
}

CoAttentionParams CoAttentionParams::load(const std::string& path) {
  auto loaded = load_tensors(path);
  CoAttentionParams p;
  auto take = [&](const char* name) {
    auto it = loaded.find(name);
    if (it == loaded.end())
      throw std::runtime_error("co-attention container is missing tensor '" +
                               std::string(name) + "'");
    it->second.set_requires_grad(true);
    return it->second;
  };
  p.w_f = take("w_f");
  p.w_g = take("w_g");
  p.w_h1 = take("w_h1");
  p.w_h2 = take("w_h2");
  p.gate_w_mov = take("gate_w_mov");
  p.gate_w_fix = take("gate_w_fix");
  p.gate_b_mov = take("gate_b_mov");
  p.gate_b_fix = take("gate_b_fix");
  p.w_o_mov = take("w_o_mov");
  p.w_o_fix = take("w_o_fix");
  p.b_o_mov = take("b_o_mov");
  p.b_o_fix = take("b_o_fix");
  p.scale_mov = take("scale_mov");
  p.scale_fix = take("scale_fix");
  p.shift_mov = take("shift_mov");
  p.shift_fix = take("shift_fix");
  p.channels = p.w_f.shape()[0];
  return p;
}

namespace {

// (C,W,H,D) -> (N,C) with N = W*H*D.
Tensor flatten_positions(const Tensor& t) {
  const std::size_t C = t.shape()[0];
  const std::size_t N = t.size() / C;
  return transpose(reshape(t, Shape{C, N}));
}

Tensor unflatten_positions(const Tensor& t, const Shape& spatial) {
  Shape out{t.shape()[1], spatial[1], spatial[2], spatial[3]};
  return reshape(transpose(t), out);
}

// One stream's tail: gate, concat, project, per-channel affine.
Tensor fuse(const Tensor& feats, const Tensor& att, const Tensor& gate_w,
            const Tensor& gate_b, const Tensor& w_o, const Tensor& b_o,
            const Tensor& scale, const Tensor& shift) {
  Tensor gate = sigmoid(add(matmul(att, gate_w), gate_b));  // (N,1)
  Tensor gated = mul(att, gate);                            // broadcast over channels
  Tensor fusedin = concat({feats, gated}, 1);               // (N,2C)
  Tensor projected = add(matmul(fusedin, w_o), b_o);        // (N,C)
  return add(mul(projected, scale), shift);
}

}  // namespace

std::pair<FeatureMap, FeatureMap> coattend(const FeatureMap& f_mov,
                                           const FeatureMap& f_fix,
                                           const CoAttentionParams& p,
                                           std::size_t max_positions) {
  if (f_mov.data.shape() != f_fix.data.shape())
    throw std::invalid_argument("coattend: feature maps must share (C,W,H,D), got " +
                                shape_str(f_mov.data.shape()) + " vs " +
                                shape_str(f_fix.data.shape()));
  if (f_mov.channels() != p.channels)
    throw std::invalid_argument("coattend: feature maps have " +
                                std::to_string(f_mov.channels()) +
                                " channels, parameters expect " +
                                std::to_string(p.channels));
  const std::size_t N = f_mov.positions();
  if (N > max_positions)
    throw std::invalid_argument(
        "coattend: similarity matrix budget exceeded: N=" + std::to_string(N) +
        " positions would need an NxN matrix; the configured budget is N<=" +
        std::to_string(max_positions));

  Tensor mov = flatten_positions(f_mov.data);  // (N,C)
  Tensor fix = flatten_positions(f_fix.data);

  Tensor s = matmul(matmul(mov, p.w_f), transpose(matmul(fix, p.w_g)));  // (N,N)
  Tensor att_mov = matmul(softmax(s, 1), matmul(fix, p.w_h2));           // (N,C)
  Tensor att_fix = matmul(softmax(transpose(s), 1), matmul(mov, p.w_h1));

  Tensor o_mov = fuse(mov, att_mov, p.gate_w_mov, p.gate_b_mov, p.w_o_mov, p.b_o_mov,
                      p.scale_mov, p.shift_mov);
  Tensor o_fix = fuse(fix, att_fix, p.gate_w_fix, p.gate_b_fix, p.w_o_fix, p.b_o_fix,
                      p.scale_fix, p.shift_fix);

  return {FeatureMap(unflatten_positions(o_mov, f_mov.data.shape())),
          FeatureMap(unflatten_positions(o_fix, f_fix.data.shape()))};
}

}  // namespace dpreg
