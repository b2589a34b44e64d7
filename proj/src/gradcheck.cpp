#include "dpreg/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace dpreg {

Tensor random_tensor(Shape shape, std::mt19937_64& rng, double lo, double hi,
                     bool requires_grad) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> data(shape_size(shape));
  for (auto& v : data) v = dist(rng);
  return Tensor(std::move(shape), std::move(data), requires_grad);
}

namespace {

std::vector<std::vector<double>> analytic_grads(const LossFn& f,
                                                std::vector<Tensor>& leaves) {
  for (auto& l : leaves) l.zero_grad();
  Tensor loss = f();
  backward(loss);
  std::vector<std::vector<double>> grads;
  grads.reserve(leaves.size());
  for (auto& l : leaves) grads.push_back(l.grad());
  for (auto& l : leaves) l.zero_grad();
  return grads;
}

double grad_scale(const std::vector<std::vector<double>>& a,
                  const std::vector<std::vector<double>>& n) {
  double s = 0.0;
  for (const auto& g : a)
    for (double v : g) s = std::max(s, std::abs(v));
  for (const auto& g : n)
    for (double v : g) s = std::max(s, std::abs(v));
  return std::max(s, 1e-8);
}

}  // namespace

double fd_check_elementwise(const LossFn& f, std::vector<Tensor> leaves, double h,
                            double analytic_scale) {
  auto analytic = analytic_grads(f, leaves);
  for (auto& g : analytic)
    for (auto& v : g) v *= analytic_scale;
  std::vector<std::vector<double>> numeric(leaves.size());
  for (std::size_t li = 0; li < leaves.size(); ++li) {
    Tensor& leaf = leaves[li];
    numeric[li].resize(leaf.size());
    for (std::size_t i = 0; i < leaf.size(); ++i) {
      const double saved = leaf.data()[i];
      leaf.data()[i] = saved + h;
      const double fp = f().item();
      leaf.data()[i] = saved - h;
      const double fm = f().item();
      leaf.data()[i] = saved;
      numeric[li][i] = (fp - fm) / (2.0 * h);
    }
  }
  const double scale = grad_scale(analytic, numeric);
  double err = 0.0;
  for (std::size_t li = 0; li < leaves.size(); ++li)
    for (std::size_t i = 0; i < analytic[li].size(); ++i)
      err = std::max(err, std::abs(analytic[li][i] - numeric[li][i]) / scale);
  return err;
}

double fd_check_directional(const LossFn& f, std::vector<Tensor> leaves, std::uint64_t seed,
                            int probes, double h, double analytic_scale) {
  auto analytic = analytic_grads(f, leaves);
  for (auto& g : analytic)
    for (auto& v : g) v *= analytic_scale;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  double err = 0.0;
  double scale = 1e-8;
  for (const auto& g : analytic)
    for (double v : g) scale = std::max(scale, std::abs(v));

  for (std::size_t li = 0; li < leaves.size(); ++li) {
    Tensor& leaf = leaves[li];
    const std::size_t n = leaf.size();
    for (int probe = 0; probe < probes; ++probe) {
      std::vector<double> dir(n);
      double norm = 0.0;
      for (auto& d : dir) {
        d = gauss(rng);
        norm += d * d;
      }
      norm = std::sqrt(std::max(norm, 1e-300));
      for (auto& d : dir) d /= norm;

      double dot = 0.0;
      for (std::size_t i = 0; i < n; ++i) dot += analytic[li][i] * dir[i];

      std::vector<double> saved(leaf.data(), leaf.data() + n);
      for (std::size_t i = 0; i < n; ++i) leaf.data()[i] = saved[i] + h * dir[i];
      const double fp = f().item();
      for (std::size_t i = 0; i < n; ++i) leaf.data()[i] = saved[i] - h * dir[i];
      const double fm = f().item();
      std::copy(saved.begin(), saved.end(), leaf.data());

      const double numeric = (fp - fm) / (2.0 * h);
      err = std::max(err, std::abs(dot - numeric) / std::max(scale, std::abs(numeric)));
    }
  }
  return err;
}

}  // namespace dpreg
