#include "dpreg/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

namespace dpreg {

std::size_t shape_size(const Shape& s) {
  std::size_t n = 1;
  for (auto d : s) n *= d;
  return n;
}

std::string shape_str(const Shape& s) {
  std::string out = "(";
  for (std::size_t i = 0; i < s.size(); ++i) {
    out += std::to_string(s[i]);
    if (i + 1 < s.size()) out += ",";
  }
  out += ")";
  return out;
}

namespace detail {

void TensorImpl::accumulate(const double* g, std::size_t n) {
  if (n != data.size())
    throw std::invalid_argument("gradient size mismatch: got " + std::to_string(n) +
                                ", tensor has " + std::to_string(data.size()));
  auto& buf = grad_buffer();
  for (std::size_t i = 0; i < n; ++i) buf[i] += g[i];
}

std::vector<double>& TensorImpl::grad_buffer() {
  if (grad.empty()) grad.assign(data.size(), 0.0);
  return grad;
}

}  // namespace detail

using detail::Node;
using detail::TensorImpl;

Tensor::Tensor() : impl_(std::make_shared<TensorImpl>()) {
  impl_->shape = {1};
  impl_->data = {0.0};
}

Tensor::Tensor(Shape shape, double fill, bool requires_grad)
    : impl_(std::make_shared<TensorImpl>()) {
  impl_->shape = std::move(shape);
  impl_->data.assign(shape_size(impl_->shape), fill);
  impl_->requires_grad = requires_grad;
}

Tensor::Tensor(Shape shape, std::vector<double> data, bool requires_grad)
    : impl_(std::make_shared<TensorImpl>()) {
  if (shape_size(shape) != data.size())
    throw std::invalid_argument("tensor data length " + std::to_string(data.size()) +
                                " does not match shape " + shape_str(shape));
  impl_->shape = std::move(shape);
  impl_->data = std::move(data);
  impl_->requires_grad = requires_grad;
}

Tensor Tensor::scalar(double v, bool requires_grad) {
  return Tensor(Shape{1}, std::vector<double>{v}, requires_grad);
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return Tensor(std::move(shape), 0.0, requires_grad);
}

void Tensor::set_requires_grad(bool rg) {
  if (impl_->node)
    throw std::logic_error("requires_grad can only be toggled on leaf tensors");
  impl_->requires_grad = rg;
}

std::vector<double> Tensor::grad() const {
  if (impl_->grad.empty()) return std::vector<double>(impl_->size(), 0.0);
  return impl_->grad;
}

void Tensor::zero_grad() { impl_->grad.clear(); }

double Tensor::item() const {
  if (size() != 1)
    throw std::invalid_argument("item() requires a single-element tensor, shape is " +
                                shape_str(shape()));
  return impl_->data[0];
}

Tensor make_op(const char* name, std::vector<Tensor> parents, Shape shape,
               std::vector<double> data, std::function<void(const Tensor& out)> backward_fn) {
  Tensor out(std::move(shape), std::move(data), false);
  bool rg = false;
  for (const auto& p : parents) rg = rg || p.requires_grad();
  if (rg) {
    out.impl_->requires_grad = true;
    auto node = std::make_shared<Node>();
    node->op = name;
    for (const auto& p : parents) node->parents.push_back(p.impl_ptr());
    // The closure must not capture the output tensor (that would cycle
    // impl -> node -> closure -> impl); it receives the impl at call time
    // through a non-owning handle instead.
    node->backward = [fn = std::move(backward_fn)](const TensorImpl& out_impl) {
      Tensor handle;
      handle.impl_ = std::shared_ptr<TensorImpl>(std::shared_ptr<void>(),
                                                 const_cast<TensorImpl*>(&out_impl));
      fn(handle);
    };
    out.impl_->node = node;
  }
  return out;
}

// ---------------------------------------------------------------------------
// backward
// ---------------------------------------------------------------------------

void backward(const Tensor& loss) {
  if (loss.size() != 1)
    throw std::invalid_argument("backward() requires a scalar loss, shape is " +
                                shape_str(loss.shape()));
  if (!loss.requires_grad()) return;

  // Post-order DFS over taped nodes.
  std::vector<TensorImpl*> order;
  std::unordered_set<TensorImpl*> visited;
  std::vector<std::pair<TensorImpl*, std::size_t>> stack;
  if (loss.impl()->node) stack.push_back({loss.impl(), 0});
  visited.insert(loss.impl());
  while (!stack.empty()) {
    TensorImpl* impl = stack.back().first;
    const auto& parents = impl->node->parents;
    bool descended = false;
    while (stack.back().second < parents.size()) {
      TensorImpl* p = parents[stack.back().second].get();
      ++stack.back().second;
      if (p->node && !visited.count(p)) {
        visited.insert(p);
        stack.push_back({p, 0});  // invalidates references into the stack
        descended = true;
        break;
      }
    }
    if (!descended) {
      order.push_back(impl);
      stack.pop_back();
    }
  }

  // Contributions of this pass are computed in fresh buffers; prior grads of
  // taped tensors are restored additively afterwards so repeated backward
  // calls accumulate on every tensor, leaf or not.
  std::unordered_map<TensorImpl*, std::vector<double>> saved;
  for (TensorImpl* impl : order) {
    if (!impl->grad.empty()) {
      saved.emplace(impl, std::move(impl->grad));
      impl->grad.clear();
    }
  }

  {
    double one = 1.0;
    loss.impl()->accumulate(&one, 1);
  }

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    TensorImpl* impl = *it;
    if (impl->grad.empty()) continue;  // no downstream contribution
    impl->node->backward(*impl);
  }

  for (auto& [impl, prev] : saved) {
    auto& buf = impl->grad_buffer();
    for (std::size_t i = 0; i < prev.size(); ++i) buf[i] += prev[i];
  }
}

// ---------------------------------------------------------------------------
// broadcasting helpers
// ---------------------------------------------------------------------------

namespace {

struct BinaryPlan {
  Shape out_shape;
  bool same_shape = false;
  // Padded to out rank; stride 0 marks a broadcast axis.
  std::vector<std::size_t> dims, stride_a, stride_b;
};

BinaryPlan plan_binary(const Shape& a, const Shape& b, const char* opname) {
  BinaryPlan plan;
  if (a == b) {
    plan.out_shape = a;
    plan.same_shape = true;
    return plan;
  }
  const std::size_t rank = std::max(a.size(), b.size());
  plan.dims.resize(rank);
  Shape pa(rank, 1), pb(rank, 1);
  std::copy(a.begin(), a.end(), pa.begin() + (rank - a.size()));
  std::copy(b.begin(), b.end(), pb.begin() + (rank - b.size()));
  for (std::size_t i = 0; i < rank; ++i) {
    if (pa[i] != pb[i] && pa[i] != 1 && pb[i] != 1)
      throw std::invalid_argument(std::string(opname) + ": shapes " + shape_str(a) +
                                  " and " + shape_str(b) + " are not broadcast-compatible");
    plan.dims[i] = std::max(pa[i], pb[i]);
  }
  plan.out_shape = plan.dims;
  plan.stride_a.assign(rank, 0);
  plan.stride_b.assign(rank, 0);
  std::size_t sa = 1, sb = 1;
  for (std::size_t i = rank; i-- > 0;) {
    plan.stride_a[i] = (pa[i] == 1) ? 0 : sa;
    plan.stride_b[i] = (pb[i] == 1) ? 0 : sb;
    sa *= pa[i];
    sb *= pb[i];
  }
  return plan;
}

// Odometer walk over the broadcast output space, calling f(iout, ia, ib).
template <class F>
void for_each_broadcast(const BinaryPlan& plan, F&& f) {
  const std::size_t total = shape_size(plan.out_shape);
  const std::size_t rank = plan.dims.size();
  std::vector<std::size_t> idx(rank, 0);
  std::size_t ia = 0, ib = 0;
  for (std::size_t i = 0; i < total; ++i) {
    f(i, ia, ib);
    for (std::size_t ax = rank; ax-- > 0;) {
      ++idx[ax];
      ia += plan.stride_a[ax];
      ib += plan.stride_b[ax];
      if (idx[ax] < plan.dims[ax]) break;
      ia -= plan.stride_a[ax] * plan.dims[ax];
      ib -= plan.stride_b[ax] * plan.dims[ax];
      idx[ax] = 0;
    }
  }
}

enum class BinOp { Add, Sub, Mul, Div };

double apply_bin(BinOp op, double x, double y) {
  switch (op) {
    case BinOp::Add: return x + y;
    case BinOp::Sub: return x - y;
    case BinOp::Mul: return x * y;
    case BinOp::Div: return x / y;
  }
  return 0.0;
}

Tensor binary_op(BinOp op, const char* name, const Tensor& a, const Tensor& b) {
  BinaryPlan plan = plan_binary(a.shape(), b.shape(), name);
  std::vector<double> out(shape_size(plan.out_shape));
  const double* pa = a.data();
  const double* pb = b.data();
  if (plan.same_shape) {
    const std::size_t n = out.size();
    switch (op) {
      case BinOp::Add: for (std::size_t i = 0; i < n; ++i) out[i] = pa[i] + pb[i]; break;
      case BinOp::Sub: for (std::size_t i = 0; i < n; ++i) out[i] = pa[i] - pb[i]; break;
      case BinOp::Mul: for (std::size_t i = 0; i < n; ++i) out[i] = pa[i] * pb[i]; break;
      case BinOp::Div: for (std::size_t i = 0; i < n; ++i) out[i] = pa[i] / pb[i]; break;
    }
  } else {
    for_each_broadcast(plan, [&](std::size_t i, std::size_t ia, std::size_t ib) {
      out[i] = apply_bin(op, pa[ia], pb[ib]);
    });
  }

  return make_op(name, {a, b}, plan.out_shape, std::move(out),
                 [op, a, b, plan](const Tensor& o) {
                   const double* g = o.impl()->grad.data();
                   const double* pa = a.data();
                   const double* pb = b.data();
                   const bool need_a = a.requires_grad();
                   const bool need_b = b.requires_grad();
                   if (plan.same_shape) {
                     const std::size_t n = o.size();
                     if (need_a) {
                       auto& ga = a.impl()->grad_buffer();
                       switch (op) {
                         case BinOp::Add:
                         case BinOp::Sub:
                           for (std::size_t i = 0; i < n; ++i) ga[i] += g[i];
                           break;
                         case BinOp::Mul:
                           for (std::size_t i = 0; i < n; ++i) ga[i] += g[i] * pb[i];
                           break;
                         case BinOp::Div:
                           for (std::size_t i = 0; i < n; ++i) ga[i] += g[i] / pb[i];
                           break;
                       }
                     }
                     if (need_b) {
                       auto& gb = b.impl()->grad_buffer();
                       switch (op) {
                         case BinOp::Add:
                           for (std::size_t i = 0; i < n; ++i) gb[i] += g[i];
                           break;
                         case BinOp::Sub:
                           for (std::size_t i = 0; i < n; ++i) gb[i] -= g[i];
                           break;
                         case BinOp::Mul:
                           for (std::size_t i = 0; i < n; ++i) gb[i] += g[i] * pa[i];
                           break;
                         case BinOp::Div:
                           for (std::size_t i = 0; i < n; ++i)
                             gb[i] -= g[i] * pa[i] / (pb[i] * pb[i]);
                           break;
                       }
                     }
                     return;
                   }
                   std::vector<double>* ga = need_a ? &a.impl()->grad_buffer() : nullptr;
                   std::vector<double>* gb = need_b ? &b.impl()->grad_buffer() : nullptr;
                   for_each_broadcast(plan, [&](std::size_t i, std::size_t ia, std::size_t ib) {
                     const double gi = g[i];
                     switch (op) {
                       case BinOp::Add:
                         if (ga) (*ga)[ia] += gi;
                         if (gb) (*gb)[ib] += gi;
                         break;
                       case BinOp::Sub:
                         if (ga) (*ga)[ia] += gi;
                         if (gb) (*gb)[ib] -= gi;
                         break;
                       case BinOp::Mul:
                         if (ga) (*ga)[ia] += gi * pb[ib];
                         if (gb) (*gb)[ib] += gi * pa[ia];
                         break;
                       case BinOp::Div:
                         if (ga) (*ga)[ia] += gi / pb[ib];
                         if (gb) (*gb)[ib] -= gi * pa[ia] / (pb[ib] * pb[ib]);
                         break;
                     }
                   });
                 });
}

Tensor unary_op(const char* name, const Tensor& a, std::vector<double> out,
                std::function<void(const Tensor& out, const Tensor& a)> bw) {
  Shape shape = a.shape();
  return make_op(name, {a}, std::move(shape), std::move(out),
                 [a, bw = std::move(bw)](const Tensor& o) {
                   if (a.requires_grad()) bw(o, a);
                 });
}

}  // namespace

// ---------------------------------------------------------------------------
// elementwise
// ---------------------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) { return binary_op(BinOp::Add, "add", a, b); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary_op(BinOp::Sub, "sub", a, b); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary_op(BinOp::Mul, "mul", a, b); }
Tensor div(const Tensor& a, const Tensor& b) { return binary_op(BinOp::Div, "div", a, b); }

Tensor add(const Tensor& a, double s) {
  std::vector<double> out(a.values());
  for (auto& v : out) v += s;
  return unary_op("add_s", a, std::move(out), [](const Tensor& o, const Tensor& a) {
    a.impl()->accumulate(o.impl()->grad.data(), o.size());
  });
}

Tensor sub(const Tensor& a, double s) { return add(a, -s); }

Tensor sub(double s, const Tensor& a) {
  std::vector<double> out(a.size());
  const double* p = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = s - p[i];
  return unary_op("rsub_s", a, std::move(out), [](const Tensor& o, const Tensor& a) {
    const double* g = o.impl()->grad.data();
    auto& ga = a.impl()->grad_buffer();
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] -= g[i];
  });
}

Tensor mul(const Tensor& a, double s) {
  std::vector<double> out(a.values());
  for (auto& v : out) v *= s;
  return unary_op("mul_s", a, std::move(out), [s](const Tensor& o, const Tensor& a) {
    const double* g = o.impl()->grad.data();
    auto& ga = a.impl()->grad_buffer();
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * s;
  });
}

Tensor div(const Tensor& a, double s) { return mul(a, 1.0 / s); }
Tensor neg(const Tensor& a) { return mul(a, -1.0); }

// ---------------------------------------------------------------------------
// matmul / transpose
// ---------------------------------------------------------------------------

namespace {
void matmul_raw(const double* a, const double* b, double* out, std::size_t M,
                std::size_t K, std::size_t N) {
  std::fill(out, out + M * N, 0.0);
  for (std::size_t i = 0; i < M; ++i) {
    for (std::size_t k = 0; k < K; ++k) {
      const double av = a[i * K + k];
      const double* brow = b + k * N;
      double* orow = out + i * N;
      for (std::size_t j = 0; j < N; ++j) orow[j] += av * brow[j];
    }
  }
}
}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2)
    throw std::invalid_argument("matmul: expects 2-D operands, got " + shape_str(a.shape()) +
                                " and " + shape_str(b.shape()));
  const std::size_t M = a.shape()[0], K = a.shape()[1];
  const std::size_t K2 = b.shape()[0], N = b.shape()[1];
  if (K != K2)
    throw std::invalid_argument("matmul: inner dimensions disagree: " + shape_str(a.shape()) +
                                " x " + shape_str(b.shape()));
  std::vector<double> out(M * N);
  matmul_raw(a.data(), b.data(), out.data(), M, K, N);
  return make_op("matmul", {a, b}, Shape{M, N}, std::move(out),
                 [a, b, M, K, N](const Tensor& o) {
                   const double* g = o.impl()->grad.data();
                   if (a.requires_grad()) {
                     // dA = G * B^T
                     auto& ga = a.impl()->grad_buffer();
                     const double* pb = b.data();
                     for (std::size_t i = 0; i < M; ++i)
                       for (std::size_t k = 0; k < K; ++k) {
                         double acc = 0.0;
                         for (std::size_t j = 0; j < N; ++j)
                           acc += g[i * N + j] * pb[k * N + j];
                         ga[i * K + k] += acc;
                       }
                   }
                   if (b.requires_grad()) {
                     // dB = A^T * G
                     auto& gb = b.impl()->grad_buffer();
                     const double* pa = a.data();
                     for (std::size_t k = 0; k < K; ++k)
                       for (std::size_t i = 0; i < M; ++i) {
                         const double av = pa[i * K + k];
                         for (std::size_t j = 0; j < N; ++j)
                           gb[k * N + j] += av * g[i * N + j];
                       }
                   }
                 });
}

Tensor transpose(const Tensor& a) {
  if (a.rank() != 2)
    throw std::invalid_argument("transpose: expects a 2-D tensor, got " + shape_str(a.shape()));
  const std::size_t R = a.shape()[0], C = a.shape()[1];
  std::vector<double> out(R * C);
  const double* p = a.data();
  for (std::size_t i = 0; i < R; ++i)
    for (std::size_t j = 0; j < C; ++j) out[j * R + i] = p[i * C + j];
  return make_op("transpose", {a}, Shape{C, R}, std::move(out), [a, R, C](const Tensor& o) {
    if (!a.requires_grad()) return;
    const double* g = o.impl()->grad.data();
    auto& ga = a.impl()->grad_buffer();
    for (std::size_t j = 0; j < C; ++j)
      for (std::size_t i = 0; i < R; ++i) ga[i * C + j] += g[j * R + i];
  });
}

// ---------------------------------------------------------------------------
// softmax / pointwise nonlinearities
// ---------------------------------------------------------------------------

namespace {
int normalize_axis(int axis, std::size_t rank, const char* opname) {
  int ax = axis;
  if (ax < 0) ax += static_cast<int>(rank);
  if (ax < 0 || ax >= static_cast<int>(rank))
    throw std::invalid_argument(std::string(opname) + ": axis " + std::to_string(axis) +
                                " out of range for rank " + std::to_string(rank));
  return ax;
}
}  // namespace

Tensor softmax(const Tensor& a, int axis) {
  const int ax = normalize_axis(axis, a.rank(), "softmax");
  const auto& dims = a.shape();
  std::size_t outer = 1, inner = 1;
  for (int i = 0; i < ax; ++i) outer *= dims[i];
  const std::size_t L = dims[ax];
  for (std::size_t i = ax + 1; i < dims.size(); ++i) inner *= dims[i];

  std::vector<double> out(a.size());
  const double* p = a.data();
  for (std::size_t o = 0; o < outer; ++o)
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * L * inner + in;
      double mx = p[base];
      for (std::size_t j = 1; j < L; ++j) mx = std::max(mx, p[base + j * inner]);
      double denom = 0.0;
      for (std::size_t j = 0; j < L; ++j) {
        const double e = std::exp(p[base + j * inner] - mx);
        out[base + j * inner] = e;
        denom += e;
      }
      for (std::size_t j = 0; j < L; ++j) out[base + j * inner] /= denom;
    }

  return make_op("softmax", {a}, a.shape(), std::move(out),
                 [a, outer, L, inner](const Tensor& o) {
                   if (!a.requires_grad()) return;
                   const double* y = o.data();
                   const double* g = o.impl()->grad.data();
                   auto& ga = a.impl()->grad_buffer();
                   for (std::size_t ou = 0; ou < outer; ++ou)
                     for (std::size_t in = 0; in < inner; ++in) {
                       const std::size_t base = ou * L * inner + in;
                       double dot = 0.0;
                       for (std::size_t j = 0; j < L; ++j)
                         dot += g[base + j * inner] * y[base + j * inner];
                       for (std::size_t j = 0; j < L; ++j) {
                         const std::size_t k = base + j * inner;
                         ga[k] += y[k] * (g[k] - dot);
                       }
                     }
                 });
}

Tensor sigmoid(const Tensor& a) {
  std::vector<double> out(a.size());
  const double* p = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double x = p[i];
    if (x >= 0) {
      out[i] = 1.0 / (1.0 + std::exp(-x));
    } else {
      const double e = std::exp(x);
      out[i] = e / (1.0 + e);
    }
  }
  return unary_op("sigmoid", a, std::move(out), [](const Tensor& o, const Tensor& a) {
    const double* y = o.data();
    const double* g = o.impl()->grad.data();
    auto& ga = a.impl()->grad_buffer();
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * y[i] * (1.0 - y[i]);
  });
}

Tensor exp(const Tensor& a) {
  std::vector<double> out(a.size());
  const double* p = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::exp(p[i]);
  return unary_op("exp", a, std::move(out), [](const Tensor& o, const Tensor& a) {
    const double* y = o.data();
    const double* g = o.impl()->grad.data();
    auto& ga = a.impl()->grad_buffer();
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * y[i];
  });
}

Tensor log(const Tensor& a) {
  std::vector<double> out(a.size());
  const double* p = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) {
    if (!(p[i] > 0.0))
      throw std::domain_error("log: input must be strictly positive, got " +
                              std::to_string(p[i]) + " at index " + std::to_string(i));
    out[i] = std::log(p[i]);
  }
  return unary_op("log", a, std::move(out), [](const Tensor& o, const Tensor& a) {
    const double* g = o.impl()->grad.data();
    const double* x = a.data();
    auto& ga = a.impl()->grad_buffer();
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] / x[i];
  });
}

Tensor square(const Tensor& a) {
  std::vector<double> out(a.size());
  const double* p = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = p[i] * p[i];
  return unary_op("square", a, std::move(out), [](const Tensor& o, const Tensor& a) {
    const double* g = o.impl()->grad.data();
    const double* x = a.data();
    auto& ga = a.impl()->grad_buffer();
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += 2.0 * g[i] * x[i];
  });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
  if (!(lo <= hi)) throw std::invalid_argument("clamp: lo must not exceed hi");
  std::vector<double> out(a.size());
  const double* p = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::min(std::max(p[i], lo), hi);
  return unary_op("clamp", a, std::move(out), [lo, hi](const Tensor& o, const Tensor& a) {
    const double* g = o.impl()->grad.data();
    const double* x = a.data();
    auto& ga = a.impl()->grad_buffer();
    for (std::size_t i = 0; i < ga.size(); ++i)
      if (x[i] > lo && x[i] < hi) ga[i] += g[i];
  });
}

// ---------------------------------------------------------------------------
// reductions
// ---------------------------------------------------------------------------

namespace {
struct ReducePlan {
  Shape out_shape;
  // For each input element, out index advances by ostride on kept axes.
  std::vector<std::size_t> dims, ostride;
  std::size_t count = 1;  // elements folded into each output slot
};

ReducePlan plan_reduce(const Shape& in, const std::vector<int>& axes, const char* opname) {
  ReducePlan plan;
  plan.dims = in;
  std::vector<bool> reduced(in.size(), false);
  if (axes.empty()) {
    reduced.assign(in.size(), true);
  } else {
    for (int raw : axes) {
      const int ax = normalize_axis(raw, in.size(), opname);
      if (reduced[ax])
        throw std::invalid_argument(std::string(opname) + ": duplicate axis " +
                                    std::to_string(raw));
      reduced[ax] = true;
    }
  }
  for (std::size_t i = 0; i < in.size(); ++i) {
    if (reduced[i]) plan.count *= in[i];
    else plan.out_shape.push_back(in[i]);
  }
  if (plan.out_shape.empty()) plan.out_shape = {1};
  plan.ostride.assign(in.size(), 0);
  std::size_t stride = 1;
  for (std::size_t i = in.size(); i-- > 0;) {
    if (!reduced[i]) {
      plan.ostride[i] = stride;
      stride *= in[i];
    }
  }
  return plan;
}

template <class F>
void for_each_reduce(const ReducePlan& plan, F&& f) {
  const std::size_t total = shape_size(plan.dims);
  const std::size_t rank = plan.dims.size();
  std::vector<std::size_t> idx(rank, 0);
  std::size_t oi = 0;
  for (std::size_t i = 0; i < total; ++i) {
    f(i, oi);
    for (std::size_t ax = rank; ax-- > 0;) {
      ++idx[ax];
      oi += plan.ostride[ax];
      if (idx[ax] < plan.dims[ax]) break;
      oi -= plan.ostride[ax] * plan.dims[ax];
      idx[ax] = 0;
    }
  }
}

Tensor reduce_op(const Tensor& a, const std::vector<int>& axes, bool take_mean,
                 const char* name) {
  ReducePlan plan = plan_reduce(a.shape(), axes, name);
  std::vector<double> out(shape_size(plan.out_shape), 0.0);
  const double* p = a.data();
  for_each_reduce(plan, [&](std::size_t i, std::size_t oi) { out[oi] += p[i]; });
  const double scale = take_mean ? 1.0 / static_cast<double>(plan.count) : 1.0;
  if (take_mean)
    for (auto& v : out) v *= scale;
  return make_op(name, {a}, plan.out_shape, std::move(out),
                 [a, plan, scale](const Tensor& o) {
                   if (!a.requires_grad()) return;
                   const double* g = o.impl()->grad.data();
                   auto& ga = a.impl()->grad_buffer();
                   for_each_reduce(plan, [&](std::size_t i, std::size_t oi) {
                     ga[i] += g[oi] * scale;
                   });
                 });
}
}  // namespace

Tensor sum(const Tensor& a, const std::vector<int>& axes) {
  return reduce_op(a, axes, false, "sum");
}

Tensor mean(const Tensor& a, const std::vector<int>& axes) {
  return reduce_op(a, axes, true, "mean");
}

// ---------------------------------------------------------------------------
// concat / slice / reshape
// ---------------------------------------------------------------------------

Tensor concat(const std::vector<Tensor>& parts, int axis) {
  if (parts.empty()) throw std::invalid_argument("concat: needs at least one input");
  const std::size_t rank = parts[0].rank();
  const int ax = normalize_axis(axis, rank, "concat");
  std::size_t axis_total = 0;
  for (const auto& t : parts) {
    if (t.rank() != rank)
      throw std::invalid_argument("concat: rank mismatch between inputs");
    for (std::size_t i = 0; i < rank; ++i)
      if (static_cast<int>(i) != ax && t.shape()[i] != parts[0].shape()[i])
        throw std::invalid_argument("concat: non-axis extents differ: " +
                                    shape_str(parts[0].shape()) + " vs " +
                                    shape_str(t.shape()));
    axis_total += t.shape()[ax];
  }
  Shape out_shape = parts[0].shape();
  out_shape[ax] = axis_total;

  std::size_t outer = 1, inner = 1;
  for (int i = 0; i < ax; ++i) outer *= out_shape[i];
  for (std::size_t i = ax + 1; i < rank; ++i) inner *= out_shape[i];

  std::vector<double> out(shape_size(out_shape));
  std::size_t offset = 0;
  for (const auto& t : parts) {
    const std::size_t la = t.shape()[ax];
    const double* p = t.data();
    for (std::size_t o = 0; o < outer; ++o)
      std::memcpy(out.data() + (o * axis_total + offset) * inner,
                  p + o * la * inner, la * inner * sizeof(double));
    offset += la;
  }

  return make_op("concat", parts, out_shape, std::move(out),
                 [parts, outer, inner, axis_total, ax](const Tensor& o) {
                   const double* g = o.impl()->grad.data();
                   std::size_t offset = 0;
                   for (const auto& t : parts) {
                     const std::size_t la = t.shape()[ax];
                     if (t.requires_grad()) {
                       auto& gt = t.impl()->grad_buffer();
                       for (std::size_t ou = 0; ou < outer; ++ou) {
                         const double* src = g + (ou * axis_total + offset) * inner;
                         double* dst = gt.data() + ou * la * inner;
                         for (std::size_t i = 0; i < la * inner; ++i) dst[i] += src[i];
                       }
                     }
                     offset += la;
                   }
                 });
}

Tensor slice(const Tensor& a, int axis, std::size_t start, std::size_t len) {
  const int ax = normalize_axis(axis, a.rank(), "slice");
  const auto& dims = a.shape();
  if (start + len > dims[ax] || len == 0)
    throw std::invalid_argument("slice: range [" + std::to_string(start) + "," +
                                std::to_string(start + len) + ") invalid for extent " +
                                std::to_string(dims[ax]));
  Shape out_shape = dims;
  out_shape[ax] = len;
  std::size_t outer = 1, inner = 1;
  for (int i = 0; i < ax; ++i) outer *= dims[i];
  for (std::size_t i = ax + 1; i < dims.size(); ++i) inner *= dims[i];
  const std::size_t la = dims[ax];

  std::vector<double> out(shape_size(out_shape));
  const double* p = a.data();
  for (std::size_t o = 0; o < outer; ++o)
    std::memcpy(out.data() + o * len * inner, p + (o * la + start) * inner,
                len * inner * sizeof(double));

  return make_op("slice", {a}, out_shape, std::move(out),
                 [a, outer, inner, la, start, len](const Tensor& o) {
                   if (!a.requires_grad()) return;
                   const double* g = o.impl()->grad.data();
                   auto& ga = a.impl()->grad_buffer();
                   for (std::size_t ou = 0; ou < outer; ++ou) {
                     double* dst = ga.data() + (ou * la + start) * inner;
                     const double* src = g + ou * len * inner;
                     for (std::size_t i = 0; i < len * inner; ++i) dst[i] += src[i];
                   }
                 });
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_size(shape) != a.size())
    throw std::invalid_argument("reshape: size mismatch: " + shape_str(a.shape()) + " -> " +
                                shape_str(shape));
  std::vector<double> out(a.values());
  return make_op("reshape", {a}, std::move(shape), std::move(out), [a](const Tensor& o) {
    if (a.requires_grad()) a.impl()->accumulate(o.impl()->grad.data(), o.size());
  });
}

}  // namespace dpreg
