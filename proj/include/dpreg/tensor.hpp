// Reverse-mode automatic differentiation over dense n-d arrays of doubles.
// Tape-based: every operation records a backward closure on its output node;
// backward() replays the tape in reverse topological order. Tensors are
// immutable after forward creation except for gradient accumulation.

#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace dpreg {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& s);
std::string shape_str(const Shape& s);

class Tensor;

namespace detail {

struct Node;

struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  bool requires_grad = false;
  std::vector<double> grad;  // empty until the first accumulation
  std::shared_ptr<Node> node;  // null on leaves

  std::size_t size() const { return data.size(); }
  void accumulate(const double* g, std::size_t n);
  std::vector<double>& grad_buffer();  // sized and zeroed on demand
};

struct Node {
  const char* op;
  std::vector<std::shared_ptr<TensorImpl>> parents;
  // Reads out.grad, accumulates into the parents' grad buffers.
  std::function<void(const TensorImpl& out)> backward;
};

}  // namespace detail

class Tensor {
 public:
  Tensor();
  explicit Tensor(Shape shape, double fill = 0.0, bool requires_grad = false);
  Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

  static Tensor scalar(double v, bool requires_grad = false);
  static Tensor zeros(Shape shape, bool requires_grad = false);

  const Shape& shape() const { return impl_->shape; }
  std::size_t size() const { return impl_->size(); }
  std::size_t rank() const { return impl_->shape.size(); }

  const double* data() const { return impl_->data.data(); }
  double* data() { return impl_->data.data(); }
  const std::vector<double>& values() const { return impl_->data; }

  bool requires_grad() const { return impl_->requires_grad; }
  void set_requires_grad(bool rg);

  bool has_grad() const { return !impl_->grad.empty(); }
  // Gradient as a same-shape vector; zeros if backward never reached this tensor.
  std::vector<double> grad() const;
  void zero_grad();
  void accumulate_grad(const double* g, std::size_t n) { impl_->accumulate(g, n); }

  // Value of a single-element tensor.
  double item() const;

  bool defined() const { return impl_ != nullptr; }
  detail::TensorImpl* impl() const { return impl_.get(); }
  std::shared_ptr<detail::TensorImpl> impl_ptr() const { return impl_; }

 private:
  std::shared_ptr<detail::TensorImpl> impl_;
  friend Tensor make_op(const char* name, std::vector<Tensor> parents, Shape shape,
                        std::vector<double> data,
                        std::function<void(const Tensor& out)> backward);
};

// Extension point: modules register fused primitives through this builder.
// The backward closure receives the output tensor (with populated grad) and is
// responsible for accumulating into each differentiable parent.
Tensor make_op(const char* name, std::vector<Tensor> parents, Shape shape,
               std::vector<double> data,
               std::function<void(const Tensor& out)> backward);

// Propagates d(loss)/d(tensor) into every reachable requires_grad tensor.
// loss must be a single-element tensor. Repeated calls accumulate.
void backward(const Tensor& loss);

// Elementwise with size-1-axis broadcasting (left-padded ranks).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

Tensor add(const Tensor& a, double s);
Tensor sub(const Tensor& a, double s);
Tensor sub(double s, const Tensor& a);
Tensor mul(const Tensor& a, double s);
Tensor div(const Tensor& a, double s);
Tensor neg(const Tensor& a);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
inline Tensor operator+(const Tensor& a, double s) { return add(a, s); }
inline Tensor operator+(double s, const Tensor& a) { return add(a, s); }
inline Tensor operator-(const Tensor& a, double s) { return sub(a, s); }
inline Tensor operator-(double s, const Tensor& a) { return sub(s, a); }
inline Tensor operator*(const Tensor& a, double s) { return mul(a, s); }
inline Tensor operator*(double s, const Tensor& a) { return mul(a, s); }
inline Tensor operator/(const Tensor& a, double s) { return div(a, s); }
inline Tensor operator-(const Tensor& a) { return neg(a); }

// 2-D matrix product (M,K)x(K,N).
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);  // 2-D

// Max-subtracted softmax along `axis`; each slice sums to 1.
Tensor softmax(const Tensor& a, int axis);

Tensor sigmoid(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);  // requires strictly positive input
Tensor square(const Tensor& a);
Tensor clamp(const Tensor& a, double lo, double hi);

// Reductions. Empty `axes` reduces everything to a {1} tensor; otherwise the
// listed axes are removed from the shape.
Tensor sum(const Tensor& a, const std::vector<int>& axes = {});
Tensor mean(const Tensor& a, const std::vector<int>& axes = {});

Tensor concat(const std::vector<Tensor>& parts, int axis);
Tensor slice(const Tensor& a, int axis, std::size_t start, std::size_t len);
Tensor reshape(const Tensor& a, Shape shape);

}  // namespace dpreg
