#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <memory>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "lfinr/common.hpp"

namespace lfinr {

using Shape = std::vector<int>;

inline std::int64_t numel(const Shape& s) {
  std::int64_t n = 1;
  for (int e : s) n *= e;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? "x" : "") + std::to_string(s[i]);
  return out + "]";
}

template <typename S>
using Vec = Eigen::Array<S, Eigen::Dynamic, 1>;

template <typename S>
struct TensorData {
  Shape shape;
  Vec<S> value;
  Vec<S> grad;  // empty until backward touches this node
  bool requires_grad = false;

  void ensure_grad() {
    if (grad.size() != value.size()) grad = Vec<S>::Zero(value.size());
  }
};

// Lightweight handle to a tensor node; copies share the underlying storage.
template <typename S>
class Tensor {
public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<TensorData<S>> d) : d_(std::move(d)) {}

  static Tensor zeros(Shape shape) {
    auto d = std::make_shared<TensorData<S>>();
    d->value = Vec<S>::Zero(lfinr::numel(shape));
    d->shape = std::move(shape);
    return Tensor(d);
  }

  static Tensor constant(Shape shape, S v) {
    Tensor t = zeros(std::move(shape));
    t.value().setConstant(v);
    return t;
  }

  static Tensor from_vector(Shape shape, const std::vector<S>& data) {
    Tensor t = zeros(std::move(shape));
    if (static_cast<std::int64_t>(data.size()) != t.numel())
      throw NumericError("from_vector: data length does not match shape");
    for (std::size_t i = 0; i < data.size(); ++i) t.value()[static_cast<Eigen::Index>(i)] = data[i];
    return t;
  }

  bool valid() const { return static_cast<bool>(d_); }
  const Shape& shape() const { return d_->shape; }
  std::int64_t numel() const { return d_->value.size(); }
  Vec<S>& value() { return d_->value; }
  const Vec<S>& value() const { return d_->value; }
  Vec<S>& grad() { return d_->grad; }
  const Vec<S>& grad() const { return d_->grad; }
  bool requires_grad() const { return d_->requires_grad; }
  void set_requires_grad(bool b) { d_->requires_grad = b; }
  void zero_grad() {
    d_->grad = Vec<S>::Zero(d_->value.size());
  }
  std::shared_ptr<TensorData<S>> data_ptr() const { return d_; }

private:
  std::shared_ptr<TensorData<S>> d_;
};

// Records the backward closures of one forward pass. Single-owner: a tape
// and the tensors recorded on it belong to one training context.
template <typename S>
class Tape {
public:
  void record(std::function<void()> fn) { ops_.push_back(std::move(fn)); }

  std::size_t size() const { return ops_.size(); }

  // Seeds d(loss)/d(loss) = 1 and walks the recorded ops in reverse,
  // accumulating into .grad of every reachable tensor that wants gradients.
  // The tape is cleared afterwards; recording must restart before the next
  // backward call.
  void backward(Tensor<S> loss) {
    if (consumed_)
      throw TrainError("backward called twice without recording a new forward pass");
    if (loss.numel() != 1) throw NumericError("backward: loss must be scalar");
    loss.data_ptr()->ensure_grad();
    loss.grad()[0] = S(1);
    for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) (*it)();
    ops_.clear();
    consumed_ = true;
  }

  void reset() {
    ops_.clear();
    consumed_ = false;
  }

private:
  std::vector<std::function<void()>> ops_;
  bool consumed_ = false;
};

namespace detail {

template <typename S>
inline void check_finite(const Tensor<S>& t, const char* op) {
  if (!t.value().allFinite())
    throw NumericError(std::string(op) + ": non-finite output");
}

template <typename S>
inline bool grad_ready(const std::shared_ptr<TensorData<S>>& d) {
  return d->grad.size() == d->value.size();
}

template <typename S>
inline S stable_sigmoid(S x) {
  if (x >= S(0)) return S(1) / (S(1) + std::exp(-x));
  const S e = std::exp(x);
  return e / (S(1) + e);
}

template <typename S>
inline void require_same_shape(const Tensor<S>& a, const Tensor<S>& b, const char* op) {
  if (a.shape() != b.shape())
    throw NumericError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                       " vs " + shape_str(b.shape()));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise operations
// ---------------------------------------------------------------------------

template <typename S>
Tensor<S> add(Tape<S>* tape, const Tensor<S>& a, const Tensor<S>& b) {
  detail::require_same_shape(a, b, "add");
  Tensor<S> out = Tensor<S>::zeros(a.shape());
  out.value() = a.value() + b.value();
  detail::check_finite(out, "add");
  if (tape && (a.requires_grad() || b.requires_grad())) {
    out.set_requires_grad(true);
    auto ad = a.data_ptr(), bd = b.data_ptr(), od = out.data_ptr();
    tape->record([ad, bd, od]() {
      if (!detail::grad_ready(od)) return;
      if (ad->requires_grad) {
        ad->ensure_grad();
        ad->grad += od->grad;
      }
      if (bd->requires_grad) {
        bd->ensure_grad();
        bd->grad += od->grad;
      }
    });
  }
  return out;
}

template <typename S>
Tensor<S> sub(Tape<S>* tape, const Tensor<S>& a, const Tensor<S>& b) {
  detail::require_same_shape(a, b, "sub");
  Tensor<S> out = Tensor<S>::zeros(a.shape());
  out.value() = a.value() - b.value();
  detail::check_finite(out, "sub");
  if (tape && (a.requires_grad() || b.requires_grad())) {
    out.set_requires_grad(true);
    auto ad = a.data_ptr(), bd = b.data_ptr(), od = out.data_ptr();
    tape->record([ad, bd, od]() {
      if (!detail::grad_ready(od)) return;
      if (ad->requires_grad) {
        ad->ensure_grad();
        ad->grad += od->grad;
      }
      if (bd->requires_grad) {
        bd->ensure_grad();
        bd->grad -= od->grad;
      }
    });
  }
  return out;
}

template <typename S>
Tensor<S> mul(Tape<S>* tape, const Tensor<S>& a, const Tensor<S>& b) {
  detail::require_same_shape(a, b, "mul");
  Tensor<S> out = Tensor<S>::zeros(a.shape());
  out.value() = a.value() * b.value();
  detail::check_finite(out, "mul");
  if (tape && (a.requires_grad() || b.requires_grad())) {
    out.set_requires_grad(true);
    auto ad = a.data_ptr(), bd = b.data_ptr(), od = out.data_ptr();
    tape->record([ad, bd, od]() {
      if (!detail::grad_ready(od)) return;
      if (ad->requires_grad) {
        ad->ensure_grad();
        ad->grad += od->grad * bd->value;
      }
      if (bd->requires_grad) {
        bd->ensure_grad();
        bd->grad += od->grad * ad->value;
      }
    });
  }
  return out;
}

inline constexpr double kDivFloor = 1e-12;

template <typename S>
Tensor<S> divide(Tape<S>* tape, const Tensor<S>& a, const Tensor<S>& b) {
  detail::require_same_shape(a, b, "div");
  if ((b.value().abs() <= S(kDivFloor)).any())
    throw NumericError("div: divisor magnitude at or below 1e-12");
  Tensor<S> out = Tensor<S>::zeros(a.shape());
  out.value() = a.value() / b.value();
  detail::check_finite(out, "div");
  if (tape && (a.requires_grad() || b.requires_grad())) {
    out.set_requires_grad(true);
    auto ad = a.data_ptr(), bd = b.data_ptr(), od = out.data_ptr();
    tape->record([ad, bd, od]() {
      if (!detail::grad_ready(od)) return;
      if (ad->requires_grad) {
        ad->ensure_grad();
        ad->grad += od->grad / bd->value;
      }
      if (bd->requires_grad) {
        bd->ensure_grad();
        bd->grad -= od->grad * ad->value / (bd->value * bd->value);
      }
    });
  }
  return out;
}

template <typename S>
Tensor<S> add_scalar(Tape<S>* tape, const Tensor<S>& a, S c) {
  Tensor<S> out = Tensor<S>::zeros(a.shape());
  out.value() = a.value() + c;
  detail::check_finite(out, "add_scalar");
  if (tape && a.requires_grad()) {
    out.set_requires_grad(true);
    auto ad = a.data_ptr(), od = out.data_ptr();
    tape->record([ad, od]() {
      if (!detail::grad_ready(od)) return;
      ad->ensure_grad();
      ad->grad += od->grad;
    });
  }
  return out;
}

template <typename S>
Tensor<S> mul_scalar(Tape<S>* tape, const Tensor<S>& a, S c) {
  Tensor<S> out = Tensor<S>::zeros(a.shape());
  out.value() = a.value() * c;
  detail::check_finite(out, "mul_scalar");
  if (tape && a.requires_grad()) {
    out.set_requires_grad(true);
    auto ad = a.data_ptr(), od = out.data_ptr();
    tape->record([ad, od, c]() {
      if (!detail::grad_ready(od)) return;
      ad->ensure_grad();
      ad->grad += od->grad * c;
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Activations
// ---------------------------------------------------------------------------

template <typename S>
Tensor<S> sigmoid(Tape<S>* tape, const Tensor<S>& x) {
  Tensor<S> out = Tensor<S>::zeros(x.shape());
  for (Eigen::Index i = 0; i < x.numel(); ++i)
    out.value()[i] = detail::stable_sigmoid(x.value()[i]);
  detail::check_finite(out, "sigmoid");
  if (tape && x.requires_grad()) {
    out.set_requires_grad(true);
    auto xd = x.data_ptr(), od = out.data_ptr();
    tape->record([xd, od]() {
      if (!detail::grad_ready(od)) return;
      xd->ensure_grad();
      xd->grad += od->grad * od->value * (S(1) - od->value);
    });
  }
  return out;
}

template <typename S>
Tensor<S> silu(Tape<S>* tape, const Tensor<S>& x) {
  Tensor<S> out = Tensor<S>::zeros(x.shape());
  for (Eigen::Index i = 0; i < x.numel(); ++i)
    out.value()[i] = x.value()[i] * detail::stable_sigmoid(x.value()[i]);
  detail::check_finite(out, "silu");
  if (tape && x.requires_grad()) {
    out.set_requires_grad(true);
    auto xd = x.data_ptr(), od = out.data_ptr();
    tape->record([xd, od]() {
      if (!detail::grad_ready(od)) return;
      xd->ensure_grad();
      for (Eigen::Index i = 0; i < xd->value.size(); ++i) {
        const S s = detail::stable_sigmoid(xd->value[i]);
        xd->grad[i] += od->grad[i] * s * (S(1) + xd->value[i] * (S(1) - s));
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reductions (double accumulation for accuracy and determinism)
// ---------------------------------------------------------------------------

template <typename S>
Tensor<S> sum(Tape<S>* tape, const Tensor<S>& x) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < x.numel(); ++i) acc += static_cast<double>(x.value()[i]);
  Tensor<S> out = Tensor<S>::constant({1}, static_cast<S>(acc));
  detail::check_finite(out, "sum");
  if (tape && x.requires_grad()) {
    out.set_requires_grad(true);
    auto xd = x.data_ptr(), od = out.data_ptr();
    tape->record([xd, od]() {
      if (!detail::grad_ready(od)) return;
      xd->ensure_grad();
      xd->grad += od->grad[0];
    });
  }
  return out;
}

template <typename S>
Tensor<S> mean(Tape<S>* tape, const Tensor<S>& x) {
  const std::int64_t n = x.numel();
  if (n == 0) throw NumericError("mean: empty tensor");
  double acc = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) acc += static_cast<double>(x.value()[i]);
  Tensor<S> out = Tensor<S>::constant({1}, static_cast<S>(acc / static_cast<double>(n)));
  detail::check_finite(out, "mean");
  if (tape && x.requires_grad()) {
    out.set_requires_grad(true);
    auto xd = x.data_ptr(), od = out.data_ptr();
    const S inv = S(1) / static_cast<S>(n);
    tape->record([xd, od, inv]() {
      if (!detail::grad_ready(od)) return;
      xd->ensure_grad();
      xd->grad += od->grad[0] * inv;
    });
  }
  return out;
}

// abs-then-mean; the subgradient of |x| at 0 is taken as 0.
template <typename S>
Tensor<S> mean_abs(Tape<S>* tape, const Tensor<S>& x) {
  const std::int64_t n = x.numel();
  if (n == 0) throw NumericError("mean_abs: empty tensor");
  double acc = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) acc += std::abs(static_cast<double>(x.value()[i]));
  Tensor<S> out = Tensor<S>::constant({1}, static_cast<S>(acc / static_cast<double>(n)));
  detail::check_finite(out, "mean_abs");
  if (tape && x.requires_grad()) {
    out.set_requires_grad(true);
    auto xd = x.data_ptr(), od = out.data_ptr();
    const S inv = S(1) / static_cast<S>(n);
    tape->record([xd, od, inv]() {
      if (!detail::grad_ready(od)) return;
      xd->ensure_grad();
      const S g = od->grad[0] * inv;
      for (Eigen::Index i = 0; i < xd->value.size(); ++i) {
        const S v = xd->value[i];
        xd->grad[i] += v > S(0) ? g : (v < S(0) ? -g : S(0));
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Shape operations
// ---------------------------------------------------------------------------

template <typename S>
Tensor<S> reshape(Tape<S>* tape, const Tensor<S>& x, Shape shape) {
  if (numel(shape) != x.numel())
    throw NumericError("reshape: element count mismatch " + shape_str(x.shape()) +
                       " -> " + shape_str(shape));
  Tensor<S> out = Tensor<S>::zeros(std::move(shape));
  out.value() = x.value();
  if (tape && x.requires_grad()) {
    out.set_requires_grad(true);
    auto xd = x.data_ptr(), od = out.data_ptr();
    tape->record([xd, od]() {
      if (!detail::grad_ready(od)) return;
      xd->ensure_grad();
      xd->grad += od->grad;
    });
  }
  return out;
}

// Centered spatial crop of a [C,H,W] tensor; extra pixels of odd margins
// stay on the bottom/right.
template <typename S>
Tensor<S> crop2d(Tape<S>* tape, const Tensor<S>& x, int target_h, int target_w) {
  if (x.shape().size() != 3) throw NumericError("crop2d: expected [C,H,W] tensor");
  const int c = x.shape()[0], h = x.shape()[1], w = x.shape()[2];
  if (target_h < 1 || target_w < 1 || target_h > h || target_w > w)
    throw NumericError("crop2d: target larger than source");
  const int oy = (h - target_h) / 2, ox = (w - target_w) / 2;
  Tensor<S> out = Tensor<S>::zeros({c, target_h, target_w});
  for (int ch = 0; ch < c; ++ch)
    for (int y = 0; y < target_h; ++y) {
      const S* src = x.value().data() + (static_cast<std::int64_t>(ch) * h + y + oy) * w + ox;
      S* dst = out.value().data() + (static_cast<std::int64_t>(ch) * target_h + y) * target_w;
      std::copy(src, src + target_w, dst);
    }
  if (tape && x.requires_grad()) {
    out.set_requires_grad(true);
    auto xd = x.data_ptr(), od = out.data_ptr();
    tape->record([xd, od, c, h, w, target_h, target_w, oy, ox]() {
      if (!detail::grad_ready(od)) return;
      xd->ensure_grad();
      for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < target_h; ++y) {
          const S* src =
              od->grad.data() + (static_cast<std::int64_t>(ch) * target_h + y) * target_w;
          S* dst = xd->grad.data() + (static_cast<std::int64_t>(ch) * h + y + oy) * w + ox;
          for (int xx = 0; xx < target_w; ++xx) dst[xx] += src[xx];
        }
    });
  }
  return out;
}

// PixelShuffle: [C*s^2, H, W] -> [C, s*H, s*W] with
// out[c, s*y+dy, s*x+dx] = in[c*s^2 + dy*s + dx, y, x].
template <typename S>
Tensor<S> pixel_shuffle(Tape<S>* tape, const Tensor<S>& x, int s) {
  if (x.shape().size() != 3) throw NumericError("pixel_shuffle: expected [C,H,W] tensor");
  const int cin = x.shape()[0], h = x.shape()[1], w = x.shape()[2];
  if (s < 1 || cin % (s * s) != 0)
    throw NumericError("pixel_shuffle: channels not divisible by s^2");
  const int cout = cin / (s * s);
  Tensor<S> out = Tensor<S>::zeros({cout, h * s, w * s});
  const auto map_index = [=](int c, int dy, int dx, int y, int x_) {
    const std::int64_t in_idx =
        ((static_cast<std::int64_t>(c) * s * s + dy * s + dx) * h + y) * w + x_;
    const std::int64_t out_idx =
        (static_cast<std::int64_t>(c) * (h * s) + (static_cast<std::int64_t>(s) * y + dy)) *
            (w * s) +
        (static_cast<std::int64_t>(s) * x_ + dx);
    return std::pair<std::int64_t, std::int64_t>(in_idx, out_idx);
  };
  for (int c = 0; c < cout; ++c)
    for (int dy = 0; dy < s; ++dy)
      for (int dx = 0; dx < s; ++dx)
        for (int y = 0; y < h; ++y)
          for (int x_ = 0; x_ < w; ++x_) {
            auto [i, o] = map_index(c, dy, dx, y, x_);
            out.value()[o] = x.value()[i];
          }
  if (tape && x.requires_grad()) {
    out.set_requires_grad(true);
    auto xd = x.data_ptr(), od = out.data_ptr();
    tape->record([xd, od, map_index, cout, s, h, w]() {
      if (!detail::grad_ready(od)) return;
      xd->ensure_grad();
      for (int c = 0; c < cout; ++c)
        for (int dy = 0; dy < s; ++dy)
          for (int dx = 0; dx < s; ++dx)
            for (int y = 0; y < h; ++y)
              for (int x_ = 0; x_ < w; ++x_) {
                auto [i, o] = map_index(c, dy, dx, y, x_);
                xd->grad[i] += od->grad[o];
              }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Linear and convolution layers
// ---------------------------------------------------------------------------

template <typename S>
using RowMat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename S>
using EVec = Eigen::Matrix<S, Eigen::Dynamic, 1>;
template <typename S>
using Kernel2d = Eigen::Array<S, Eigen::Dynamic, Eigen::Dynamic>;

// Fully connected layer: y = W x + b with W of shape [out, in].
template <typename S>
Tensor<S> fc(Tape<S>* tape, const Tensor<S>& x, const Tensor<S>& weight,
             const Tensor<S>& bias) {
  if (x.shape().size() != 1 || weight.shape().size() != 2 || bias.shape().size() != 1)
    throw NumericError("fc: expected x[in], W[out,in], b[out]");
  const int in = x.shape()[0];
  const int out_dim = weight.shape()[0];
  if (weight.shape()[1] != in || bias.shape()[0] != out_dim)
    throw NumericError("fc: shape mismatch W" + shape_str(weight.shape()) + " x" +
                       shape_str(x.shape()) + " b" + shape_str(bias.shape()));
  Tensor<S> out = Tensor<S>::zeros({out_dim});
  {
    Eigen::Map<const RowMat<S>> wm(weight.value().data(), out_dim, in);
    Eigen::Map<const EVec<S>> xv(x.value().data(), in);
    Eigen::Map<EVec<S>> yv(out.value().data(), out_dim);
    yv.noalias() = wm * xv;
    yv += Eigen::Map<const EVec<S>>(bias.value().data(), out_dim);
  }
  detail::check_finite(out, "fc");
  if (tape && (x.requires_grad() || weight.requires_grad() || bias.requires_grad())) {
    out.set_requires_grad(true);
    auto xd = x.data_ptr(), wd = weight.data_ptr(), bd = bias.data_ptr(),
         od = out.data_ptr();
    tape->record([xd, wd, bd, od, in, out_dim]() {
      if (!detail::grad_ready(od)) return;
      Eigen::Map<const EVec<S>> g(od->grad.data(), out_dim);
      if (wd->requires_grad) {
        wd->ensure_grad();
        Eigen::Map<RowMat<S>> dw(wd->grad.data(), out_dim, in);
        Eigen::Map<const EVec<S>> xv(xd->value.data(), in);
        dw.noalias() += g * xv.transpose();
      }
      if (bd->requires_grad) {
        bd->ensure_grad();
        Eigen::Map<EVec<S>>(bd->grad.data(), out_dim) += g;
      }
      if (xd->requires_grad) {
        xd->ensure_grad();
        Eigen::Map<const RowMat<S>> wm(wd->value.data(), out_dim, in);
        Eigen::Map<EVec<S>>(xd->grad.data(), in).noalias() += wm.transpose() * g;
      }
    });
  }
  return out;
}

namespace detail {

// im2col for 3x3 kernels, stride 1, zero padding 1. Rows are (c,ky,kx)
// triples, columns are output pixels.
template <typename S>
void im2col_3x3(const S* x, int c_in, int h, int w, RowMat<S>& cols) {
  const std::int64_t hw = static_cast<std::int64_t>(h) * w;
  cols.setZero(c_in * 9, hw);
  for (int c = 0; c < c_in; ++c) {
    const S* plane = x + c * hw;
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        S* row = cols.row((c * 3 + ky) * 3 + kx).data();
        const int sy = ky - 1, sx = kx - 1;
        const int x_lo = std::max(0, -sx), x_hi = std::min(w, w - sx);
        for (int y = 0; y < h; ++y) {
          const int yy = y + sy;
          if (yy < 0 || yy >= h || x_lo >= x_hi) continue;
          std::copy(plane + yy * w + x_lo + sx, plane + yy * w + x_hi + sx,
                    row + static_cast<std::int64_t>(y) * w + x_lo);
        }
      }
    }
  }
}

// Transposed scatter of im2col: adds column gradients back into the image.
template <typename S>
void col2im_3x3(const RowMat<S>& cols, int c_in, int h, int w, S* dx) {
  const std::int64_t hw = static_cast<std::int64_t>(h) * w;
  for (int c = 0; c < c_in; ++c) {
    S* plane = dx + c * hw;
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        const S* row = cols.row((c * 3 + ky) * 3 + kx).data();
        const int sy = ky - 1, sx = kx - 1;
        const int x_lo = std::max(0, -sx), x_hi = std::min(w, w - sx);
        for (int y = 0; y < h; ++y) {
          const int yy = y + sy;
          if (yy < 0 || yy >= h || x_lo >= x_hi) continue;
          const S* src = row + static_cast<std::int64_t>(y) * w + x_lo;
          S* dst = plane + yy * w + x_lo + sx;
          for (int i = 0; i < x_hi - x_lo; ++i) dst[i] += src[i];
        }
      }
    }
  }
}

}  // namespace detail

// 3x3 cross-correlation with zero padding 1 and stride 1 (same-size output):
// x[C_in,H,W], K[C_out,C_in,3,3], b[C_out] -> y[C_out,H,W].
template <typename S>
Tensor<S> conv2d(Tape<S>* tape, const Tensor<S>& x, const Tensor<S>& kernel,
                 const Tensor<S>& bias) {
  if (x.shape().size() != 3 || kernel.shape().size() != 4 || bias.shape().size() != 1)
    throw NumericError("conv2d: expected x[C,H,W], K[Co,Ci,3,3], b[Co]");
  const int c_in = x.shape()[0], h = x.shape()[1], w = x.shape()[2];
  const int c_out = kernel.shape()[0];
  if (kernel.shape()[1] != c_in || kernel.shape()[2] != 3 || kernel.shape()[3] != 3 ||
      bias.shape()[0] != c_out)
    throw NumericError("conv2d: shape mismatch K" + shape_str(kernel.shape()) + " x" +
                       shape_str(x.shape()));
  const std::int64_t hw = static_cast<std::int64_t>(h) * w;
  Tensor<S> out = Tensor<S>::zeros({c_out, h, w});
  {
    RowMat<S> cols;
    detail::im2col_3x3(x.value().data(), c_in, h, w, cols);
    Eigen::Map<const RowMat<S>> km(kernel.value().data(), c_out, c_in * 9);
    Eigen::Map<RowMat<S>> ym(out.value().data(), c_out, hw);
    ym.noalias() = km * cols;
    for (int co = 0; co < c_out; ++co) ym.row(co).array() += bias.value()[co];
  }
  detail::check_finite(out, "conv2d");
  if (tape && (x.requires_grad() || kernel.requires_grad() || bias.requires_grad())) {
    out.set_requires_grad(true);
    auto xd = x.data_ptr(), kd = kernel.data_ptr(), bd = bias.data_ptr(),
         od = out.data_ptr();
    tape->record([xd, kd, bd, od, c_in, c_out, h, w, hw]() {
      if (!detail::grad_ready(od)) return;
      Eigen::Map<const RowMat<S>> gy(od->grad.data(), c_out, hw);
      RowMat<S> cols;  // recomputed; cheaper than caching across the tape
      if (kd->requires_grad || xd->requires_grad)
        detail::im2col_3x3(xd->value.data(), c_in, h, w, cols);
      if (kd->requires_grad) {
        kd->ensure_grad();
        Eigen::Map<RowMat<S>> dk(kd->grad.data(), c_out, c_in * 9);
        dk.noalias() += gy * cols.transpose();
      }
      if (bd->requires_grad) {
        bd->ensure_grad();
        for (int co = 0; co < c_out; ++co) bd->grad[co] += gy.row(co).sum();
      }
      if (xd->requires_grad) {
        xd->ensure_grad();
        Eigen::Map<const RowMat<S>> km(kd->value.data(), c_out, c_in * 9);
        RowMat<S> dcols(c_in * 9, hw);
        dcols.noalias() = km.transpose() * gy;
        detail::col2im_3x3(dcols, c_in, h, w, xd->grad.data());
      }
    });
  }
  return out;
}

// Depthwise valid-mode correlation with one fixed (non-trainable) kernel,
// applied to every channel: x[C,H,W] -> y[C,H-k+1,W-k+1]. Used for the SSIM
// window.
template <typename S>
Tensor<S> filter2d_valid(Tape<S>* tape, const Tensor<S>& x, const Kernel2d<S>& kernel) {
  if (x.shape().size() != 3) throw NumericError("filter2d_valid: expected [C,H,W] tensor");
  const int c = x.shape()[0], h = x.shape()[1], w = x.shape()[2];
  const int kh = static_cast<int>(kernel.rows()), kw = static_cast<int>(kernel.cols());
  if (h < kh || w < kw) throw NumericError("filter2d_valid: plane smaller than window");
  const int vh = h - kh + 1, vw = w - kw + 1;
  using RowArr = Eigen::Array<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Tensor<S> out = Tensor<S>::zeros({c, vh, vw});
  for (int ch = 0; ch < c; ++ch) {
    Eigen::Map<const RowArr> xm(x.value().data() + static_cast<std::int64_t>(ch) * h * w, h,
                                w);
    Eigen::Map<RowArr> ym(out.value().data() + static_cast<std::int64_t>(ch) * vh * vw, vh,
                          vw);
    for (int dy = 0; dy < kh; ++dy)
      for (int dx = 0; dx < kw; ++dx) ym += kernel(dy, dx) * xm.block(dy, dx, vh, vw);
  }
  detail::check_finite(out, "filter2d_valid");
  if (tape && x.requires_grad()) {
    out.set_requires_grad(true);
    auto xd = x.data_ptr(), od = out.data_ptr();
    Kernel2d<S> k = kernel;
    tape->record([xd, od, k, c, h, w, kh, kw, vh, vw]() {
      if (!detail::grad_ready(od)) return;
      xd->ensure_grad();
      for (int ch = 0; ch < c; ++ch) {
        Eigen::Map<const RowArr> gm(od->grad.data() + static_cast<std::int64_t>(ch) * vh * vw,
                                    vh, vw);
        Eigen::Map<RowArr> dxm(xd->grad.data() + static_cast<std::int64_t>(ch) * h * w, h, w);
        for (int dy = 0; dy < kh; ++dy)
          for (int dx = 0; dx < kw; ++dx) dxm.block(dy, dx, vh, vw) += k(dy, dx) * gm;
      }
    });
  }
  return out;
}

}  // namespace lfinr
