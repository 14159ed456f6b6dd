#include "soymat/neural/ops.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>

#include "soymat/error.hpp"

namespace soymat::nn {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatMap = Eigen::Map<RowMat<T>>;
template <typename T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;
template <typename T>
using RowVec = Eigen::Matrix<T, 1, Eigen::Dynamic>;

struct ConvGeometry {
  int frames, in_h, in_w, in_c;
  int out_h, out_w, filters;
  int kernel, stride, pad_top, pad_left;

  std::size_t rows() const { return static_cast<std::size_t>(frames) * out_h * out_w; }
  std::size_t cols() const { return static_cast<std::size_t>(kernel) * kernel * in_c; }
};

template <typename T>
ConvGeometry conv_geometry(const Tensor<T>& x, const Tensor<T>& w, int stride, Padding padding) {
  if (x.rank() != 4) throw ConfigError("conv2d: input must be (time, height, width, channels), got " +
                                       shape_string(x.shape));
  if (w.rank() != 4 || w.dim(0) != w.dim(1) || w.dim(2) != x.dim(3))
    throw ConfigError("conv2d: kernel shape " + shape_string(w.shape) +
                      " does not match input " + shape_string(x.shape));
  ConvGeometry g{};
  g.frames = x.dim(0);
  g.in_h = x.dim(1);
  g.in_w = x.dim(2);
  g.in_c = x.dim(3);
  g.kernel = w.dim(0);
  g.filters = w.dim(3);
  g.stride = stride;
  if (padding == Padding::Same) {
    const SamePad ph = same_padding(g.in_h, g.kernel, stride);
    const SamePad pw = same_padding(g.in_w, g.kernel, stride);
    g.out_h = ph.out;
    g.out_w = pw.out;
    g.pad_top = ph.before;
    g.pad_left = pw.before;
  } else {
    g.out_h = (g.in_h - g.kernel) / stride + 1;
    g.out_w = (g.in_w - g.kernel) / stride + 1;
    g.pad_top = 0;
    g.pad_left = 0;
  }
  return g;
}

// Unrolls receptive fields into rows: col(frame*oh*ow + oy*ow + ox, (ky*k + kx)*C + c).
template <typename T>
void im2col(const ConvGeometry& g, const T* x, T* col) {
  const std::size_t ncols = g.cols();
  for (int f = 0; f < g.frames; ++f) {
    const T* frame = x + static_cast<std::size_t>(f) * g.in_h * g.in_w * g.in_c;
    for (int oy = 0; oy < g.out_h; ++oy) {
      for (int ox = 0; ox < g.out_w; ++ox) {
        T* row = col + ((static_cast<std::size_t>(f) * g.out_h + oy) * g.out_w + ox) * ncols;
        for (int ky = 0; ky < g.kernel; ++ky) {
          const int iy = oy * g.stride + ky - g.pad_top;
          for (int kx = 0; kx < g.kernel; ++kx) {
            const int ix = ox * g.stride + kx - g.pad_left;
            T* dst = row + (static_cast<std::size_t>(ky) * g.kernel + kx) * g.in_c;
            if (iy < 0 || iy >= g.in_h || ix < 0 || ix >= g.in_w) {
              std::fill(dst, dst + g.in_c, T(0));
            } else {
              const T* src = frame + (static_cast<std::size_t>(iy) * g.in_w + ix) * g.in_c;
              std::copy(src, src + g.in_c, dst);
            }
          }
        }
      }
    }
  }
}

template <typename T>
void col2im_add(const ConvGeometry& g, const T* col, T* dx) {
  const std::size_t ncols = g.cols();
  for (int f = 0; f < g.frames; ++f) {
    T* frame = dx + static_cast<std::size_t>(f) * g.in_h * g.in_w * g.in_c;
    for (int oy = 0; oy < g.out_h; ++oy) {
      for (int ox = 0; ox < g.out_w; ++ox) {
        const T* row = col + ((static_cast<std::size_t>(f) * g.out_h + oy) * g.out_w + ox) * ncols;
        for (int ky = 0; ky < g.kernel; ++ky) {
          const int iy = oy * g.stride + ky - g.pad_top;
          if (iy < 0 || iy >= g.in_h) continue;
          for (int kx = 0; kx < g.kernel; ++kx) {
            const int ix = ox * g.stride + kx - g.pad_left;
            if (ix < 0 || ix >= g.in_w) continue;
            const T* src = row + (static_cast<std::size_t>(ky) * g.kernel + kx) * g.in_c;
            T* dst = frame + (static_cast<std::size_t>(iy) * g.in_w + ix) * g.in_c;
            for (int c = 0; c < g.in_c; ++c) dst[c] += src[c];
          }
        }
      }
    }
  }
}

template <typename T>
AlignedVector<T>& scratch() {
  thread_local AlignedVector<T> buffer;
  return buffer;
}

template <typename T>
T sigmoid(T v) {
  return T(1) / (T(1) + std::exp(-v));
}

}  // namespace

template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weights, const Tensor<T>& bias, int stride,
                 Padding padding) {
  const ConvGeometry g = conv_geometry(x, weights, stride, padding);
  if (bias.size() != static_cast<std::size_t>(g.filters))
    throw ConfigError("conv2d: bias length does not match filter count");
  if (g.out_h < 1 || g.out_w < 1) throw ConfigError("conv2d: empty output for input " + shape_string(x.shape));

  AlignedVector<T>& col = scratch<T>();
  col.resize(g.rows() * g.cols());
  im2col(g, x.data.data(), col.data());

  Tensor<T> out({g.frames, g.out_h, g.out_w, g.filters});
  const auto rows = static_cast<Eigen::Index>(g.rows());
  const auto cols = static_cast<Eigen::Index>(g.cols());
  ConstMatMap<T> colm(col.data(), rows, cols);
  ConstMatMap<T> wm(weights.data.data(), cols, g.filters);
  MatMap<T> om(out.data.data(), rows, g.filters);
  Eigen::Map<const RowVec<T>> b(bias.data.data(), g.filters);
  om.noalias() = colm * wm;
  om.rowwise() += b;
  return out;
}

template <typename T>
Conv2dGrads<T> conv2d_backward(const Tensor<T>& x, const Tensor<T>& weights,
                               const Tensor<T>& grad_out, int stride, Padding padding,
                               bool want_input_grad) {
  const ConvGeometry g = conv_geometry(x, weights, stride, padding);
  if (grad_out.shape != Shape{g.frames, g.out_h, g.out_w, g.filters})
    throw ConfigError("conv2d_backward: gradient shape " + shape_string(grad_out.shape) +
                      " does not match output");

  AlignedVector<T>& col = scratch<T>();
  col.resize(g.rows() * g.cols());
  im2col(g, x.data.data(), col.data());

  const auto rows = static_cast<Eigen::Index>(g.rows());
  const auto cols = static_cast<Eigen::Index>(g.cols());
  ConstMatMap<T> colm(col.data(), rows, cols);
  ConstMatMap<T> wm(weights.data.data(), cols, g.filters);
  ConstMatMap<T> gm(grad_out.data.data(), rows, g.filters);

  Conv2dGrads<T> grads;
  grads.weights = Tensor<T>(weights.shape);
  grads.bias = Tensor<T>(Shape{g.filters});
  MatMap<T> dw(grads.weights.data.data(), cols, g.filters);
  Eigen::Map<RowVec<T>> db(grads.bias.data.data(), g.filters);
  dw.noalias() = colm.transpose() * gm;
  db = gm.colwise().sum();

  if (want_input_grad) {
    // Reuse the column buffer for d(col).
    MatMap<T> dcol(col.data(), rows, cols);
    dcol.noalias() = gm * wm.transpose();
    grads.input = Tensor<T>(x.shape);
    col2im_add(g, col.data(), grads.input.data.data());
  }
  return grads;
}

template <typename T>
MaxPoolResult<T> maxpool2d(const Tensor<T>& x, int window) {
  if (x.rank() != 4) throw ConfigError("maxpool2d: input must be (time, height, width, channels)");
  const int frames = x.dim(0), h = x.dim(1), w = x.dim(2), c = x.dim(3);
  const int oh = h / window, ow = w / window;
  MaxPoolResult<T> r;
  r.output = Tensor<T>({frames, oh, ow, c});
  r.argmax.resize(r.output.size());
  std::size_t o = 0;
  for (int f = 0; f < frames; ++f) {
    const std::size_t base = static_cast<std::size_t>(f) * h * w * c;
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        for (int ch = 0; ch < c; ++ch, ++o) {
          std::size_t best = base + (static_cast<std::size_t>(oy * window) * w + ox * window) * c + ch;
          for (int ky = 0; ky < window; ++ky) {
            for (int kx = 0; kx < window; ++kx) {
              const std::size_t idx =
                  base + (static_cast<std::size_t>(oy * window + ky) * w + ox * window + kx) * c + ch;
              if (x.data[idx] > x.data[best]) best = idx;
            }
          }
          r.output.data[o] = x.data[best];
          r.argmax[o] = best;
        }
      }
    }
  }
  return r;
}

template <typename T>
Tensor<T> maxpool2d_backward(const Shape& input_shape, const std::vector<std::size_t>& argmax,
                             const Tensor<T>& grad_out) {
  Tensor<T> dx(input_shape);
  for (std::size_t i = 0; i < argmax.size(); ++i) dx.data[argmax[i]] += grad_out.data[i];
  return dx;
}

template <typename T>
Tensor<T> relu(const Tensor<T>& x) {
  Tensor<T> y = x;
  for (T& v : y.data) v = v > T(0) ? v : T(0);
  return y;
}

template <typename T>
Tensor<T> relu_backward(const Tensor<T>& output, const Tensor<T>& grad_out) {
  Tensor<T> g = grad_out;
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!(output.data[i] > T(0))) g.data[i] = T(0);
  }
  return g;
}

template <typename T>
Tensor<T> lstm(const Tensor<T>& x, const LstmWeights<T>& w, bool return_sequences,
               LstmCache<T>* cache) {
  if (x.rank() != 2) throw ConfigError("lstm: input must be (time, features), got " + shape_string(x.shape));
  const int steps = x.dim(0);
  const int features = x.dim(1);
  if (w.recurrent_kernel.rank() != 2 || w.recurrent_kernel.dim(1) != 4 * w.recurrent_kernel.dim(0))
    throw ConfigError("lstm: recurrent kernel must be (units, 4*units)");
  const int units = w.recurrent_kernel.dim(0);
  if (w.input_kernel.shape != Shape{features, 4 * units})
    throw ConfigError("lstm: input kernel " + shape_string(w.input_kernel.shape) +
                      " does not match input " + shape_string(x.shape));
  if (w.bias.size() != static_cast<std::size_t>(4 * units)) throw ConfigError("lstm: bias must be 4*units");

  const int g4 = 4 * units;
  LstmCache<T> local;
  LstmCache<T>& c = cache ? *cache : local;
  c.steps = steps;
  c.units = units;
  c.gates.assign(static_cast<std::size_t>(steps) * g4, T(0));
  c.cell.assign(static_cast<std::size_t>(steps) * units, T(0));
  c.cell_tanh.assign(static_cast<std::size_t>(steps) * units, T(0));
  c.hidden.assign(static_cast<std::size_t>(steps) * units, T(0));

  ConstMatMap<T> xm(x.data.data(), steps, features);
  ConstMatMap<T> wx(w.input_kernel.data.data(), features, g4);
  ConstMatMap<T> wh(w.recurrent_kernel.data.data(), units, g4);
  Eigen::Map<const RowVec<T>> b(w.bias.data.data(), g4);
  MatMap<T> z(c.gates.data(), steps, g4);
  z.noalias() = xm * wx;
  z.rowwise() += b;

  for (int t = 0; t < steps; ++t) {
    if (t > 0) {
      Eigen::Map<const RowVec<T>> hprev(c.hidden.data() + static_cast<std::size_t>(t - 1) * units, units);
      z.row(t).noalias() += hprev * wh;
    }
    T* gate = c.gates.data() + static_cast<std::size_t>(t) * g4;
    T* cell = c.cell.data() + static_cast<std::size_t>(t) * units;
    T* cell_tanh = c.cell_tanh.data() + static_cast<std::size_t>(t) * units;
    T* hidden = c.hidden.data() + static_cast<std::size_t>(t) * units;
    const T* cprev = t > 0 ? c.cell.data() + static_cast<std::size_t>(t - 1) * units : nullptr;
    for (int u = 0; u < units; ++u) {
      const T i = sigmoid(gate[u]);
      const T f = sigmoid(gate[units + u]);
      const T g = std::tanh(gate[2 * units + u]);
      const T o = sigmoid(gate[3 * units + u]);
      gate[u] = i;
      gate[units + u] = f;
      gate[2 * units + u] = g;
      gate[3 * units + u] = o;
      cell[u] = (cprev ? f * cprev[u] : T(0)) + i * g;
      cell_tanh[u] = std::tanh(cell[u]);
      hidden[u] = o * cell_tanh[u];
    }
  }

  if (return_sequences) {
    Tensor<T> out({steps, units});
    std::copy(c.hidden.begin(), c.hidden.end(), out.data.begin());
    return out;
  }
  Tensor<T> out({units});
  std::copy(c.hidden.end() - units, c.hidden.end(), out.data.begin());
  return out;
}

template <typename T>
LstmGrads<T> lstm_backward(const Tensor<T>& x, const LstmWeights<T>& w, const LstmCache<T>& cache,
                           const Tensor<T>& grad_out, bool return_sequences) {
  const int steps = cache.steps;
  const int units = cache.units;
  const int g4 = 4 * units;
  const int features = x.dim(1);
  const Shape expected = return_sequences ? Shape{steps, units} : Shape{units};
  if (grad_out.shape != expected)
    throw ConfigError("lstm_backward: gradient shape " + shape_string(grad_out.shape) +
                      " does not match output " + shape_string(expected));

  AlignedVector<T> dz(static_cast<std::size_t>(steps) * g4, T(0));
  AlignedVector<T> dh_next(units, T(0));
  AlignedVector<T> dc_next(units, T(0));
  ConstMatMap<T> wh(w.recurrent_kernel.data.data(), units, g4);

  LstmGrads<T> grads;
  grads.recurrent_kernel = Tensor<T>(w.recurrent_kernel.shape);
  MatMap<T> dwh(grads.recurrent_kernel.data.data(), units, g4);

  for (int t = steps - 1; t >= 0; --t) {
    const T* gate = cache.gates.data() + static_cast<std::size_t>(t) * g4;
    const T* cell_tanh = cache.cell_tanh.data() + static_cast<std::size_t>(t) * units;
    const T* cprev = t > 0 ? cache.cell.data() + static_cast<std::size_t>(t - 1) * units : nullptr;
    const T* dh_out = nullptr;
    if (return_sequences) {
      dh_out = grad_out.data.data() + static_cast<std::size_t>(t) * units;
    } else if (t == steps - 1) {
      dh_out = grad_out.data.data();
    }
    T* dzt = dz.data() + static_cast<std::size_t>(t) * g4;
    for (int u = 0; u < units; ++u) {
      const T i = gate[u];
      const T f = gate[units + u];
      const T g = gate[2 * units + u];
      const T o = gate[3 * units + u];
      const T dh = dh_next[u] + (dh_out ? dh_out[u] : T(0));
      const T dc = dh * o * (T(1) - cell_tanh[u] * cell_tanh[u]) + dc_next[u];
      dzt[u] = dc * g * i * (T(1) - i);
      dzt[units + u] = (cprev ? dc * cprev[u] : T(0)) * f * (T(1) - f);
      dzt[2 * units + u] = dc * i * (T(1) - g * g);
      dzt[3 * units + u] = dh * cell_tanh[u] * o * (T(1) - o);
      dc_next[u] = dc * f;
    }
    Eigen::Map<const RowVec<T>> dzrow(dzt, g4);
    Eigen::Map<RowVec<T>> dhn(dh_next.data(), units);
    if (t > 0) {
      Eigen::Map<const RowVec<T>> hprev(cache.hidden.data() + static_cast<std::size_t>(t - 1) * units, units);
      dwh.noalias() += hprev.transpose() * dzrow;
      dhn.noalias() = dzrow * wh.transpose();
    } else {
      dhn.setZero();
    }
  }

  ConstMatMap<T> xm(x.data.data(), steps, features);
  ConstMatMap<T> wx(w.input_kernel.data.data(), features, g4);
  ConstMatMap<T> dzm(dz.data(), steps, g4);
  grads.input_kernel = Tensor<T>(w.input_kernel.shape);
  grads.bias = Tensor<T>(w.bias.shape);
  grads.input = Tensor<T>(x.shape);
  MatMap<T>(grads.input_kernel.data.data(), features, g4).noalias() = xm.transpose() * dzm;
  Eigen::Map<RowVec<T>>(grads.bias.data.data(), g4) = dzm.colwise().sum();
  MatMap<T>(grads.input.data.data(), steps, features).noalias() = dzm * wx.transpose();
  return grads;
}

template <typename T>
Tensor<T> dense(const Tensor<T>& x, const Tensor<T>& weights, const Tensor<T>& bias) {
  if (x.rank() < 1 || weights.rank() != 2 || weights.dim(0) != x.shape.back())
    throw ConfigError("dense: weights " + shape_string(weights.shape) + " do not match input " +
                      shape_string(x.shape));
  const int in = weights.dim(0);
  const int out_units = weights.dim(1);
  if (bias.size() != static_cast<std::size_t>(out_units)) throw ConfigError("dense: bias length mismatch");
  const auto rows = static_cast<Eigen::Index>(x.size() / static_cast<std::size_t>(in));
  Shape oshape = x.shape;
  oshape.back() = out_units;
  Tensor<T> y(oshape);
  MatMap<T> ym(y.data.data(), rows, out_units);
  ym.noalias() = ConstMatMap<T>(x.data.data(), rows, in) * ConstMatMap<T>(weights.data.data(), in, out_units);
  ym.rowwise() += Eigen::Map<const RowVec<T>>(bias.data.data(), out_units);
  return y;
}

template <typename T>
DenseGrads<T> dense_backward(const Tensor<T>& x, const Tensor<T>& weights, const Tensor<T>& grad_out) {
  const int in = weights.dim(0);
  const int out_units = weights.dim(1);
  const auto rows = static_cast<Eigen::Index>(x.size() / static_cast<std::size_t>(in));
  ConstMatMap<T> xm(x.data.data(), rows, in);
  ConstMatMap<T> gm(grad_out.data.data(), rows, out_units);
  DenseGrads<T> g;
  g.weights = Tensor<T>(weights.shape);
  g.bias = Tensor<T>(Shape{out_units});
  g.input = Tensor<T>(x.shape);
  MatMap<T>(g.weights.data.data(), in, out_units).noalias() = xm.transpose() * gm;
  Eigen::Map<RowVec<T>>(g.bias.data.data(), out_units) = gm.colwise().sum();
  MatMap<T>(g.input.data.data(), rows, in).noalias() =
      gm * ConstMatMap<T>(weights.data.data(), in, out_units).transpose();
  return g;
}

HuberValue huber_loss(double target, double prediction, double delta) {
  if (!(delta > 0.0)) throw ConfigError("huber delta must be positive");
  const double e = prediction - target;
  const double a = std::abs(e);
  if (a <= delta) return {0.5 * e * e, e};
  return {delta * a - 0.5 * delta * delta, e > 0 ? delta : -delta};
}

HuberBatch huber_loss(const std::vector<double>& targets, const std::vector<double>& predictions,
                      double delta) {
  if (targets.size() != predictions.size() || targets.empty())
    throw ConfigError("huber_loss: targets and predictions must be non-empty and equal length");
  HuberBatch out;
  out.grads.resize(targets.size());
  const double n = static_cast<double>(targets.size());
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const HuberValue h = huber_loss(targets[i], predictions[i], delta);
    out.loss += h.loss;
    out.grads[i] = h.grad / n;
  }
  out.loss /= n;
  return out;
}

#define SOYMAT_INSTANTIATE_OPS(T)                                                                   \
  template Tensor<T> conv2d(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, int, Padding);    \
  template Conv2dGrads<T> conv2d_backward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,     \
                                          int, Padding, bool);                                      \
  template MaxPoolResult<T> maxpool2d(const Tensor<T>&, int);                                       \
  template Tensor<T> maxpool2d_backward(const Shape&, const std::vector<std::size_t>&,              \
                                        const Tensor<T>&);                                          \
  template Tensor<T> relu(const Tensor<T>&);                                                        \
  template Tensor<T> relu_backward(const Tensor<T>&, const Tensor<T>&);                             \
  template Tensor<T> lstm(const Tensor<T>&, const LstmWeights<T>&, bool, LstmCache<T>*);            \
  template LstmGrads<T> lstm_backward(const Tensor<T>&, const LstmWeights<T>&, const LstmCache<T>&, \
                                      const Tensor<T>&, bool);                                      \
  template Tensor<T> dense(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);                   \
  template DenseGrads<T> dense_backward(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);

SOYMAT_INSTANTIATE_OPS(float)
SOYMAT_INSTANTIATE_OPS(double)

#undef SOYMAT_INSTANTIATE_OPS

}  // namespace soymat::nn
