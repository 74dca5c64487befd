#include "srender/autograd.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>

#include "srender/error.hpp"

namespace srender {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMatrix>;
using ConstMatMap = Eigen::Map<const RowMatrix>;

void require_rank3(const Tensor& t, const char* what) {
  if (t.rank() != 3) throw Error(Errc::BadShape, std::string(what) + " expects a rank-3 tensor");
}

// Unfolds (C, H, W) into (C*k*k, Ho*Wo) patch columns.
void im2col(const double* src, int channels, int rows, int cols, int kernel, int stride, int pad,
            int out_rows, int out_cols, double* dst) {
  const std::size_t plane = static_cast<std::size_t>(out_rows) * out_cols;
  for (int c = 0; c < channels; ++c) {
    const double* img = src + static_cast<std::size_t>(c) * rows * cols;
    for (int ki = 0; ki < kernel; ++ki) {
      for (int kj = 0; kj < kernel; ++kj) {
        double* out = dst + (static_cast<std::size_t>(c) * kernel * kernel + ki * kernel + kj) * plane;
        for (int oi = 0; oi < out_rows; ++oi) {
          const int r = oi * stride - pad + ki;
          double* row_out = out + static_cast<std::size_t>(oi) * out_cols;
          if (r < 0 || r >= rows) {
            std::fill(row_out, row_out + out_cols, 0.0);
            continue;
          }
          const double* row_in = img + static_cast<std::size_t>(r) * cols;
          for (int oj = 0; oj < out_cols; ++oj) {
            const int col = oj * stride - pad + kj;
            row_out[oj] = (col >= 0 && col < cols) ? row_in[col] : 0.0;
          }
        }
      }
    }
  }
}

// Adjoint of im2col: scatters-adds patch columns back into (C, H, W).
void col2im(const double* src, int channels, int rows, int cols, int kernel, int stride, int pad,
            int out_rows, int out_cols, double* dst) {
  const std::size_t plane = static_cast<std::size_t>(out_rows) * out_cols;
  for (int c = 0; c < channels; ++c) {
    double* img = dst + static_cast<std::size_t>(c) * rows * cols;
    for (int ki = 0; ki < kernel; ++ki) {
      for (int kj = 0; kj < kernel; ++kj) {
        const double* in =
            src + (static_cast<std::size_t>(c) * kernel * kernel + ki * kernel + kj) * plane;
        for (int oi = 0; oi < out_rows; ++oi) {
          const int r = oi * stride - pad + ki;
          if (r < 0 || r >= rows) continue;
          double* row_img = img + static_cast<std::size_t>(r) * cols;
          const double* row_in = in + static_cast<std::size_t>(oi) * out_cols;
          for (int oj = 0; oj < out_cols; ++oj) {
            const int col = oj * stride - pad + kj;
            if (col >= 0 && col < cols) row_img[col] += row_in[oj];
          }
        }
      }
    }
  }
}

Tape& tape_of(Var a) {
  if (a.tape == nullptr) throw Error(Errc::BadShape, "operation on an unbound Var");
  return *a.tape;
}

Tape& tape_of(Var a, Var b) {
  if (a.tape != b.tape) throw Error(Errc::BadShape, "operands recorded on different tapes");
  return tape_of(a);
}

template <typename Fn>
Var unary_elementwise(Var x, Fn&& fn) {
  // fn(input, output) -> derivative of output wrt input
  Tape& tape = tape_of(x);
  const Tensor& in = x.value();
  Tensor out(in.dims());
  if (!x.requires_grad()) {
    double d = 0.0;
    for (std::size_t i = 0; i < in.size(); ++i) out[i] = fn(in[i], d);
    return tape.record(std::move(out), false, nullptr);
  }
  Tensor deriv(in.dims());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = fn(in[i], deriv[i]);
  const int xi = x.id;
  return tape.record(std::move(out), true, [xi, deriv = std::move(deriv)](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    Tensor& gx = t.grad_buffer(xi);
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * deriv[i];
  });
}

}  // namespace

const Tensor& Var::value() const { return tape->value(id); }
bool Var::requires_grad() const { return tape->requires_grad(id); }

Var Tape::constant(Tensor value) { return record(std::move(value), false, nullptr); }

Var Tape::constant_ref(const Tensor& value) {
  Node n;
  n.external = &value;
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size() - 1)};
}

Var Tape::parameter(Parameter& p) {
  Node n;
  n.external = &p.value;
  n.requires_grad = true;
  n.param = &p;
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size() - 1)};
}

Var Tape::variable(Tensor value) { return record(std::move(value), true, nullptr); }

Var Tape::record(Tensor value, bool requires_grad, Backward backward) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  if (requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<int>(nodes_.size() - 1)};
}

const Tensor& Tape::value(int id) const {
  const Node& n = nodes_[static_cast<std::size_t>(id)];
  return n.external ? *n.external : n.value;
}

Tensor& Tape::grad_buffer(int id) {
  Node& n = nodes_[static_cast<std::size_t>(id)];
  if (n.grad.empty()) n.grad = Tensor(value(id).dims());
  return n.grad;
}

void Tape::backward(Var root) {
  if (root.tape != this) throw Error(Errc::BadShape, "backward root belongs to another tape");
  for (Node& n : nodes_) n.grad = Tensor();
  if (!requires_grad(root.id)) return;
  grad_buffer(root.id).fill(1.0);
  for (int id = root.id; id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (!n.requires_grad || n.grad.empty()) continue;
    if (n.backward) n.backward(*this, id);
    if (n.param) n.param->grad += n.grad;
  }
}

Var detach(Var x) { return tape_of(x).constant(x.value()); }

int conv_output_size(int in, int kernel, int stride, int pad) {
  return (in + 2 * pad - kernel) / stride + 1;
}

int conv_transpose_output_size(int in, int kernel, int stride, int pad, int output_pad) {
  return (in - 1) * stride - 2 * pad + kernel + output_pad;
}

Var conv2d(Var x, Var weight, Var bias, int stride, int pad) {
  Tape& tape = tape_of(x, weight);
  const Tensor& in = x.value();
  const Tensor& w = weight.value();
  require_rank3(in, "conv2d");
  if (w.rank() != 4 || w.dim(1) != in.channels() || w.dim(2) != w.dim(3)) {
    throw Error(Errc::ShapeMismatch, "conv2d weight " + w.shape_string() + " vs input " + in.shape_string());
  }
  const int cout = w.dim(0), cin = in.channels(), k = w.dim(2);
  const int ho = conv_output_size(in.rows(), k, stride, pad);
  const int wo = conv_output_size(in.cols(), k, stride, pad);
  if (ho <= 0 || wo <= 0) throw Error(Errc::BadShape, "conv2d output would be empty for " + in.shape_string());
  const int patch = cin * k * k;
  const int positions = ho * wo;

  Buffer cols(static_cast<std::size_t>(patch) * positions);
  im2col(in.data(), cin, in.rows(), in.cols(), k, stride, pad, ho, wo, cols.data());

  Tensor out = Tensor::chw(cout, ho, wo);
  MatMap out_m(out.data(), cout, positions);
  out_m.noalias() = ConstMatMap(w.data(), cout, patch) * ConstMatMap(cols.data(), patch, positions);
  const Tensor& b = bias.value();
  for (int c = 0; c < cout; ++c) out_m.row(c).array() += b[static_cast<std::size_t>(c)];

  const bool needs = x.requires_grad() || weight.requires_grad() || bias.requires_grad();
  if (!needs) return tape.record(std::move(out), false, nullptr);
  const int xi = x.id, wi = weight.id, bi = bias.id;
  return tape.record(std::move(out), true, [=](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    ConstMatMap g_m(g.data(), cout, positions);
    const Tensor& wv = t.value(wi);
    if (t.requires_grad(wi)) {
      const Tensor& xv = t.value(xi);
      Buffer c(static_cast<std::size_t>(patch) * positions);
      im2col(xv.data(), cin, xv.rows(), xv.cols(), k, stride, pad, ho, wo, c.data());
      MatMap(t.grad_buffer(wi).data(), cout, patch).noalias() += g_m * ConstMatMap(c.data(), patch, positions).transpose();
    }
    if (t.requires_grad(bi)) {
      Tensor& gb = t.grad_buffer(bi);
      for (int c = 0; c < cout; ++c) gb[static_cast<std::size_t>(c)] += g_m.row(c).sum();
    }
    if (t.requires_grad(xi)) {
      const Tensor& xv = t.value(xi);
      Buffer dcols(static_cast<std::size_t>(patch) * positions);
      MatMap(dcols.data(), patch, positions).noalias() = ConstMatMap(wv.data(), cout, patch).transpose() * g_m;
      col2im(dcols.data(), cin, xv.rows(), xv.cols(), k, stride, pad, ho, wo, t.grad_buffer(xi).data());
    }
  });
}

Var conv_transpose2d(Var x, Var weight, Var bias, int stride, int pad, int output_pad) {
  Tape& tape = tape_of(x, weight);
  const Tensor& in = x.value();
  const Tensor& w = weight.value();
  require_rank3(in, "conv_transpose2d");
  if (w.rank() != 4 || w.dim(0) != in.channels() || w.dim(2) != w.dim(3)) {
    throw Error(Errc::ShapeMismatch,
                "conv_transpose2d weight " + w.shape_string() + " vs input " + in.shape_string());
  }
  const int cin = in.channels(), cout = w.dim(1), k = w.dim(2);
  const int hi = in.rows(), wi_ = in.cols();
  const int ho = conv_transpose_output_size(hi, k, stride, pad, output_pad);
  const int wo = conv_transpose_output_size(wi_, k, stride, pad, output_pad);
  if (ho <= 0 || wo <= 0) throw Error(Errc::BadShape, "conv_transpose2d output would be empty");
  const int patch = cout * k * k;
  const int positions = hi * wi_;

  Buffer cols(static_cast<std::size_t>(patch) * positions);
  MatMap(cols.data(), patch, positions).noalias() =
      ConstMatMap(w.data(), cin, patch).transpose() * ConstMatMap(in.data(), cin, positions);
  Tensor out = Tensor::chw(cout, ho, wo);
  col2im(cols.data(), cout, ho, wo, k, stride, pad, hi, wi_, out.data());
  const Tensor& b = bias.value();
  const std::size_t plane = static_cast<std::size_t>(ho) * wo;
  for (int c = 0; c < cout; ++c) {
    double* p = out.data() + c * plane;
    for (std::size_t i = 0; i < plane; ++i) p[i] += b[static_cast<std::size_t>(c)];
  }

  const bool needs = x.requires_grad() || weight.requires_grad() || bias.requires_grad();
  if (!needs) return tape.record(std::move(out), false, nullptr);
  const int xi = x.id, wid = weight.id, bi = bias.id;
  return tape.record(std::move(out), true, [=](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    Buffer gcols(static_cast<std::size_t>(patch) * positions);
    im2col(g.data(), cout, ho, wo, k, stride, pad, hi, wi_, gcols.data());
    ConstMatMap gc(gcols.data(), patch, positions);
    if (t.requires_grad(wid)) {
      MatMap(t.grad_buffer(wid).data(), cin, patch).noalias() +=
          ConstMatMap(t.value(xi).data(), cin, positions) * gc.transpose();
    }
    if (t.requires_grad(bi)) {
      Tensor& gb = t.grad_buffer(bi);
      for (int c = 0; c < cout; ++c) {
        double s = 0.0;
        const double* p = g.data() + c * plane;
        for (std::size_t i = 0; i < plane; ++i) s += p[i];
        gb[static_cast<std::size_t>(c)] += s;
      }
    }
    if (t.requires_grad(xi)) {
      MatMap(t.grad_buffer(xi).data(), cin, positions).noalias() +=
          ConstMatMap(t.value(wid).data(), cin, patch) * gc;
    }
  });
}

Var instance_norm(Var x, double eps) {
  Tape& tape = tape_of(x);
  const Tensor& in = x.value();
  require_rank3(in, "instance_norm");
  const int channels = in.channels();
  const std::size_t plane = static_cast<std::size_t>(in.rows()) * in.cols();
  Tensor out(in.dims());
  std::vector<double> inv_std(static_cast<std::size_t>(channels));
  for (int c = 0; c < channels; ++c) {
    const double* p = in.data() + c * plane;
    double mean = 0.0;
    for (std::size_t i = 0; i < plane; ++i) mean += p[i];
    mean /= static_cast<double>(plane);
    double var = 0.0;
    for (std::size_t i = 0; i < plane; ++i) var += (p[i] - mean) * (p[i] - mean);
    var /= static_cast<double>(plane);
    const double inv = 1.0 / std::sqrt(var + eps);
    inv_std[static_cast<std::size_t>(c)] = inv;
    double* o = out.data() + c * plane;
    for (std::size_t i = 0; i < plane; ++i) o[i] = (p[i] - mean) * inv;
  }
  if (!x.requires_grad()) return tape.record(std::move(out), false, nullptr);
  const int xi = x.id;
  return tape.record(std::move(out), true, [xi, channels, plane, inv_std](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    const Tensor& y = t.value(self);
    Tensor& gx = t.grad_buffer(xi);
    const double n = static_cast<double>(plane);
    for (int c = 0; c < channels; ++c) {
      const double* gp = g.data() + c * plane;
      const double* yp = y.data() + c * plane;
      double sum_g = 0.0, sum_gy = 0.0;
      for (std::size_t i = 0; i < plane; ++i) {
        sum_g += gp[i];
        sum_gy += gp[i] * yp[i];
      }
      const double inv = inv_std[static_cast<std::size_t>(c)];
      double* out = gx.data() + c * plane;
      for (std::size_t i = 0; i < plane; ++i) {
        out[i] += inv / n * (n * gp[i] - sum_g - yp[i] * sum_gy);
      }
    }
  });
}

Var relu(Var x) {
  return unary_elementwise(x, [](double v, double& d) {
    d = v > 0.0 ? 1.0 : 0.0;
    return v < 0.0 ? 0.0 : v;  // NaN passes through
  });
}

Var leaky_relu(Var x, double slope) {
  return unary_elementwise(x, [slope](double v, double& d) {
    d = v > 0.0 ? 1.0 : slope;
    return v > 0.0 ? v : slope * v;
  });
}

Var tanh(Var x) {
  return unary_elementwise(x, [](double v, double& d) {
    const double y = std::tanh(v);
    d = 1.0 - y * y;
    return y;
  });
}

Var sigmoid(Var x) {
  return unary_elementwise(x, [](double v, double& d) {
    // Kept strictly inside (0,1) even when the logistic saturates.
    constexpr double lo = std::numeric_limits<double>::min();
    constexpr double hi = 1.0 - std::numeric_limits<double>::epsilon() / 2.0;
    const double y = std::clamp(v >= 0.0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v)), lo, hi);
    d = y * (1.0 - y);
    return y;
  });
}

Var affine(Var x, double scale, double shift) {
  return unary_elementwise(x, [scale, shift](double v, double& d) {
    d = scale;
    return scale * v + shift;
  });
}

Var log_clamped(Var x, double floor) {
  return unary_elementwise(x, [floor](double v, double& d) {
    if (v < floor) {
      d = 0.0;
      return std::log(floor);
    }
    d = 1.0 / v;
    return std::log(v);
  });
}

Var add(Var a, Var b) {
  Tape& tape = tape_of(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (!av.same_shape(bv)) throw Error(Errc::ShapeMismatch, "add " + av.shape_string() + " + " + bv.shape_string());
  Tensor out = av;
  out += bv;
  if (!a.requires_grad() && !b.requires_grad()) return tape.record(std::move(out), false, nullptr);
  const int ai = a.id, bi = b.id;
  return tape.record(std::move(out), true, [ai, bi](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    if (t.requires_grad(ai)) t.grad_buffer(ai) += g;
    if (t.requires_grad(bi)) t.grad_buffer(bi) += g;
  });
}

Var concat_channels(Var a, Var b) {
  Tape& tape = tape_of(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_rank3(av, "concat_channels");
  require_rank3(bv, "concat_channels");
  if (av.rows() != bv.rows() || av.cols() != bv.cols()) {
    throw Error(Errc::ShapeMismatch, "concat " + av.shape_string() + " with " + bv.shape_string());
  }
  Tensor out = Tensor::chw(av.channels() + bv.channels(), av.rows(), av.cols());
  std::copy(av.storage().begin(), av.storage().end(), out.storage().begin());
  std::copy(bv.storage().begin(), bv.storage().end(), out.storage().begin() + static_cast<std::ptrdiff_t>(av.size()));
  if (!a.requires_grad() && !b.requires_grad()) return tape.record(std::move(out), false, nullptr);
  const int ai = a.id, bi = b.id;
  const std::size_t split = av.size();
  return tape.record(std::move(out), true, [ai, bi, split](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    if (t.requires_grad(ai)) {
      Tensor& ga = t.grad_buffer(ai);
      for (std::size_t i = 0; i < split; ++i) ga[i] += g[i];
    }
    if (t.requires_grad(bi)) {
      Tensor& gb = t.grad_buffer(bi);
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g[split + i];
    }
  });
}

Var avg_pool2(Var x) {
  Tape& tape = tape_of(x);
  const Tensor& in = x.value();
  require_rank3(in, "avg_pool2");
  if (in.rows() % 2 || in.cols() % 2) throw Error(Errc::OddDimensions, "avg_pool2 of " + in.shape_string());
  const int c = in.channels(), ho = in.rows() / 2, wo = in.cols() / 2;
  Tensor out = Tensor::chw(c, ho, wo);
  for (int ch = 0; ch < c; ++ch)
    for (int i = 0; i < ho; ++i)
      for (int j = 0; j < wo; ++j)
        out.at(ch, i, j) = 0.25 * (in.at(ch, 2 * i, 2 * j) + in.at(ch, 2 * i, 2 * j + 1) +
                                   in.at(ch, 2 * i + 1, 2 * j) + in.at(ch, 2 * i + 1, 2 * j + 1));
  if (!x.requires_grad()) return tape.record(std::move(out), false, nullptr);
  const int xi = x.id;
  return tape.record(std::move(out), true, [xi, c, ho, wo](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    Tensor& gx = t.grad_buffer(xi);
    for (int ch = 0; ch < c; ++ch)
      for (int i = 0; i < ho; ++i)
        for (int j = 0; j < wo; ++j) {
          const double v = 0.25 * g.at(ch, i, j);
          gx.at(ch, 2 * i, 2 * j) += v;
          gx.at(ch, 2 * i, 2 * j + 1) += v;
          gx.at(ch, 2 * i + 1, 2 * j) += v;
          gx.at(ch, 2 * i + 1, 2 * j + 1) += v;
        }
  });
}

Var global_avg_pool(Var x) {
  Tape& tape = tape_of(x);
  const Tensor& in = x.value();
  require_rank3(in, "global_avg_pool");
  const int c = in.channels();
  const std::size_t plane = static_cast<std::size_t>(in.rows()) * in.cols();
  Tensor out = Tensor::chw(c, 1, 1);
  for (int ch = 0; ch < c; ++ch) {
    double s = 0.0;
    for (std::size_t i = 0; i < plane; ++i) s += in[ch * plane + i];
    out[static_cast<std::size_t>(ch)] = s / static_cast<double>(plane);
  }
  if (!x.requires_grad()) return tape.record(std::move(out), false, nullptr);
  const int xi = x.id;
  return tape.record(std::move(out), true, [xi, c, plane](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    Tensor& gx = t.grad_buffer(xi);
    for (int ch = 0; ch < c; ++ch) {
      const double v = g[static_cast<std::size_t>(ch)] / static_cast<double>(plane);
      for (std::size_t i = 0; i < plane; ++i) gx[ch * plane + i] += v;
    }
  });
}

Var crop(Var x, int row, int col, int rows, int cols) {
  Tape& tape = tape_of(x);
  const Tensor& in = x.value();
  require_rank3(in, "crop");
  if (row < 0 || col < 0 || rows <= 0 || cols <= 0 || row + rows > in.rows() || col + cols > in.cols()) {
    throw Error(Errc::OutOfBounds, "crop window outside " + in.shape_string());
  }
  const int c = in.channels();
  Tensor out = Tensor::chw(c, rows, cols);
  for (int ch = 0; ch < c; ++ch)
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < cols; ++j) out.at(ch, i, j) = in.at(ch, row + i, col + j);
  if (!x.requires_grad()) return tape.record(std::move(out), false, nullptr);
  const int xi = x.id;
  return tape.record(std::move(out), true, [=](Tape& t, int self) {
    const Tensor& g = t.grad(self);
    Tensor& gx = t.grad_buffer(xi);
    for (int ch = 0; ch < c; ++ch)
      for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) gx.at(ch, row + i, col + j) += g.at(ch, i, j);
  });
}

Var linear(Var x, Var weight, Var bias) {
  Tape& tape = tape_of(x, weight);
  const Tensor& in = x.value();
  const Tensor& w = weight.value();
  if (w.rank() != 2 || static_cast<std::size_t>(w.dim(1)) != in.size()) {
    throw Error(Errc::ShapeMismatch, "linear weight " + w.shape_string() + " vs input " + in.shape_string());
  }
  const int nout = w.dim(0), nin = w.dim(1);
  Tensor out = Tensor::chw(nout, 1, 1);
  Eigen::Map<Eigen::VectorXd> out_v(out.data(), nout);
  out_v.noalias() = ConstMatMap(w.data(), nout, nin) * Eigen::Map<const Eigen::VectorXd>(in.data(), nin);
  out_v += Eigen::Map<const Eigen::VectorXd>(bias.value().data(), nout);
  const bool needs = x.requires_grad() || weight.requires_grad() || bias.requires_grad();
  if (!needs) return tape.record(std::move(out), false, nullptr);
  const int xi = x.id, wi = weight.id, bi = bias.id;
  return tape.record(std::move(out), true, [=](Tape& t, int self) {
    Eigen::Map<const Eigen::VectorXd> g(t.grad(self).data(), nout);
    if (t.requires_grad(wi)) {
      MatMap(t.grad_buffer(wi).data(), nout, nin).noalias() +=
          g * Eigen::Map<const Eigen::VectorXd>(t.value(xi).data(), nin).transpose();
    }
    if (t.requires_grad(bi)) Eigen::Map<Eigen::VectorXd>(t.grad_buffer(bi).data(), nout) += g;
    if (t.requires_grad(xi)) {
      Eigen::Map<Eigen::VectorXd>(t.grad_buffer(xi).data(), nin).noalias() +=
          ConstMatMap(t.value(wi).data(), nout, nin).transpose() * g;
    }
  });
}

Var sum(Var x) {
  Tape& tape = tape_of(x);
  const Tensor& in = x.value();
  double s = 0.0;
  for (double v : in.values()) s += v;
  if (!x.requires_grad()) return tape.record(Tensor::scalar(s), false, nullptr);
  const int xi = x.id;
  return tape.record(Tensor::scalar(s), true, [xi](Tape& t, int self) {
    const double g = t.grad(self)[0];
    Tensor& gx = t.grad_buffer(xi);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g;
  });
}

Var mean(Var x) {
  const double n = static_cast<double>(x.value().size());
  return affine(sum(x), 1.0 / n, 0.0);
}

Var l2_distance(Var a, Var b) {
  Tape& tape = tape_of(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (!av.same_shape(bv)) {
    throw Error(Errc::ShapeMismatch, "l2_distance " + av.shape_string() + " vs " + bv.shape_string());
  }
  double ss = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) ss += (av[i] - bv[i]) * (av[i] - bv[i]);
  const double norm = std::sqrt(ss);
  if (!a.requires_grad() && !b.requires_grad()) return tape.record(Tensor::scalar(norm), false, nullptr);
  const int ai = a.id, bi = b.id;
  return tape.record(Tensor::scalar(norm), true, [ai, bi, norm](Tape& t, int self) {
    if (norm == 0.0) return;
    const double g = t.grad(self)[0] / norm;
    const Tensor& av = t.value(ai);
    const Tensor& bv = t.value(bi);
    if (t.requires_grad(ai)) {
      Tensor& ga = t.grad_buffer(ai);
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g * (av[i] - bv[i]);
    }
    if (t.requires_grad(bi)) {
      Tensor& gb = t.grad_buffer(bi);
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] -= g * (av[i] - bv[i]);
    }
  });
}

Tensor softmax(const Tensor& logits) {
  Tensor p(logits.dims());
  double mx = -INFINITY;
  for (double v : logits.values()) mx = std::max(mx, v);
  double z = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - mx);
    z += p[i];
  }
  for (std::size_t i = 0; i < p.size(); ++i) p[i] /= z;
  return p;
}

Var softmax_cross_entropy(Var logits, int label) {
  Tape& tape = tape_of(logits);
  const Tensor& lv = logits.value();
  if (label < 0 || static_cast<std::size_t>(label) >= lv.size()) {
    throw Error(Errc::OutOfBounds, "class label outside logits");
  }
  Tensor p = softmax(lv);
  const double loss = -std::log(std::max(p[static_cast<std::size_t>(label)], 1e-300));
  if (!logits.requires_grad()) return tape.record(Tensor::scalar(loss), false, nullptr);
  const int li = logits.id;
  return tape.record(Tensor::scalar(loss), true, [li, label, p = std::move(p)](Tape& t, int self) {
    const double g = t.grad(self)[0];
    Tensor& gl = t.grad_buffer(li);
    for (std::size_t i = 0; i < gl.size(); ++i) {
      gl[i] += g * (p[i] - (static_cast<int>(i) == label ? 1.0 : 0.0));
    }
  });
}

}  // namespace srender
