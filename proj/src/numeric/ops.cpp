#include "tmn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "tmn/error.hpp"

namespace tmn::ops {
namespace {

using Inputs = std::span<const Tensor* const>;
using Grads = std::span<Tensor* const>;

[[noreturn]] void shape_error(std::string_view op, const std::string& detail) {
  throw DimensionError(std::string(op) + ": " + detail);
}

void require_same_shape(std::string_view op, const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) shape_error(op, a.shape_string() + " vs " + b.shape_string());
}

// y[o] = Σ_i x[i]·wt[i·out + o] + b[o], summed in increasing i. Every affine-like
// primitive goes through here so that equal inputs give bit-equal outputs.
void affine_kernel(const double* x, std::size_t in, const double* wt, const double* b,
                   double* y, std::size_t out) {
  std::fill(y, y + out, 0.0);
  for (std::size_t i = 0; i < in; ++i) {
    const double xi = x[i];
    const double* wrow = wt + i * out;
    for (std::size_t o = 0; o < out; ++o) y[o] += xi * wrow[o];
  }
  for (std::size_t o = 0; o < out; ++o) y[o] += b[o];
}

// Transposes the out×in block of w starting at row `row0` into an in×out buffer.
void transpose_block(const Tensor& w, std::size_t row0, std::size_t out, std::vector<double>& wt) {
  const std::size_t in = w.cols();
  wt.resize(in * out);
  for (std::size_t o = 0; o < out; ++o) {
    const double* src = w.data() + (row0 + o) * in;
    for (std::size_t i = 0; i < in; ++i) wt[i * out + o] = src[i];
  }
}

// Gradients of y = x·Wᵀ + b restricted to one module block.
void affine_backward_block(const Tensor& x, std::size_t x_col0, const Tensor& w, std::size_t w_row0,
                           std::size_t out, const Tensor& dy, std::size_t y_col0, Tensor* dx,
                           Tensor* dw, Tensor* db) {
  const std::size_t in = w.cols();
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const double* dyr = dy.data() + r * dy.cols() + y_col0;
    const double* xr = x.data() + r * x.cols() + x_col0;
    if (dx) {
      double* dxr = dx->data() + r * dx->cols() + x_col0;
      for (std::size_t o = 0; o < out; ++o) {
        const double g = dyr[o];
        const double* wrow = w.data() + (w_row0 + o) * in;
        for (std::size_t i = 0; i < in; ++i) dxr[i] += g * wrow[i];
      }
    }
    if (dw) {
      for (std::size_t o = 0; o < out; ++o) {
        const double g = dyr[o];
        double* dwrow = dw->data() + (w_row0 + o) * in;
        for (std::size_t i = 0; i < in; ++i) dwrow[i] += g * xr[i];
      }
    }
    if (db) {
      double* dbr = db->data() + y_col0;
      for (std::size_t o = 0; o < out; ++o) dbr[o] += dyr[o];
    }
  }
}

class AffineOp final : public Primitive {
 public:
  std::string_view name() const override { return "affine"; }
  // inputs: w, b, x
  Tensor forward(Inputs in) const override {
    const Tensor& w = *in[0];
    const Tensor& b = *in[1];
    const Tensor& x = *in[2];
    if (x.cols() != w.cols()) {
      shape_error(name(), "input " + x.shape_string() + " vs weight " + w.shape_string());
    }
    if (b.rows() != 1 || b.cols() != w.rows()) {
      shape_error(name(), "bias " + b.shape_string() + " vs weight " + w.shape_string());
    }
    std::vector<double> wt;
    transpose_block(w, 0, w.rows(), wt);
    Tensor y(x.rows(), w.rows());
    for (std::size_t r = 0; r < x.rows(); ++r) {
      affine_kernel(x.data() + r * x.cols(), x.cols(), wt.data(), b.data(),
                    y.data() + r * y.cols(), y.cols());
    }
    return y;
  }
  void backward(Inputs in, const Tensor&, const Tensor& dy, Grads g) const override {
    affine_backward_block(*in[2], 0, *in[0], 0, in[0]->rows(), dy, 0, g[2], g[0], g[1]);
  }
};

class BlockAffineOp final : public Primitive {
 public:
  explicit BlockAffineOp(std::size_t modules) : modules_(modules) {}
  std::string_view name() const override { return "block_affine"; }
  // inputs: w, b, x
  Tensor forward(Inputs in) const override {
    const Tensor& w = *in[0];
    const Tensor& b = *in[1];
    const Tensor& x = *in[2];
    if (modules_ == 0 || w.rows() % modules_ != 0) {
      shape_error(name(), "weight " + w.shape_string() + " does not split into " +
                              std::to_string(modules_) + " modules");
    }
    const std::size_t out = w.rows() / modules_;
    const std::size_t d_in = w.cols();
    if (x.cols() != modules_ * d_in) {
      shape_error(name(), "input " + x.shape_string() + " vs " + std::to_string(modules_) +
                              " modules of width " + std::to_string(d_in));
    }
    if (b.rows() != 1 || b.cols() != w.rows()) {
      shape_error(name(), "bias " + b.shape_string() + " vs weight " + w.shape_string());
    }
    Tensor y(x.rows(), w.rows());
    std::vector<double> wt;
    for (std::size_t m = 0; m < modules_; ++m) {
      transpose_block(w, m * out, out, wt);
      for (std::size_t r = 0; r < x.rows(); ++r) {
        affine_kernel(x.data() + r * x.cols() + m * d_in, d_in, wt.data(), b.data() + m * out,
                      y.data() + r * y.cols() + m * out, out);
      }
    }
    return y;
  }
  void backward(Inputs in, const Tensor&, const Tensor& dy, Grads g) const override {
    const std::size_t out = in[0]->rows() / modules_;
    const std::size_t d_in = in[0]->cols();
    for (std::size_t m = 0; m < modules_; ++m) {
      affine_backward_block(*in[2], m * d_in, *in[0], m * out, out, dy, m * out, g[2], g[0], g[1]);
    }
  }

 private:
  std::size_t modules_;
};

class ReluOp final : public Primitive {
 public:
  std::string_view name() const override { return "relu"; }
  Tensor forward(Inputs in) const override {
    Tensor y = *in[0];
    for (double& v : y.values()) v = v > 0.0 ? v : 0.0;
    return y;
  }
  void backward(Inputs in, const Tensor&, const Tensor& dy, Grads g) const override {
    const Tensor& x = *in[0];
    Tensor& dx = *g[0];
    for (std::size_t i = 0; i < x.size(); ++i) {
      if (x[i] > 0.0) dx[i] += dy[i];
    }
  }
  double kink_distance(Inputs in) const override {
    double best = std::numeric_limits<double>::infinity();
    for (double v : in[0]->values()) best = std::min(best, std::abs(v));
    return best;
  }
};

class MatMulOp final : public Primitive {
 public:
  std::string_view name() const override { return "matmul"; }
  Tensor forward(Inputs in) const override {
    const Tensor& a = *in[0];
    const Tensor& b = *in[1];
    if (a.cols() != b.rows()) shape_error(name(), a.shape_string() + " times " + b.shape_string());
    Tensor c(a.rows(), b.cols());
    const std::size_t n = a.cols();
    const std::size_t p = b.cols();
    for (std::size_t r = 0; r < a.rows(); ++r) {
      double* cr = c.data() + r * p;
      for (std::size_t k = 0; k < n; ++k) {
        const double ark = a(r, k);
        const double* brow = b.data() + k * p;
        for (std::size_t j = 0; j < p; ++j) cr[j] += ark * brow[j];
      }
    }
    return c;
  }
  void backward(Inputs in, const Tensor&, const Tensor& dc, Grads g) const override {
    const Tensor& a = *in[0];
    const Tensor& b = *in[1];
    const std::size_t n = a.cols();
    const std::size_t p = b.cols();
    for (std::size_t r = 0; r < a.rows(); ++r) {
      const double* dcr = dc.data() + r * p;
      if (g[0]) {
        for (std::size_t k = 0; k < n; ++k) {
          const double* brow = b.data() + k * p;
          double acc = 0.0;
          for (std::size_t j = 0; j < p; ++j) acc += dcr[j] * brow[j];
          (*g[0])(r, k) += acc;
        }
      }
      if (g[1]) {
        for (std::size_t k = 0; k < n; ++k) {
          const double ark = a(r, k);
          double* dbrow = g[1]->data() + k * p;
          for (std::size_t j = 0; j < p; ++j) dbrow[j] += ark * dcr[j];
        }
      }
    }
  }
};

class TransposeOp final : public Primitive {
 public:
  std::string_view name() const override { return "transpose"; }
  Tensor forward(Inputs in) const override {
    const Tensor& x = *in[0];
    Tensor y(x.cols(), x.rows());
    for (std::size_t r = 0; r < x.rows(); ++r)
      for (std::size_t c = 0; c < x.cols(); ++c) y(c, r) = x(r, c);
    return y;
  }
  void backward(Inputs in, const Tensor&, const Tensor& dy, Grads g) const override {
    const Tensor& x = *in[0];
    for (std::size_t r = 0; r < x.rows(); ++r)
      for (std::size_t c = 0; c < x.cols(); ++c) (*g[0])(r, c) += dy(c, r);
  }
};

enum class Elementwise { add, sub, mul };

class ElementwiseOp final : public Primitive {
 public:
  explicit ElementwiseOp(Elementwise kind) : kind_(kind) {}
  std::string_view name() const override {
    switch (kind_) {
      case Elementwise::add: return "add";
      case Elementwise::sub: return "sub";
      case Elementwise::mul: return "mul";
    }
    return "elementwise";
  }
  Tensor forward(Inputs in) const override {
    require_same_shape(name(), *in[0], *in[1]);
    Tensor y = *in[0];
    const Tensor& b = *in[1];
    for (std::size_t i = 0; i < y.size(); ++i) {
      switch (kind_) {
        case Elementwise::add: y[i] += b[i]; break;
        case Elementwise::sub: y[i] -= b[i]; break;
        case Elementwise::mul: y[i] *= b[i]; break;
      }
    }
    return y;
  }
  void backward(Inputs in, const Tensor&, const Tensor& dy, Grads g) const override {
    for (std::size_t i = 0; i < dy.size(); ++i) {
      switch (kind_) {
        case Elementwise::add:
          if (g[0]) (*g[0])[i] += dy[i];
          if (g[1]) (*g[1])[i] += dy[i];
          break;
        case Elementwise::sub:
          if (g[0]) (*g[0])[i] += dy[i];
          if (g[1]) (*g[1])[i] -= dy[i];
          break;
        case Elementwise::mul:
          if (g[0]) (*g[0])[i] += dy[i] * (*in[1])[i];
          if (g[1]) (*g[1])[i] += dy[i] * (*in[0])[i];
          break;
      }
    }
  }

 private:
  Elementwise kind_;
};

class AddRowOp final : public Primitive {
 public:
  std::string_view name() const override { return "add_row"; }
  Tensor forward(Inputs in) const override {
    const Tensor& row = *in[1];
    if (row.rows() != 1 || row.cols() != in[0]->cols()) {
      shape_error(name(), in[0]->shape_string() + " plus row " + row.shape_string());
    }
    Tensor y = *in[0];
    for (std::size_t r = 0; r < y.rows(); ++r) {
      auto yr = y.row_span(r);
      for (std::size_t c = 0; c < yr.size(); ++c) yr[c] += row[c];
    }
    return y;
  }
  void backward(Inputs, const Tensor&, const Tensor& dy, Grads g) const override {
    if (g[0]) {
      for (std::size_t i = 0; i < dy.size(); ++i) (*g[0])[i] += dy[i];
    }
    if (g[1]) {
      for (std::size_t r = 0; r < dy.rows(); ++r)
        for (std::size_t c = 0; c < dy.cols(); ++c) (*g[1])[c] += dy(r, c);
    }
  }
};

class ScaleOp final : public Primitive {
 public:
  std::string_view name() const override { return "scale"; }
  Tensor forward(Inputs in) const override {
    if (!in[0]->is_scalar()) shape_error(name(), "factor has shape " + in[0]->shape_string());
    const double s = (*in[0])[0];
    Tensor y = *in[1];
    for (double& v : y.values()) v *= s;
    return y;
  }
  void backward(Inputs in, const Tensor&, const Tensor& dy, Grads g) const override {
    const Tensor& x = *in[1];
    if (g[0]) {
      double acc = 0.0;
      for (std::size_t i = 0; i < x.size(); ++i) acc += dy[i] * x[i];
      (*g[0])[0] += acc;
    }
    if (g[1]) {
      const double s = (*in[0])[0];
      for (std::size_t i = 0; i < x.size(); ++i) (*g[1])[i] += s * dy[i];
    }
  }
};

class SumOp final : public Primitive {
 public:
  explicit SumOp(bool mean) : mean_(mean) {}
  std::string_view name() const override { return mean_ ? "mean" : "sum"; }
  Tensor forward(Inputs in) const override {
    if (mean_ && in[0]->empty()) shape_error(name(), "empty input");
    double acc = 0.0;
    for (double v : in[0]->values()) acc += v;
    if (mean_) acc /= static_cast<double>(in[0]->size());
    return Tensor::scalar(acc);
  }
  void backward(Inputs in, const Tensor&, const Tensor& dy, Grads g) const override {
    double d = dy[0];
    if (mean_) d /= static_cast<double>(in[0]->size());
    for (double& v : g[0]->values()) v += d;
  }

 private:
  bool mean_;
};

class ConcatColsOp final : public Primitive {
 public:
  std::string_view name() const override { return "concat_cols"; }
  Tensor forward(Inputs in) const override {
    if (in.empty()) shape_error(name(), "no inputs");
    std::size_t cols = 0;
    for (const Tensor* t : in) {
      if (t->rows() != in[0]->rows()) {
        shape_error(name(), t->shape_string() + " vs " + in[0]->shape_string());
      }
      cols += t->cols();
    }
    Tensor y(in[0]->rows(), cols);
    for (std::size_t r = 0; r < y.rows(); ++r) {
      double* dst = y.data() + r * cols;
      for (const Tensor* t : in) {
        auto src = t->row_span(r);
        dst = std::copy(src.begin(), src.end(), dst);
      }
    }
    return y;
  }
  void backward(Inputs in, const Tensor&, const Tensor& dy, Grads g) const override {
    std::size_t offset = 0;
    for (std::size_t k = 0; k < in.size(); ++k) {
      const std::size_t w = in[k]->cols();
      if (g[k]) {
        for (std::size_t r = 0; r < dy.rows(); ++r)
          for (std::size_t c = 0; c < w; ++c) (*g[k])(r, c) += dy(r, offset + c);
      }
      offset += w;
    }
  }
};

class SliceColsOp final : public Primitive {
 public:
  SliceColsOp(std::size_t begin, std::size_t count) : begin_(begin), count_(count) {}
  std::string_view name() const override { return "slice_cols"; }
  Tensor forward(Inputs in) const override {
    const Tensor& x = *in[0];
    if (begin_ + count_ > x.cols()) shape_error(name(), "columns out of range for " + x.shape_string());
    Tensor y(x.rows(), count_);
    for (std::size_t r = 0; r < x.rows(); ++r) {
      auto src = x.row_span(r).subspan(begin_, count_);
      std::copy(src.begin(), src.end(), y.row_span(r).begin());
    }
    return y;
  }
  void backward(Inputs, const Tensor&, const Tensor& dy, Grads g) const override {
    for (std::size_t r = 0; r < dy.rows(); ++r)
      for (std::size_t c = 0; c < count_; ++c) (*g[0])(r, begin_ + c) += dy(r, c);
  }

 private:
  std::size_t begin_, count_;
};

class GatherRowsOp final : public Primitive {
 public:
  explicit GatherRowsOp(std::vector<std::size_t> rows) : rows_(std::move(rows)) {}
  std::string_view name() const override { return "gather_rows"; }
  Tensor forward(Inputs in) const override {
    const Tensor& table = *in[0];
    Tensor y(rows_.size(), table.cols());
    for (std::size_t r = 0; r < rows_.size(); ++r) {
      if (rows_[r] >= table.rows()) {
        shape_error(name(), "row " + std::to_string(rows_[r]) + " outside table " +
                                table.shape_string());
      }
      auto src = table.row_span(rows_[r]);
      std::copy(src.begin(), src.end(), y.row_span(r).begin());
    }
    return y;
  }
  void backward(Inputs, const Tensor&, const Tensor& dy, Grads g) const override {
    for (std::size_t r = 0; r < rows_.size(); ++r) {
      auto dst = g[0]->row_span(rows_[r]);
      auto src = dy.row_span(r);
      for (std::size_t c = 0; c < src.size(); ++c) dst[c] += src[c];
    }
  }

 private:
  std::vector<std::size_t> rows_;
};

class SliceReshapeOp final : public Primitive {
 public:
  SliceReshapeOp(std::size_t row, std::size_t offset, std::size_t rows, std::size_t cols)
      : row_(row), offset_(offset), rows_(rows), cols_(cols) {}
  std::string_view name() const override { return "slice_reshape"; }
  Tensor forward(Inputs in) const override {
    const Tensor& src = *in[0];
    if (row_ >= src.rows() || offset_ + rows_ * cols_ > src.cols()) {
      shape_error(name(), "segment out of range for " + src.shape_string());
    }
    const double* begin = src.data() + row_ * src.cols() + offset_;
    return Tensor(rows_, cols_, std::vector<double>(begin, begin + rows_ * cols_));
  }
  void backward(Inputs in, const Tensor&, const Tensor& dy, Grads g) const override {
    double* dst = g[0]->data() + row_ * in[0]->cols() + offset_;
    for (std::size_t i = 0; i < dy.size(); ++i) dst[i] += dy[i];
  }

 private:
  std::size_t row_, offset_, rows_, cols_;
};

class ColumnSoftmaxOp final : public Primitive {
 public:
  std::string_view name() const override { return "column_softmax"; }
  Tensor forward(Inputs in) const override {
    const Tensor& q = *in[0];
    if (q.rows() == 0) shape_error(name(), "no rows");
    Tensor g(q.rows(), q.cols());
    for (std::size_t c = 0; c < q.cols(); ++c) {
      double top = q(0, c);
      for (std::size_t r = 1; r < q.rows(); ++r) top = std::max(top, q(r, c));
      double total = 0.0;
      for (std::size_t r = 0; r < q.rows(); ++r) {
        g(r, c) = std::exp(q(r, c) - top);
        total += g(r, c);
      }
      for (std::size_t r = 0; r < q.rows(); ++r) g(r, c) /= total;
    }
    return g;
  }
  void backward(Inputs, const Tensor& g, const Tensor& dg, Grads grads) const override {
    Tensor& dq = *grads[0];
    for (std::size_t c = 0; c < g.cols(); ++c) {
      double dot = 0.0;
      for (std::size_t r = 0; r < g.rows(); ++r) dot += g(r, c) * dg(r, c);
      for (std::size_t r = 0; r < g.rows(); ++r) dq(r, c) += g(r, c) * (dg(r, c) - dot);
    }
  }
};

class LogSumExpRowsOp final : public Primitive {
 public:
  explicit LogSumExpRowsOp(std::vector<unsigned char> mask) : mask_(std::move(mask)) {}
  std::string_view name() const override { return "log_sum_exp_rows"; }
  bool active(std::size_t i) const { return mask_.empty() || mask_[i] != 0; }
  Tensor forward(Inputs in) const override {
    const Tensor& s = *in[0];
    if (!mask_.empty() && mask_.size() != s.size()) {
      shape_error(name(), "mask of " + std::to_string(mask_.size()) + " entries for " +
                              s.shape_string());
    }
    Tensor y(s.rows(), 1);
    for (std::size_t r = 0; r < s.rows(); ++r) {
      double top = -std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < s.cols(); ++c) {
        if (active(r * s.cols() + c)) top = std::max(top, s(r, c));
      }
      if (!std::isfinite(top)) throw ContractError("log_sum_exp_rows: row with no active entry");
      double total = 0.0;
      for (std::size_t c = 0; c < s.cols(); ++c) {
        if (active(r * s.cols() + c)) total += std::exp(s(r, c) - top);
      }
      y[r] = top + std::log(total);
    }
    return y;
  }
  void backward(Inputs in, const Tensor& y, const Tensor& dy, Grads g) const override {
    const Tensor& s = *in[0];
    Tensor& ds = *g[0];
    for (std::size_t r = 0; r < s.rows(); ++r) {
      for (std::size_t c = 0; c < s.cols(); ++c) {
        if (active(r * s.cols() + c)) ds(r, c) += dy[r] * std::exp(s(r, c) - y[r]);
      }
    }
  }

 private:
  std::vector<unsigned char> mask_;
};

class PickOp final : public Primitive {
 public:
  explicit PickOp(std::vector<std::size_t> columns) : columns_(std::move(columns)) {}
  std::string_view name() const override { return "pick"; }
  Tensor forward(Inputs in) const override {
    const Tensor& s = *in[0];
    if (columns_.size() != s.rows()) {
      shape_error(name(), std::to_string(columns_.size()) + " columns for " + s.shape_string());
    }
    Tensor y(s.rows(), 1);
    for (std::size_t r = 0; r < s.rows(); ++r) {
      if (columns_[r] >= s.cols()) shape_error(name(), "column out of range");
      y[r] = s(r, columns_[r]);
    }
    return y;
  }
  void backward(Inputs, const Tensor&, const Tensor& dy, Grads g) const override {
    for (std::size_t r = 0; r < columns_.size(); ++r) (*g[0])(r, columns_[r]) += dy[r];
  }

 private:
  std::vector<std::size_t> columns_;
};

class ModuleMixOp final : public Primitive {
 public:
  std::string_view name() const override { return "module_mix"; }
  // inputs: outputs (rows × M_in·d), gates (M_in × M_out)
  Tensor forward(Inputs in) const override {
    const Tensor& o = *in[0];
    const Tensor& gates = *in[1];
    const std::size_t m_in = gates.rows();
    if (m_in == 0 || o.cols() % m_in != 0) {
      shape_error(name(), "outputs " + o.shape_string() + " vs gates " + gates.shape_string());
    }
    const std::size_t d = o.cols() / m_in;
    const std::size_t m_out = gates.cols();
    Tensor x(o.rows(), m_out * d);
    for (std::size_t r = 0; r < o.rows(); ++r) {
      const double* orow = o.data() + r * o.cols();
      double* xrow = x.data() + r * x.cols();
      for (std::size_t j = 0; j < m_out; ++j) {
        double* xj = xrow + j * d;
        for (std::size_t k = 0; k < m_in; ++k) {
          const double gkj = gates(k, j);
          const double* ok = orow + k * d;
          for (std::size_t t = 0; t < d; ++t) xj[t] += gkj * ok[t];
        }
      }
    }
    return x;
  }
  void backward(Inputs in, const Tensor&, const Tensor& dx, Grads g) const override {
    const Tensor& o = *in[0];
    const Tensor& gates = *in[1];
    const std::size_t m_in = gates.rows();
    const std::size_t m_out = gates.cols();
    const std::size_t d = o.cols() / m_in;
    for (std::size_t r = 0; r < o.rows(); ++r) {
      const double* orow = o.data() + r * o.cols();
      const double* dxrow = dx.data() + r * dx.cols();
      for (std::size_t j = 0; j < m_out; ++j) {
        const double* dxj = dxrow + j * d;
        for (std::size_t k = 0; k < m_in; ++k) {
          const double* ok = orow + k * d;
          if (g[0]) {
            const double gkj = gates(k, j);
            double* dok = g[0]->data() + r * o.cols() + k * d;
            for (std::size_t t = 0; t < d; ++t) dok[t] += gkj * dxj[t];
          }
          if (g[1]) {
            double acc = 0.0;
            for (std::size_t t = 0; t < d; ++t) acc += ok[t] * dxj[t];
            (*g[1])(k, j) += acc;
          }
        }
      }
    }
  }
};

}  // namespace

Var affine(Tape& tape, Var w, Var b, Var x) {
  return tape.apply(std::make_unique<AffineOp>(), {w, b, x});
}

Var relu(Tape& tape, Var x) { return tape.apply(std::make_unique<ReluOp>(), {x}); }

Var matmul(Tape& tape, Var a, Var b) { return tape.apply(std::make_unique<MatMulOp>(), {a, b}); }

Var transpose(Tape& tape, Var x) { return tape.apply(std::make_unique<TransposeOp>(), {x}); }

Var add(Tape& tape, Var a, Var b) {
  return tape.apply(std::make_unique<ElementwiseOp>(Elementwise::add), {a, b});
}

Var sub(Tape& tape, Var a, Var b) {
  return tape.apply(std::make_unique<ElementwiseOp>(Elementwise::sub), {a, b});
}

Var mul(Tape& tape, Var a, Var b) {
  return tape.apply(std::make_unique<ElementwiseOp>(Elementwise::mul), {a, b});
}

Var add_row(Tape& tape, Var x, Var row) {
  return tape.apply(std::make_unique<AddRowOp>(), {x, row});
}

Var scale(Tape& tape, Var s, Var x) { return tape.apply(std::make_unique<ScaleOp>(), {s, x}); }

Var sum(Tape& tape, Var x) { return tape.apply(std::make_unique<SumOp>(false), {x}); }

Var mean(Tape& tape, Var x) { return tape.apply(std::make_unique<SumOp>(true), {x}); }

Var concat_cols(Tape& tape, std::span<const Var> parts) {
  return tape.apply(std::make_unique<ConcatColsOp>(), std::vector<Var>(parts.begin(), parts.end()));
}

Var slice_cols(Tape& tape, Var x, std::size_t begin, std::size_t count) {
  return tape.apply(std::make_unique<SliceColsOp>(begin, count), {x});
}

Var gather_rows(Tape& tape, Var table, std::vector<std::size_t> rows) {
  return tape.apply(std::make_unique<GatherRowsOp>(std::move(rows)), {table});
}

Var slice_reshape(Tape& tape, Var src, std::size_t row, std::size_t offset, std::size_t rows,
                  std::size_t cols) {
  return tape.apply(std::make_unique<SliceReshapeOp>(row, offset, rows, cols), {src});
}

Var column_softmax(Tape& tape, Var logits) {
  return tape.apply(std::make_unique<ColumnSoftmaxOp>(), {logits});
}

Var log_sum_exp_rows(Tape& tape, Var scores, std::vector<unsigned char> mask) {
  return tape.apply(std::make_unique<LogSumExpRowsOp>(std::move(mask)), {scores});
}

Var pick(Tape& tape, Var scores, std::vector<std::size_t> columns) {
  return tape.apply(std::make_unique<PickOp>(std::move(columns)), {scores});
}

Var softmax_cross_entropy(Tape& tape, Var scores, std::vector<std::size_t> targets,
                          std::vector<unsigned char> mask) {
  if (!mask.empty()) {
    const std::size_t cols = tape.value(scores).cols();
    for (std::size_t r = 0; r < targets.size(); ++r) {
      if (targets[r] >= cols || mask.size() <= r * cols + targets[r] ||
          mask[r * cols + targets[r]] == 0) {
        throw ContractError("softmax_cross_entropy: target outside the candidate mask");
      }
    }
  }
  Var normalizer = log_sum_exp_rows(tape, scores, std::move(mask));
  Var target = pick(tape, scores, std::move(targets));
  return mean(tape, sub(tape, normalizer, target));
}

Var module_mix(Tape& tape, Var outputs, Var gates) {
  return tape.apply(std::make_unique<ModuleMixOp>(), {outputs, gates});
}

Var block_affine(Tape& tape, Var w, Var b, Var x, std::size_t modules) {
  return tape.apply(std::make_unique<BlockAffineOp>(modules), {w, b, x});
}

}  // namespace tmn::ops
