#include "mail/numeric/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>

#include "mail/error.hpp"

namespace mail::numeric {
namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

ConstMatrixMap as_matrix(const Tensor& t) {
  return ConstMatrixMap(t.data().data(), static_cast<Eigen::Index>(t.rows()),
                        static_cast<Eigen::Index>(t.cols()));
}

MatrixMap as_matrix(Tensor& t) {
  return MatrixMap(t.data().data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}

[[noreturn]] void shape_error(const char* op, const std::string& detail) {
  throw Error(ErrorCode::kShapeMismatch, std::string(op) + ": " + detail);
}

Tape& tape_of(Var a) {
  if (!a.valid()) throw Error(ErrorCode::kShapeMismatch, "operation on an unbound Var");
  return a.tape();
}

void add_into(Tensor& dst, std::span<const double> src) {
  auto d = dst.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += src[i];
}

void require_matrix(const Tensor& t, const char* op) {
  if (t.rank() != 2) shape_error(op, "expected a matrix, got " + shape_string(t.shape()));
}

void require_vector(const Tensor& t, const char* op) {
  if (t.rank() != 1) shape_error(op, "expected a vector, got " + shape_string(t.shape()));
}

void require_segments(std::span<const std::size_t> segment, std::size_t n_items, std::size_t n_segments,
                      const char* op) {
  if (segment.size() != n_items) shape_error(op, "segment index length mismatch");
  for (std::size_t s : segment) {
    if (s >= n_segments) shape_error(op, "segment id out of range");
  }
}

}  // namespace

Var linear(Var x, Var weight, Var bias) {
  Tape& tape = tape_of(x);
  const Tensor& xv = x.value();
  const Tensor& wv = weight.value();
  require_matrix(wv, "linear");
  if (xv.rank() != 1 && xv.rank() != 2) shape_error("linear", "input must be a vector or matrix");
  if (xv.cols() != wv.cols()) {
    shape_error("linear", "input " + shape_string(xv.shape()) + " vs weight " + shape_string(wv.shape()));
  }
  const std::size_t n = xv.rows();
  const std::size_t out_dim = wv.rows();
  if (bias.valid() && (bias.value().rank() != 1 || bias.value().numel() != out_dim)) {
    shape_error("linear", "bias " + shape_string(bias.value().shape()) + " vs output " + std::to_string(out_dim));
  }
  Tensor out(xv.rank() == 1 ? Shape{out_dim} : Shape{n, out_dim});
  as_matrix(out).noalias() = as_matrix(xv) * as_matrix(wv).transpose();
  if (bias.valid()) as_matrix(out).rowwise() += as_matrix(bias.value()).row(0);

  const bool rg = x.requires_grad() || weight.requires_grad() || (bias.valid() && bias.requires_grad());
  return tape.record(std::move(out), rg, [x, weight, bias](Tape& t, const Tensor& g) {
    auto gm = as_matrix(g);
    if (Tensor* gx = t.grad_sink(x)) as_matrix(*gx).noalias() += gm * as_matrix(weight.value());
    if (Tensor* gw = t.grad_sink(weight)) as_matrix(*gw).noalias() += gm.transpose() * as_matrix(x.value());
    if (bias.valid()) {
      if (Tensor* gb = t.grad_sink(bias)) as_matrix(*gb).row(0) += gm.colwise().sum();
    }
  }, "linear");
}

Var concat(std::span<const Var> xs) {
  if (xs.empty()) shape_error("concat", "no inputs");
  Tape& tape = tape_of(xs[0]);
  std::vector<double> data;
  bool rg = false;
  for (const Var& v : xs) {
    auto d = v.value().data();
    data.insert(data.end(), d.begin(), d.end());
    rg = rg || v.requires_grad();
  }
  std::vector<Var> inputs(xs.begin(), xs.end());
  return tape.record(Tensor::vector(std::move(data)), rg, [inputs](Tape& t, const Tensor& g) {
    std::size_t offset = 0;
    for (const Var& v : inputs) {
      const std::size_t n = v.value().numel();
      if (Tensor* gv = t.grad_sink(v)) add_into(*gv, g.data().subspan(offset, n));
      offset += n;
    }
  }, "concat");
}

Var concat_cols(std::span<const Var> xs) {
  if (xs.empty()) shape_error("concat_cols", "no inputs");
  Tape& tape = tape_of(xs[0]);
  const std::size_t n = xs[0].value().rows();
  std::size_t total = 0;
  bool rg = false;
  for (const Var& v : xs) {
    require_matrix(v.value(), "concat_cols");
    if (v.value().rows() != n) shape_error("concat_cols", "row count mismatch");
    total += v.value().cols();
    rg = rg || v.requires_grad();
  }
  Tensor out(Shape{n, total});
  std::size_t offset = 0;
  for (const Var& v : xs) {
    const std::size_t k = v.value().cols();
    as_matrix(out).middleCols(static_cast<Eigen::Index>(offset), static_cast<Eigen::Index>(k)) =
        as_matrix(v.value());
    offset += k;
  }
  std::vector<Var> inputs(xs.begin(), xs.end());
  return tape.record(std::move(out), rg, [inputs](Tape& t, const Tensor& g) {
    std::size_t off = 0;
    for (const Var& v : inputs) {
      const std::size_t k = v.value().cols();
      if (Tensor* gv = t.grad_sink(v)) {
        as_matrix(*gv) += as_matrix(g).middleCols(static_cast<Eigen::Index>(off), static_cast<Eigen::Index>(k));
      }
      off += k;
    }
  }, "concat_cols");
}

Var weighted_sum(std::span<const Var> xs, Var weights) {
  if (xs.empty()) shape_error("weighted_sum", "no inputs");
  Tape& tape = tape_of(weights);
  const Tensor& w = weights.value();
  if (w.numel() != xs.size()) shape_error("weighted_sum", "one weight per input required");
  Tensor out(xs[0].value().shape());
  bool rg = weights.requires_grad();
  for (std::size_t i = 0; i < xs.size(); ++i) {
    require_same_shape(out, xs[i].value(), "weighted_sum");
    auto src = xs[i].value().data();
    auto dst = out.data();
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += w[i] * src[k];
    rg = rg || xs[i].requires_grad();
  }
  std::vector<Var> inputs(xs.begin(), xs.end());
  return tape.record(std::move(out), rg, [inputs, weights](Tape& t, const Tensor& g) {
    const Tensor& w = weights.value();
    Tensor* gw = t.grad_sink(weights);
    for (std::size_t i = 0; i < inputs.size(); ++i) {
      auto xi = inputs[i].value().data();
      if (gw != nullptr) {
        double acc = 0.0;
        for (std::size_t k = 0; k < xi.size(); ++k) acc += g[k] * xi[k];
        (*gw)[i] += acc;
      }
      if (Tensor* gx = t.grad_sink(inputs[i])) {
        auto d = gx->data();
        for (std::size_t k = 0; k < d.size(); ++k) d[k] += w[i] * g[k];
      }
    }
  }, "weighted_sum");
}

Var dot(Var x, Var y) {
  Tape& tape = tape_of(x);
  if (x.value().numel() != y.value().numel()) {
    shape_error("dot", shape_string(x.shape()) + " vs " + shape_string(y.shape()));
  }
  double acc = 0.0;
  auto xd = x.value().data();
  auto yd = y.value().data();
  for (std::size_t i = 0; i < xd.size(); ++i) acc += xd[i] * yd[i];
  return tape.record(Tensor::scalar(acc), x.requires_grad() || y.requires_grad(),
                     [x, y](Tape& t, const Tensor& g) {
                       const double s = g[0];
                       if (Tensor* gx = t.grad_sink(x)) {
                         auto d = gx->data();
                         auto yd = y.value().data();
                         for (std::size_t i = 0; i < d.size(); ++i) d[i] += s * yd[i];
                       }
                       if (Tensor* gy = t.grad_sink(y)) {
                         auto d = gy->data();
                         auto xd = x.value().data();
                         for (std::size_t i = 0; i < d.size(); ++i) d[i] += s * xd[i];
                       }
                     }, "dot");
}

Var matvec(Var m, Var v) {
  Tape& tape = tape_of(m);
  require_matrix(m.value(), "matvec");
  if (v.value().numel() != m.value().cols()) {
    shape_error("matvec", shape_string(m.shape()) + " vs " + shape_string(v.shape()));
  }
  const std::size_t n = m.value().rows();
  Tensor out(Shape{n});
  Eigen::Map<const Eigen::VectorXd> vv(v.value().data().data(), static_cast<Eigen::Index>(v.value().numel()));
  Eigen::Map<Eigen::VectorXd>(out.data().data(), static_cast<Eigen::Index>(n)).noalias() = as_matrix(m.value()) * vv;
  return tape.record(std::move(out), m.requires_grad() || v.requires_grad(), [m, v](Tape& t, const Tensor& g) {
    Eigen::Map<const Eigen::VectorXd> gv(g.data().data(), static_cast<Eigen::Index>(g.numel()));
    if (Tensor* gm = t.grad_sink(m)) {
      Eigen::Map<const Eigen::RowVectorXd> vv(v.value().data().data(), static_cast<Eigen::Index>(v.value().numel()));
      as_matrix(*gm).noalias() += gv * vv;
    }
    if (Tensor* gvec = t.grad_sink(v)) {
      Eigen::Map<Eigen::VectorXd>(gvec->data().data(), static_cast<Eigen::Index>(gvec->numel())).noalias() +=
          as_matrix(m.value()).transpose() * gv;
    }
  }, "matvec");
}

Var leaky_relu(Var x, double slope) {
  Tape& tape = tape_of(x);
  Tensor out = x.value();
  for (double& v : out.data()) v = v >= 0.0 ? v : slope * v;
  return tape.record(std::move(out), x.requires_grad(), [x, slope](Tape& t, const Tensor& g) {
    if (Tensor* gx = t.grad_sink(x)) {
      auto xd = x.value().data();
      auto d = gx->data();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += xd[i] >= 0.0 ? g[i] : slope * g[i];
    }
  }, "leaky_relu");
}

Var exp(Var x) {
  Tape& tape = tape_of(x);
  Tensor out = x.value();
  for (double& v : out.data()) v = std::exp(v);
  const std::size_t self = tape.size();
  return tape.record(std::move(out), x.requires_grad(), [x, self](Tape& t, const Tensor& g) {
    if (Tensor* gx = t.grad_sink(x)) {
      const Tensor& y = t.value(self);
      auto d = gx->data();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i] * y[i];
    }
  }, "exp");
}

Var add(Var a, Var b) {
  Tape& tape = tape_of(a);
  require_same_shape(a.value(), b.value(), "add");
  Tensor out = a.value();
  add_into(out, b.value().data());
  return tape.record(std::move(out), a.requires_grad() || b.requires_grad(), [a, b](Tape& t, const Tensor& g) {
    if (Tensor* ga = t.grad_sink(a)) add_into(*ga, g.data());
    if (Tensor* gb = t.grad_sink(b)) add_into(*gb, g.data());
  }, "add");
}

Var sub(Var a, Var b) {
  Tape& tape = tape_of(a);
  require_same_shape(a.value(), b.value(), "sub");
  Tensor out = a.value();
  auto od = out.data();
  auto bd = b.value().data();
  for (std::size_t i = 0; i < od.size(); ++i) od[i] -= bd[i];
  return tape.record(std::move(out), a.requires_grad() || b.requires_grad(), [a, b](Tape& t, const Tensor& g) {
    if (Tensor* ga = t.grad_sink(a)) add_into(*ga, g.data());
    if (Tensor* gb = t.grad_sink(b)) {
      auto d = gb->data();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] -= g[i];
    }
  }, "sub");
}

Var scale(Var x, double factor) {
  Tape& tape = tape_of(x);
  Tensor out = x.value();
  for (double& v : out.data()) v *= factor;
  return tape.record(std::move(out), x.requires_grad(), [x, factor](Tape& t, const Tensor& g) {
    if (Tensor* gx = t.grad_sink(x)) {
      auto d = gx->data();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += factor * g[i];
    }
  }, "scale");
}

Var sum(Var x) {
  Tape& tape = tape_of(x);
  double acc = 0.0;
  for (double v : x.value().data()) acc += v;
  return tape.record(Tensor::scalar(acc), x.requires_grad(), [x](Tape& t, const Tensor& g) {
    if (Tensor* gx = t.grad_sink(x)) {
      for (double& v : gx->data()) v += g[0];
    }
  }, "sum");
}

Var add_n(std::span<const Var> xs) {
  if (xs.empty()) shape_error("add_n", "no inputs");
  Tape& tape = tape_of(xs[0]);
  Tensor out = xs[0].value();
  bool rg = xs[0].requires_grad();
  for (std::size_t i = 1; i < xs.size(); ++i) {
    require_same_shape(out, xs[i].value(), "add_n");
    add_into(out, xs[i].value().data());
    rg = rg || xs[i].requires_grad();
  }
  std::vector<Var> inputs(xs.begin(), xs.end());
  return tape.record(std::move(out), rg, [inputs](Tape& t, const Tensor& g) {
    for (const Var& v : inputs) {
      if (Tensor* gv = t.grad_sink(v)) add_into(*gv, g.data());
    }
  }, "add_n");
}

Var reshape(Var x, Shape shape) {
  Tape& tape = tape_of(x);
  Tensor out = x.value().reshaped(std::move(shape));
  return tape.record(std::move(out), x.requires_grad(), [x](Tape& t, const Tensor& g) {
    if (Tensor* gx = t.grad_sink(x)) add_into(*gx, g.data());
  }, "reshape");
}

Var softmax_nll(Var scores, std::size_t target) {
  Tape& tape = tape_of(scores);
  const Tensor& s = scores.value();
  if (s.numel() == 0) shape_error("softmax_nll", "empty score vector");
  if (target >= s.numel()) shape_error("softmax_nll", "target index out of range");
  const double max = *std::max_element(s.data().begin(), s.data().end());
  double z = 0.0;
  for (double v : s.data()) z += std::exp(v - max);
  const double lse = max + std::log(z);
  return tape.record(Tensor::scalar(lse - s[target]), scores.requires_grad(),
                     [scores, target, lse](Tape& t, const Tensor& g) {
                       if (Tensor* gs = t.grad_sink(scores)) {
                         const Tensor& s = scores.value();
                         for (std::size_t i = 0; i < s.numel(); ++i) {
                           const double p = std::exp(s[i] - lse);
                           (*gs)[i] += g[0] * (p - (i == target ? 1.0 : 0.0));
                         }
                       }
                     }, "softmax_nll");
}

Var gather_rows(Var m, std::span<const std::size_t> rows) {
  Tape& tape = tape_of(m);
  require_matrix(m.value(), "gather_rows");
  const std::size_t k = m.value().cols();
  Tensor out(Shape{rows.size(), k});
  for (std::size_t j = 0; j < rows.size(); ++j) {
    if (rows[j] >= m.value().rows()) shape_error("gather_rows", "row index out of range");
    std::copy_n(m.value().row(rows[j]).begin(), k, out.row(j).begin());
  }
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  return tape.record(std::move(out), m.requires_grad(), [m, idx = std::move(idx)](Tape& t, const Tensor& g) {
    if (Tensor* gm = t.grad_sink(m)) {
      for (std::size_t j = 0; j < idx.size(); ++j) {
        auto dst = gm->row(idx[j]);
        auto src = g.row(j);
        for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += src[c];
      }
    }
  }, "gather_rows");
}

Var row(Var m, std::size_t r) {
  const std::size_t idx[] = {r};
  Var g = gather_rows(m, idx);
  return reshape(g, Shape{m.value().cols()});
}

Var broadcast_rows(Var v, std::size_t n) {
  Tape& tape = tape_of(v);
  const std::size_t k = v.value().numel();
  Tensor out(Shape{n, k});
  for (std::size_t r = 0; r < n; ++r) std::copy_n(v.value().data().begin(), k, out.row(r).begin());
  return tape.record(std::move(out), v.requires_grad(), [v](Tape& t, const Tensor& g) {
    if (Tensor* gv = t.grad_sink(v)) {
      for (std::size_t r = 0; r < g.rows(); ++r) add_into(*gv, g.row(r));
    }
  }, "broadcast_rows");
}

Var add_row_broadcast(Var m, Var v) {
  Tape& tape = tape_of(m);
  require_matrix(m.value(), "add_row_broadcast");
  if (v.value().numel() != m.value().cols()) {
    shape_error("add_row_broadcast", shape_string(m.shape()) + " vs " + shape_string(v.shape()));
  }
  Tensor out = m.value();
  for (std::size_t r = 0; r < out.rows(); ++r) {
    auto dst = out.row(r);
    for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += v.value()[c];
  }
  return tape.record(std::move(out), m.requires_grad() || v.requires_grad(), [m, v](Tape& t, const Tensor& g) {
    if (Tensor* gm = t.grad_sink(m)) add_into(*gm, g.data());
    if (Tensor* gv = t.grad_sink(v)) {
      for (std::size_t r = 0; r < g.rows(); ++r) add_into(*gv, g.row(r));
    }
  }, "add_row_broadcast");
}

Var segment_softmax(Var scores, std::span<const std::size_t> segment, std::size_t n_segments) {
  Tape& tape = tape_of(scores);
  const Tensor& s = scores.value();
  require_vector(s, "segment_softmax");
  require_segments(segment, s.numel(), n_segments, "segment_softmax");
  std::vector<double> max(n_segments, -std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < s.numel(); ++i) max[segment[i]] = std::max(max[segment[i]], s[i]);
  std::vector<double> z(n_segments, 0.0);
  Tensor out(s.shape());
  for (std::size_t i = 0; i < s.numel(); ++i) {
    out[i] = std::exp(s[i] - max[segment[i]]);
    z[segment[i]] += out[i];
  }
  for (std::size_t i = 0; i < s.numel(); ++i) out[i] /= z[segment[i]];
  std::vector<std::size_t> seg(segment.begin(), segment.end());
  const std::size_t self = tape.size();
  return tape.record(std::move(out), scores.requires_grad(),
                     [scores, seg = std::move(seg), n_segments, self](Tape& t, const Tensor& g) {
                       Tensor* gs = t.grad_sink(scores);
                       if (gs == nullptr) return;
                       const Tensor& alpha = t.value(self);
                       std::vector<double> inner(n_segments, 0.0);
                       for (std::size_t i = 0; i < seg.size(); ++i) inner[seg[i]] += alpha[i] * g[i];
                       for (std::size_t i = 0; i < seg.size(); ++i) (*gs)[i] += alpha[i] * (g[i] - inner[seg[i]]);
                     }, "segment_softmax");
}

Var segment_normalize(Var scores, std::span<const std::size_t> segment, std::size_t n_segments) {
  Tape& tape = tape_of(scores);
  const Tensor& s = scores.value();
  require_vector(s, "segment_normalize");
  require_segments(segment, s.numel(), n_segments, "segment_normalize");
  std::vector<double> total(n_segments, 0.0);
  for (std::size_t i = 0; i < s.numel(); ++i) total[segment[i]] += s[i];
  Tensor out(s.shape());
  for (std::size_t i = 0; i < s.numel(); ++i) out[i] = s[i] / total[segment[i]];
  std::vector<std::size_t> seg(segment.begin(), segment.end());
  return tape.record(std::move(out), scores.requires_grad(),
                     [scores, seg = std::move(seg), total](Tape& t, const Tensor& g) {
                       Tensor* gs = t.grad_sink(scores);
                       if (gs == nullptr) return;
                       const Tensor& s = scores.value();
                       std::vector<double> inner(total.size(), 0.0);
                       for (std::size_t i = 0; i < seg.size(); ++i) inner[seg[i]] += g[i] * s[i];
                       for (std::size_t i = 0; i < seg.size(); ++i) {
                         const double z = total[seg[i]];
                         (*gs)[i] += g[i] / z - inner[seg[i]] / (z * z);
                       }
                     }, "segment_normalize");
}

Var segment_weighted_sum(Var m, Var weights, std::span<const std::size_t> segment, std::size_t n_segments) {
  Tape& tape = tape_of(m);
  require_matrix(m.value(), "segment_weighted_sum");
  const std::size_t n = m.value().rows();
  const std::size_t k = m.value().cols();
  if (weights.value().numel() != n) shape_error("segment_weighted_sum", "one weight per row required");
  require_segments(segment, n, n_segments, "segment_weighted_sum");
  Tensor out(Shape{n_segments, k});
  for (std::size_t i = 0; i < n; ++i) {
    auto dst = out.row(segment[i]);
    auto src = m.value().row(i);
    const double w = weights.value()[i];
    for (std::size_t c = 0; c < k; ++c) dst[c] += w * src[c];
  }
  std::vector<std::size_t> seg(segment.begin(), segment.end());
  return tape.record(std::move(out), m.requires_grad() || weights.requires_grad(),
                     [m, weights, seg = std::move(seg)](Tape& t, const Tensor& g) {
                       Tensor* gm = t.grad_sink(m);
                       Tensor* gw = t.grad_sink(weights);
                       for (std::size_t i = 0; i < seg.size(); ++i) {
                         auto go = g.row(seg[i]);
                         if (gm != nullptr) {
                           auto dst = gm->row(i);
                           const double w = weights.value()[i];
                           for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += w * go[c];
                         }
                         if (gw != nullptr) {
                           auto src = m.value().row(i);
                           double acc = 0.0;
                           for (std::size_t c = 0; c < src.size(); ++c) acc += src[c] * go[c];
                           (*gw)[i] += acc;
                         }
                       }
                     }, "segment_weighted_sum");
}

Var scatter_add_rows(Var base, std::span<const std::size_t> rows, Var updates) {
  Tape& tape = tape_of(base);
  require_matrix(base.value(), "scatter_add_rows");
  require_matrix(updates.value(), "scatter_add_rows");
  if (updates.value().rows() != rows.size() || updates.value().cols() != base.value().cols()) {
    shape_error("scatter_add_rows", shape_string(updates.shape()) + " vs base " + shape_string(base.shape()));
  }
  Tensor out = base.value();
  for (std::size_t j = 0; j < rows.size(); ++j) {
    if (rows[j] >= out.rows()) shape_error("scatter_add_rows", "row index out of range");
    auto dst = out.row(rows[j]);
    auto src = updates.value().row(j);
    for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += src[c];
  }
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  return tape.record(std::move(out), base.requires_grad() || updates.requires_grad(),
                     [base, updates, idx = std::move(idx)](Tape& t, const Tensor& g) {
                       if (Tensor* gb = t.grad_sink(base)) add_into(*gb, g.data());
                       if (Tensor* gu = t.grad_sink(updates)) {
                         for (std::size_t j = 0; j < idx.size(); ++j) {
                           auto dst = gu->row(j);
                           auto src = g.row(idx[j]);
                           for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += src[c];
                         }
                       }
                     }, "scatter_add_rows");
}

Var replace_rows(Var base, std::span<const std::size_t> base_rows, Var src, std::span<const std::size_t> src_rows) {
  Tape& tape = tape_of(base);
  require_matrix(base.value(), "replace_rows");
  require_matrix(src.value(), "replace_rows");
  if (base_rows.size() != src_rows.size()) shape_error("replace_rows", "row index lists differ in length");
  if (base.value().cols() != src.value().cols()) shape_error("replace_rows", "column count mismatch");
  Tensor out = base.value();
  std::vector<char> replaced(out.rows(), 0);
  for (std::size_t j = 0; j < base_rows.size(); ++j) {
    if (base_rows[j] >= out.rows() || src_rows[j] >= src.value().rows()) {
      shape_error("replace_rows", "row index out of range");
    }
    if (replaced[base_rows[j]]) shape_error("replace_rows", "row replaced twice");
    replaced[base_rows[j]] = 1;
    auto s = src.value().row(src_rows[j]);
    std::copy(s.begin(), s.end(), out.row(base_rows[j]).begin());
  }
  std::vector<std::size_t> bi(base_rows.begin(), base_rows.end());
  std::vector<std::size_t> si(src_rows.begin(), src_rows.end());
  return tape.record(std::move(out), base.requires_grad() || src.requires_grad(),
                     [base, src, bi = std::move(bi), si = std::move(si), replaced = std::move(replaced)](
                         Tape& t, const Tensor& g) {
                       if (Tensor* gb = t.grad_sink(base)) {
                         for (std::size_t r = 0; r < g.rows(); ++r) {
                           if (replaced[r]) continue;
                           auto dst = gb->row(r);
                           auto s = g.row(r);
                           for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += s[c];
                         }
                       }
                       if (Tensor* gs = t.grad_sink(src)) {
                         for (std::size_t j = 0; j < bi.size(); ++j) {
                           auto dst = gs->row(si[j]);
                           auto s = g.row(bi[j]);
                           for (std::size_t c = 0; c < dst.size(); ++c) dst[c] += s[c];
                         }
                       }
                     }, "replace_rows");
}

}  // namespace mail::numeric
