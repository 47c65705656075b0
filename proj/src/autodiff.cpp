// Copyright 2026 The Artic Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "artic/autodiff.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace artic {

namespace {

using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                           Eigen::RowMajor>;
using MapM = Eigen::Map<EMat>;
using CMapM = Eigen::Map<const EMat>;

void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

}  // namespace

// ---- Graph ------------------------------------------------------------

int Graph::add_node(std::string op,
                    std::initializer_list<std::shared_ptr<TensorData>> inputs,
                    const std::shared_ptr<TensorData>& output,
                    std::function<void()> backward) {
  return add_node(std::move(op),
                  std::vector<std::shared_ptr<TensorData>>(inputs), output,
                  std::move(backward));
}

int Graph::add_node(std::string op,
                    const std::vector<std::shared_ptr<TensorData>>& inputs,
                    const std::shared_ptr<TensorData>& output,
                    std::function<void()> backward) {
  if (!recording_) {
    throw std::logic_error("graph: add_node on a non-recording graph");
  }
  Node n;
  n.op = std::move(op);
  for (const auto& in : inputs) {
    n.inputs.push_back(in->node_id);
    tracked_.push_back(in);
  }
  n.backward = std::move(backward);
  const int id = static_cast<int>(nodes_.size());
  output->node_id = id;
  tracked_.push_back(output);
  nodes_.push_back(std::move(n));
  return id;
}

void Graph::backward(const Tensor& loss) {
  if (loss.numel() != 1) {
    throw std::invalid_argument("backward: loss must be a scalar, got " +
                                shape_str(loss.shape()));
  }
  // Reset everything this tape touched; repeated backward calls on the same
  // graph then produce bit-identical gradients.
  for (auto& d : tracked_) d->grad.clear();
  loss.shared()->grad.assign(1, 1.0);
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    it->backward();
  }
}

const std::string& Graph::op_name(std::size_t node) const {
  return nodes_.at(node).op;
}

// ---- matmul / transpose -----------------------------------------------

Tensor matmul(Graph& g, const Tensor& a, const Tensor& b) {
  if (a.ndim() != 2 || b.ndim() != 2 || a.dim(1) != b.dim(0)) {
    throw std::invalid_argument("matmul: incompatible shapes " +
                                shape_str(a.shape()) + " and " +
                                shape_str(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<double> out(m * n);
  {
    CMapM A(a.values().data(), m, k);
    CMapM B(b.values().data(), k, n);
    MapM C(out.data(), m, n);
    C.noalias() = A * B;
  }
  const bool track = g.recording() && (a.requires_grad() || b.requires_grad());
  Tensor out_t = Tensor::from({m, n}, std::move(out), track);
  if (track) {
    auto ad = a.shared();
    auto bd = b.shared();
    auto od = out_t.shared();
    Graph* gp = &g;
    g.add_node("matmul", {ad, bd}, od, [ad, bd, od, gp, m, k, n] {
      if (od->grad.empty()) return;
      CMapM dC(od->grad.data(), m, n);
      if (ad->requires_grad) {
        CMapM B(bd->val.data(), k, n);
        MapM dA(grad_buffer(*ad).data(), m, k);
        dA.noalias() += dC * B.transpose();
        if (gp->corrupt_matmul_backward) dA *= 1.0001;
      }
      if (bd->requires_grad) {
        CMapM A(ad->val.data(), m, k);
        MapM dB(grad_buffer(*bd).data(), k, n);
        dB.noalias() += A.transpose() * dC;
      }
    });
  }
  return out_t;
}

Tensor transpose(Graph& g, const Tensor& x) {
  require(x.ndim() == 2,
          "transpose: expects a 2-D tensor, got " + shape_str(x.shape()));
  const std::size_t m = x.dim(0), n = x.dim(1);
  std::vector<double> out(m * n);
  auto xv = x.values();
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = xv[i * n + j];
  }
  const bool track = g.recording() && x.requires_grad();
  Tensor out_t = Tensor::from({n, m}, std::move(out), track);
  if (track) {
    auto xd = x.shared();
    auto od = out_t.shared();
    g.add_node("transpose", {xd}, od, [xd, od, m, n] {
      if (od->grad.empty()) return;
      auto gx = grad_buffer(*xd);
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
          gx[i * n + j] += od->grad[j * m + i];
        }
      }
    });
  }
  return out_t;
}

// ---- elementwise -------------------------------------------------------

namespace {

// Operand addressing: full (same shape as output), scalar, or a vector
// broadcast along the output's last axis.
enum class Bcast { kFull, kScalar, kLastAxis };

struct EwPlan {
  Shape out_shape;
  std::size_t n = 0;
  std::size_t last = 1;
  Bcast a = Bcast::kFull;
  Bcast b = Bcast::kFull;
};

EwPlan plan_binary(const Tensor& a, const Tensor& b) {
  EwPlan p;
  const auto& sa = a.shape();
  const auto& sb = b.shape();
  auto reject = [&] {
    throw std::invalid_argument("ew: shapes " + shape_str(sa) + " and " +
                                shape_str(sb) + " are not broadcastable");
  };
  if (sa == sb) {
    p.out_shape = sa;
    p.a = p.b = Bcast::kFull;
  } else if (b.numel() == 1) {
    p.out_shape = sa;
    p.b = Bcast::kScalar;
  } else if (a.numel() == 1) {
    p.out_shape = sb;
    p.a = Bcast::kScalar;
  } else if (sb.size() == 1 && !sa.empty() && sb[0] == sa.back()) {
    p.out_shape = sa;
    p.b = Bcast::kLastAxis;
  } else if (sa.size() == 1 && !sb.empty() && sa[0] == sb.back()) {
    p.out_shape = sb;
    p.a = Bcast::kLastAxis;
  } else {
    reject();
  }
  p.n = shape_numel(p.out_shape);
  p.last = p.out_shape.empty() ? 1 : p.out_shape.back();
  return p;
}

inline std::size_t bcast_index(Bcast m, std::size_t i, std::size_t last) {
  switch (m) {
    case Bcast::kFull:
      return i;
    case Bcast::kScalar:
      return 0;
    case Bcast::kLastAxis:
      return i % last;
  }
  return i;
}

}  // namespace

Tensor ew(Graph& g, EwKind kind, const Tensor& a, const Tensor& b) {
  require(kind == EwKind::kAdd || kind == EwKind::kSub || kind == EwKind::kMul,
          "ew: binary form supports add/sub/mul only");
  const EwPlan p = plan_binary(a, b);
  auto av = a.values();
  auto bv = b.values();
  std::vector<double> out(p.n);
  for (std::size_t i = 0; i < p.n; ++i) {
    const double x = av[bcast_index(p.a, i, p.last)];
    const double y = bv[bcast_index(p.b, i, p.last)];
    out[i] = kind == EwKind::kAdd ? x + y : kind == EwKind::kSub ? x - y
                                                                 : x * y;
  }
  const bool track = g.recording() && (a.requires_grad() || b.requires_grad());
  Tensor out_t = Tensor::from(p.out_shape, std::move(out), track);
  if (track) {
    auto ad = a.shared();
    auto bd = b.shared();
    auto od = out_t.shared();
    const char* name = kind == EwKind::kAdd   ? "add"
                       : kind == EwKind::kSub ? "sub"
                                              : "mul";
    g.add_node(name, {ad, bd}, od, [ad, bd, od, p, kind] {
      if (od->grad.empty()) return;
      const bool need_a = ad->requires_grad;
      const bool need_b = bd->requires_grad;
      double* ga = need_a ? grad_buffer(*ad).data() : nullptr;
      double* gb = need_b ? grad_buffer(*bd).data() : nullptr;
      for (std::size_t i = 0; i < p.n; ++i) {
        const double dz = od->grad[i];
        const std::size_t ia = bcast_index(p.a, i, p.last);
        const std::size_t ib = bcast_index(p.b, i, p.last);
        switch (kind) {
          case EwKind::kAdd:
            if (need_a) ga[ia] += dz;
            if (need_b) gb[ib] += dz;
            break;
          case EwKind::kSub:
            if (need_a) ga[ia] += dz;
            if (need_b) gb[ib] -= dz;
            break;
          case EwKind::kMul:
            if (need_a) ga[ia] += dz * bd->val[ib];
            if (need_b) gb[ib] += dz * ad->val[ia];
            break;
          default:
            break;
        }
      }
    });
  }
  return out_t;
}

Tensor ew(Graph& g, EwKind kind, const Tensor& a) {
  require(kind == EwKind::kRelu, "ew: unary form supports relu only");
  const std::size_t n = a.numel();
  auto av = a.values();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = av[i] > 0.0 ? av[i] : 0.0;
  const bool track = g.recording() && a.requires_grad();
  Tensor out_t = Tensor::from(a.shape(), std::move(out), track);
  if (track) {
    auto ad = a.shared();
    auto od = out_t.shared();
    g.add_node("relu", {ad}, od, [ad, od, n] {
      if (od->grad.empty()) return;
      auto ga = grad_buffer(*ad);
      for (std::size_t i = 0; i < n; ++i) {
        if (ad->val[i] > 0.0) ga[i] += od->grad[i];
      }
    });
  }
  return out_t;
}

Tensor ew(Graph& g, EwKind kind, const Tensor& a, double c) {
  require(kind == EwKind::kScale, "ew: constant form supports scale only");
  const std::size_t n = a.numel();
  auto av = a.values();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = av[i] * c;
  const bool track = g.recording() && a.requires_grad();
  Tensor out_t = Tensor::from(a.shape(), std::move(out), track);
  if (track) {
    auto ad = a.shared();
    auto od = out_t.shared();
    g.add_node("scale", {ad}, od, [ad, od, n, c] {
      if (od->grad.empty()) return;
      auto ga = grad_buffer(*ad);
      for (std::size_t i = 0; i < n; ++i) ga[i] += c * od->grad[i];
    });
  }
  return out_t;
}

// ---- softmax ------------------------------------------------------------

Tensor softmax(Graph& g, const Tensor& x, std::size_t axis) {
  require(axis < x.ndim(), "softmax: axis " + std::to_string(axis) +
                               " out of range for " + shape_str(x.shape()));
  const auto& shape = x.shape();
  const std::size_t d = shape[axis];
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= shape[i];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) inner *= shape[i];

  auto xv = x.values();
  std::vector<double> out(x.numel());
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * d * inner + in;
      double mx = xv[base];
      for (std::size_t j = 1; j < d; ++j) {
        mx = std::max(mx, xv[base + j * inner]);
      }
      double s = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        const double e = std::exp(xv[base + j * inner] - mx);
        out[base + j * inner] = e;
        s += e;
      }
      const double inv = 1.0 / s;
      for (std::size_t j = 0; j < d; ++j) out[base + j * inner] *= inv;
    }
  }
  const bool track = g.recording() && x.requires_grad();
  Tensor out_t = Tensor::from(shape, std::move(out), track);
  if (track) {
    auto xd = x.shared();
    auto od = out_t.shared();
    g.add_node("softmax", {xd}, od, [xd, od, outer, inner, d] {
      if (od->grad.empty()) return;
      auto gx = grad_buffer(*xd);
      for (std::size_t o = 0; o < outer; ++o) {
        for (std::size_t in = 0; in < inner; ++in) {
          const std::size_t base = o * d * inner + in;
          double dot = 0.0;
          for (std::size_t j = 0; j < d; ++j) {
            const std::size_t idx = base + j * inner;
            dot += od->grad[idx] * od->val[idx];
          }
          for (std::size_t j = 0; j < d; ++j) {
            const std::size_t idx = base + j * inner;
            gx[idx] += od->val[idx] * (od->grad[idx] - dot);
          }
        }
      }
    });
  }
  return out_t;
}

// ---- layer norm -----------------------------------------------------------

Tensor layer_norm(Graph& g, const Tensor& x, const Tensor& gamma,
                  const Tensor& beta, double eps) {
  require(eps > 0.0, "layer_norm: eps must be positive");
  require(x.ndim() == 1 || x.ndim() == 2,
          "layer_norm: expects 1-D or 2-D input, got " + shape_str(x.shape()));
  const std::size_t d = x.shape().back();
  const std::size_t rows = x.numel() / d;
  require(gamma.ndim() == 1 && gamma.dim(0) == d,
          "layer_norm: gamma shape " + shape_str(gamma.shape()) +
              " does not match last axis " + std::to_string(d));
  require(beta.ndim() == 1 && beta.dim(0) == d,
          "layer_norm: beta shape " + shape_str(beta.shape()) +
              " does not match last axis " + std::to_string(d));

  auto xv = x.values();
  auto gv = gamma.values();
  auto bv = beta.values();
  std::vector<double> out(x.numel());
  // Saved for backward: normalized values and per-row inverse stddev.
  auto xhat = std::make_shared<std::vector<double>>(x.numel());
  auto inv_s = std::make_shared<std::vector<double>>(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = xv.data() + r * d;
    double mu = 0.0;
    for (std::size_t j = 0; j < d; ++j) mu += row[j];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double c = row[j] - mu;
      var += c * c;
    }
    var /= static_cast<double>(d);
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_s)[r] = is;
    for (std::size_t j = 0; j < d; ++j) {
      const double xh = (row[j] - mu) * is;
      (*xhat)[r * d + j] = xh;
      out[r * d + j] = gv[j] * xh + bv[j];
    }
  }
  const bool track =
      g.recording() && (x.requires_grad() || gamma.requires_grad() ||
                        beta.requires_grad());
  Tensor out_t = Tensor::from(x.shape(), std::move(out), track);
  if (track) {
    auto xd = x.shared();
    auto gd = gamma.shared();
    auto bd = beta.shared();
    auto od = out_t.shared();
    g.add_node("layer_norm", {xd, gd, bd}, od,
               [xd, gd, bd, od, xhat, inv_s, rows, d] {
      if (od->grad.empty()) return;
      double* gx = xd->requires_grad ? grad_buffer(*xd).data() : nullptr;
      double* gg = gd->requires_grad ? grad_buffer(*gd).data() : nullptr;
      double* gb = bd->requires_grad ? grad_buffer(*bd).data() : nullptr;
      for (std::size_t r = 0; r < rows; ++r) {
        const double* dy = od->grad.data() + r * d;
        const double* xh = xhat->data() + r * d;
        if (gg || gb) {
          for (std::size_t j = 0; j < d; ++j) {
            if (gg) gg[j] += dy[j] * xh[j];
            if (gb) gb[j] += dy[j];
          }
        }
        if (gx) {
          double mean_a = 0.0, mean_axh = 0.0;
          for (std::size_t j = 0; j < d; ++j) {
            const double a = gd->val[j] * dy[j];
            mean_a += a;
            mean_axh += a * xh[j];
          }
          mean_a /= static_cast<double>(d);
          mean_axh /= static_cast<double>(d);
          const double is = (*inv_s)[r];
          for (std::size_t j = 0; j < d; ++j) {
            const double a = gd->val[j] * dy[j];
            gx[r * d + j] += (a - mean_a - xh[j] * mean_axh) * is;
          }
        }
      }
    });
  }
  return out_t;
}

// ---- dropout ----------------------------------------------------------

Tensor dropout(Graph& g, const Tensor& x, double p, bool training, Rng& rng) {
  require(p >= 0.0 && p < 1.0, "dropout: p must lie in [0,1), got " +
                                   std::to_string(p));
  if (!training || p == 0.0) return x;
  const std::size_t n = x.numel();
  const double keep_scale = 1.0 / (1.0 - p);
  auto mask = std::make_shared<std::vector<double>>(n);
  auto xv = x.values();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double m = rng.uniform() >= p ? keep_scale : 0.0;
    (*mask)[i] = m;
    out[i] = xv[i] * m;
  }
  const bool track = g.recording() && x.requires_grad();
  Tensor out_t = Tensor::from(x.shape(), std::move(out), track);
  if (track) {
    auto xd = x.shared();
    auto od = out_t.shared();
    g.add_node("dropout", {xd}, od, [xd, od, mask, n] {
      if (od->grad.empty()) return;
      auto gx = grad_buffer(*xd);
      for (std::size_t i = 0; i < n; ++i) gx[i] += od->grad[i] * (*mask)[i];
    });
  }
  return out_t;
}

// ---- slicing / concatenation -------------------------------------------

Tensor slice_cols(Graph& g, const Tensor& x, std::size_t c0, std::size_t c1) {
  require(x.ndim() == 2, "slice_cols: expects 2-D, got " +
                             shape_str(x.shape()));
  require(c0 < c1 && c1 <= x.dim(1),
          "slice_cols: bad column range [" + std::to_string(c0) + "," +
              std::to_string(c1) + ") for " + shape_str(x.shape()));
  const std::size_t rows = x.dim(0), cols = x.dim(1), w = c1 - c0;
  auto xv = x.values();
  std::vector<double> out(rows * w);
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(xv.data() + r * cols + c0, w, out.data() + r * w);
  }
  const bool track = g.recording() && x.requires_grad();
  Tensor out_t = Tensor::from({rows, w}, std::move(out), track);
  if (track) {
    auto xd = x.shared();
    auto od = out_t.shared();
    g.add_node("slice_cols", {xd}, od, [xd, od, rows, cols, c0, w] {
      if (od->grad.empty()) return;
      auto gx = grad_buffer(*xd);
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t j = 0; j < w; ++j) {
          gx[r * cols + c0 + j] += od->grad[r * w + j];
        }
      }
    });
  }
  return out_t;
}

Tensor concat_cols(Graph& g, const std::vector<Tensor>& parts) {
  require(!parts.empty(), "concat_cols: no tensors given");
  const std::size_t rows = parts[0].dim(0);
  std::size_t cols = 0;
  bool any_grad = false;
  for (const auto& p : parts) {
    require(p.ndim() == 2 && p.dim(0) == rows,
            "concat_cols: row mismatch, " + shape_str(p.shape()) + " vs " +
                std::to_string(rows) + " rows");
    cols += p.dim(1);
    any_grad = any_grad || p.requires_grad();
  }
  std::vector<double> out(rows * cols);
  std::size_t off = 0;
  for (const auto& p : parts) {
    const std::size_t w = p.dim(1);
    auto pv = p.values();
    for (std::size_t r = 0; r < rows; ++r) {
      std::copy_n(pv.data() + r * w, w, out.data() + r * cols + off);
    }
    off += w;
  }
  const bool track = g.recording() && any_grad;
  Tensor out_t = Tensor::from({rows, cols}, std::move(out), track);
  if (track) {
    std::vector<std::shared_ptr<TensorData>> ins;
    ins.reserve(parts.size());
    for (const auto& p : parts) ins.push_back(p.shared());
    auto od = out_t.shared();
    g.add_node("concat_cols", ins, od, [ins, od, rows, cols] {
      if (od->grad.empty()) return;
      std::size_t off = 0;
      for (const auto& in : ins) {
        const std::size_t w = in->shape[1];
        if (in->requires_grad) {
          auto gi = grad_buffer(*in);
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t j = 0; j < w; ++j) {
              gi[r * w + j] += od->grad[r * cols + off + j];
            }
          }
        }
        off += w;
      }
    });
  }
  return out_t;
}

Tensor concat_rows(Graph& g, const std::vector<Tensor>& parts) {
  require(!parts.empty(), "concat_rows: no tensors given");
  const std::size_t cols = parts[0].dim(1);
  std::size_t rows = 0;
  bool any_grad = false;
  for (const auto& p : parts) {
    require(p.ndim() == 2 && p.dim(1) == cols,
            "concat_rows: column mismatch, " + shape_str(p.shape()) + " vs " +
                std::to_string(cols) + " columns");
    rows += p.dim(0);
    any_grad = any_grad || p.requires_grad();
  }
  std::vector<double> out;
  out.reserve(rows * cols);
  for (const auto& p : parts) {
    auto pv = p.values();
    out.insert(out.end(), pv.begin(), pv.end());
  }
  const bool track = g.recording() && any_grad;
  Tensor out_t = Tensor::from({rows, cols}, std::move(out), track);
  if (track) {
    std::vector<std::shared_ptr<TensorData>> ins;
    ins.reserve(parts.size());
    for (const auto& p : parts) ins.push_back(p.shared());
    auto od = out_t.shared();
    g.add_node("concat_rows", ins, od, [ins, od, cols] {
      if (od->grad.empty()) return;
      std::size_t row0 = 0;
      for (const auto& in : ins) {
        const std::size_t r = in->shape[0];
        if (in->requires_grad) {
          auto gi = grad_buffer(*in);
          const double* src = od->grad.data() + row0 * cols;
          for (std::size_t i = 0; i < r * cols; ++i) gi[i] += src[i];
        }
        row0 += r;
      }
    });
  }
  return out_t;
}

Tensor sum(Graph& g, const Tensor& x) {
  double s = 0.0;
  for (double v : x.values()) s += v;
  const bool track = g.recording() && x.requires_grad();
  Tensor out_t = Tensor::from({1}, {s}, track);
  if (track) {
    auto xd = x.shared();
    auto od = out_t.shared();
    g.add_node("sum", {xd}, od, [xd, od] {
      if (od->grad.empty()) return;
      const double dz = od->grad[0];
      auto gx = grad_buffer(*xd);
      for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += dz;
    });
  }
  return out_t;
}

// ---- losses ------------------------------------------------------------

namespace {

// Validates a {0,1} frame mask and returns the number of selected frames.
std::size_t checked_mask_count(const Tensor& mask, std::size_t frames,
                               const char* who) {
  if (mask.ndim() != 1 || mask.dim(0) != frames) {
    throw std::invalid_argument(std::string(who) + ": mask shape " +
                                shape_str(mask.shape()) + " does not match " +
                                std::to_string(frames) + " frames");
  }
  if (mask.requires_grad()) {
    throw std::invalid_argument(std::string(who) +
                                ": mask must not require gradients");
  }
  std::size_t count = 0;
  auto mv = mask.values();
  for (std::size_t i = 0; i < mv.size(); ++i) {
    if (mv[i] == 1.0) {
      ++count;
    } else if (mv[i] != 0.0) {
      throw std::invalid_argument(std::string(who) +
                                  ": mask entries must be exactly 0 or 1");
    }
  }
  return count;
}

}  // namespace

Tensor mse_loss(Graph& g, const Tensor& pred, const Tensor& target,
                const Tensor& mask) {
  if (pred.shape() != target.shape()) {
    throw std::invalid_argument("mse_loss: shape mismatch " +
                                shape_str(pred.shape()) + " vs " +
                                shape_str(target.shape()));
  }
  const std::size_t frames = pred.ndim() == 0 ? 1 : pred.dim(0);
  const std::size_t width = pred.numel() / frames;
  const std::size_t selected = checked_mask_count(mask, frames, "mse_loss");
  if (selected == 0) {
    throw std::invalid_argument(
        "mse_loss: mask selects no frames (mean undefined)");
  }
  const double inv_n = 1.0 / static_cast<double>(selected * width);
  auto pv = pred.values();
  auto tv = target.values();
  auto mv = mask.values();
  double loss = 0.0;
  for (std::size_t f = 0; f < frames; ++f) {
    if (mv[f] == 0.0) continue;
    for (std::size_t j = 0; j < width; ++j) {
      const double dlt = pv[f * width + j] - tv[f * width + j];
      loss += dlt * dlt;
    }
  }
  loss *= inv_n;
  const bool track =
      g.recording() && (pred.requires_grad() || target.requires_grad());
  Tensor out_t = Tensor::from({1}, {loss}, track);
  if (track) {
    auto pd = pred.shared();
    auto td = target.shared();
    auto md = mask.shared();
    auto od = out_t.shared();
    g.add_node("mse_loss", {pd, td}, od,
               [pd, td, md, od, frames, width, inv_n] {
      if (od->grad.empty()) return;
      const double up = od->grad[0];
      double* gp = pd->requires_grad ? grad_buffer(*pd).data() : nullptr;
      double* gt = td->requires_grad ? grad_buffer(*td).data() : nullptr;
      for (std::size_t f = 0; f < frames; ++f) {
        if (md->val[f] == 0.0) continue;
        for (std::size_t j = 0; j < width; ++j) {
          const std::size_t idx = f * width + j;
          const double d = 2.0 * (pd->val[idx] - td->val[idx]) * inv_n * up;
          if (gp) gp[idx] += d;
          if (gt) gt[idx] -= d;
        }
      }
    });
  }
  return out_t;
}

Tensor cross_entropy_loss(Graph& g, const Tensor& logits,
                          const std::vector<int>& labels, const Tensor& mask) {
  require(logits.ndim() == 2, "cross_entropy_loss: logits must be 2-D, got " +
                                  shape_str(logits.shape()));
  const std::size_t frames = logits.dim(0), k = logits.dim(1);
  require(labels.size() == frames,
          "cross_entropy_loss: " + std::to_string(labels.size()) +
              " labels for " + std::to_string(frames) + " frames");
  for (std::size_t f = 0; f < frames; ++f) {
    if (labels[f] < 0 || static_cast<std::size_t>(labels[f]) >= k) {
      throw std::invalid_argument(
          "cross_entropy_loss: label " + std::to_string(labels[f]) +
          " out of range [0," + std::to_string(k) + ") at frame " +
          std::to_string(f));
    }
  }
  const std::size_t selected =
      checked_mask_count(mask, frames, "cross_entropy_loss");
  if (selected == 0) {
    throw std::invalid_argument(
        "cross_entropy_loss: mask selects no frames (mean undefined)");
  }
  const double inv_n = 1.0 / static_cast<double>(selected);
  auto zv = logits.values();
  auto mv = mask.values();
  // Probabilities are saved for the backward pass (zero rows where masked).
  auto probs = std::make_shared<std::vector<double>>(frames * k, 0.0);
  double loss = 0.0;
  for (std::size_t f = 0; f < frames; ++f) {
    if (mv[f] == 0.0) continue;
    const double* row = zv.data() + f * k;
    double mx = row[0];
    for (std::size_t j = 1; j < k; ++j) mx = std::max(mx, row[j]);
    double s = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      const double e = std::exp(row[j] - mx);
      (*probs)[f * k + j] = e;
      s += e;
    }
    const double inv_s = 1.0 / s;
    for (std::size_t j = 0; j < k; ++j) (*probs)[f * k + j] *= inv_s;
    const double lse = mx + std::log(s);
    loss += lse - row[labels[f]];
  }
  loss *= inv_n;
  const bool track = g.recording() && logits.requires_grad();
  Tensor out_t = Tensor::from({1}, {loss}, track);
  if (track) {
    auto zd = logits.shared();
    auto md = mask.shared();
    auto od = out_t.shared();
    auto labels_copy = std::make_shared<std::vector<int>>(labels);
    g.add_node("cross_entropy_loss", {zd}, od,
               [zd, md, od, probs, labels_copy, frames, k, inv_n] {
      if (od->grad.empty()) return;
      const double up = od->grad[0];
      auto gz = grad_buffer(*zd);
      for (std::size_t f = 0; f < frames; ++f) {
        if (md->val[f] == 0.0) continue;
        const int y = (*labels_copy)[f];
        for (std::size_t j = 0; j < k; ++j) {
          const double onehot = j == static_cast<std::size_t>(y) ? 1.0 : 0.0;
          gz[f * k + j] += up * ((*probs)[f * k + j] - onehot) * inv_n;
        }
      }
    });
  }
  return out_t;
}

// ---- gradient checking ---------------------------------------------------

double grad_check(const std::function<Tensor(Graph&)>& f,
                  const std::vector<Tensor>& params, double eps,
                  GradCheckDetail* detail,
                  const std::vector<std::string>* param_names) {
  require(eps > 0.0, "grad_check: eps must be positive");
  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  {
    Graph g;
    Tensor loss = f(g);
    g.backward(loss);
    for (const auto& p : params) {
      if (p.has_grad()) {
        auto gr = p.grad();
        analytic.emplace_back(gr.begin(), gr.end());
      } else {
        analytic.emplace_back(p.numel(), 0.0);
      }
    }
  }
  auto eval = [&f]() {
    Graph g(false);
    return f(g).item();
  };
  double max_rel = 0.0;
  GradCheckEntry worst;
  std::size_t checked = 0;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Tensor p = params[pi];
    auto vals = p.values_mut();
    for (std::size_t ci = 0; ci < vals.size(); ++ci) {
      const double orig = vals[ci];
      vals[ci] = orig + eps;
      const double fp = eval();
      vals[ci] = orig - eps;
      const double fm = eval();
      vals[ci] = orig;
      const double numeric = (fp - fm) / (2.0 * eps);
      const double ana = analytic[pi][ci];
      const double rel = std::abs(ana - numeric) /
                         std::max(1e-8, std::abs(ana) + std::abs(numeric));
      ++checked;
      if (rel > max_rel) {
        max_rel = rel;
        worst.param = param_names && pi < param_names->size()
                          ? (*param_names)[pi]
                          : "param" + std::to_string(pi);
        worst.coord = ci;
        worst.analytic = ana;
        worst.numeric = numeric;
        worst.rel_err = rel;
      }
    }
  }
  if (detail) {
    detail->worst = worst;
    detail->coords_checked = checked;
  }
  return max_rel;
}

}  // namespace artic
