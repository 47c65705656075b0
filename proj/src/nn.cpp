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

#include "artic/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace artic {

namespace {
// Large negative constant standing in for -inf in attention logits; keeps
// every stored value finite while still zeroing masked softmax entries.
constexpr double kMaskedLogit = -1e30;
constexpr double kDegenerateSpread = 1e-12;
}  // namespace

// ---- ParamRegistry --------------------------------------------------------

void ParamRegistry::add(const std::string& name, const Tensor& t) {
  if (!t.defined()) {
    throw std::invalid_argument("params: undefined tensor for '" + name + "'");
  }
  for (const auto& [n, existing] : items_) {
    if (n == name) {
      throw std::invalid_argument("params: duplicate name '" + name + "'");
    }
    if (existing.raw() == t.raw()) {
      throw std::invalid_argument("params: tensor registered twice, as '" + n +
                                  "' and '" + name + "'");
    }
  }
  items_.emplace_back(name, t);
}

std::size_t ParamRegistry::total_coords() const {
  std::size_t n = 0;
  for (const auto& [name, t] : items_) n += t.numel();
  return n;
}

void ParamRegistry::zero_grad() {
  for (auto& [name, t] : items_) t.zero_grad();
}

// ---- DenseLayer -------------------------------------------------------

void DenseLayer::init(std::size_t in, std::size_t out, Rng& rng,
                      bool with_bias) {
  const double bound = std::sqrt(1.0 / static_cast<double>(in));
  std::vector<double> w(in * out);
  for (auto& v : w) v = rng.uniform(-bound, bound);
  weight = Tensor::from({in, out}, std::move(w), true);
  if (with_bias) {
    std::vector<double> b(out);
    for (auto& v : b) v = rng.uniform(-bound, bound);
    bias = Tensor::from({out}, std::move(b), true);
  } else {
    bias = Tensor();
  }
}

Tensor DenseLayer::forward(Graph& g, const Tensor& x) const {
  Tensor y = matmul(g, x, weight);
  return bias.defined() ? add(g, y, bias) : y;
}

void DenseLayer::collect(const std::string& prefix, ParamRegistry& reg) const {
  reg.add(prefix + ".weight", weight);
  if (bias.defined()) reg.add(prefix + ".bias", bias);
}

// ---- positions ---------------------------------------------------------

std::vector<double> sinusoidal_positions(std::size_t len,
                                         std::size_t d_model) {
  std::vector<double> table(len * d_model);
  for (std::size_t t = 0; t < len; ++t) {
    for (std::size_t i = 0; i < d_model; i += 2) {
      const double rate =
          std::pow(10000.0, -static_cast<double>(i) /
                                static_cast<double>(d_model));
      const double angle = static_cast<double>(t) * rate;
      table[t * d_model + i] = std::sin(angle);
      if (i + 1 < d_model) table[t * d_model + i + 1] = std::cos(angle);
    }
  }
  return table;
}

// ---- TransformerEncoder ---------------------------------------------------

void TransformerEncoder::init(std::size_t input_dim, const EncoderConfig& cfg,
                              Rng& rng) {
  if (cfg.d_model % cfg.heads != 0) {
    throw std::invalid_argument(
        "encoder: d_model " + std::to_string(cfg.d_model) +
        " not divisible by heads " + std::to_string(cfg.heads));
  }
  cfg_ = cfg;
  input_dim_ = input_dim;
  input_proj_.init(input_dim, cfg.d_model, rng);
  blocks_.clear();
  blocks_.resize(cfg.layers);
  for (auto& b : blocks_) {
    b.wq.init(cfg.d_model, cfg.d_model, rng);
    // A key bias shifts every logit in a softmax row by the same amount, so
    // it is a no-op parameter; leave it out.
    b.wk.init(cfg.d_model, cfg.d_model, rng, /*with_bias=*/false);
    b.wv.init(cfg.d_model, cfg.d_model, rng);
    b.wo.init(cfg.d_model, cfg.d_model, rng);
    b.ff1.init(cfg.d_model, cfg.d_ff, rng);
    b.ff2.init(cfg.d_ff, cfg.d_model, rng);
    b.ln1_gamma = Tensor::full({cfg.d_model}, 1.0, true);
    b.ln1_beta = Tensor::zeros({cfg.d_model}, true);
    b.ln2_gamma = Tensor::full({cfg.d_model}, 1.0, true);
    b.ln2_beta = Tensor::zeros({cfg.d_model}, true);
  }
  pos_table_ = sinusoidal_positions(cfg.max_len, cfg.d_model);
}

Tensor TransformerEncoder::attention(Graph& g, const Block& blk,
                                     const Tensor& x,
                                     const Tensor& key_mask) const {
  const std::size_t dk = cfg_.d_model / cfg_.heads;
  const double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(dk));

  Tensor q = blk.wq.forward(g, x);
  Tensor k = blk.wk.forward(g, x);
  Tensor v = blk.wv.forward(g, x);

  std::vector<Tensor> heads;
  heads.reserve(cfg_.heads);
  for (std::size_t h = 0; h < cfg_.heads; ++h) {
    const std::size_t c0 = h * dk, c1 = (h + 1) * dk;
    Tensor qh = slice_cols(g, q, c0, c1);
    Tensor kh = slice_cols(g, k, c0, c1);
    Tensor vh = slice_cols(g, v, c0, c1);
    Tensor logits = scale(g, matmul(g, qh, transpose(g, kh)), inv_sqrt_dk);
    logits = add(g, logits, key_mask);
    Tensor attn = softmax(g, logits, 1);
    heads.push_back(matmul(g, attn, vh));
  }
  Tensor merged = cfg_.heads == 1 ? heads[0] : concat_cols(g, heads);
  return blk.wo.forward(g, merged);
}

Tensor TransformerEncoder::forward(Graph& g, const Tensor& x,
                                   std::span<const std::uint8_t> mask) const {
  if (x.ndim() != 2 || x.dim(1) != input_dim_) {
    throw std::invalid_argument("encoder: input shape " +
                                shape_str(x.shape()) + " does not match " +
                                std::to_string(input_dim_) + " features");
  }
  const std::size_t frames = x.dim(0);
  if (mask.size() != frames) {
    throw std::invalid_argument(
        "encoder: mask length " + std::to_string(mask.size()) +
        " does not match " + std::to_string(frames) + " frames");
  }
  if (frames > cfg_.max_len) {
    throw std::invalid_argument(
        "encoder: " + std::to_string(frames) +
        " frames exceed positional table of length " +
        std::to_string(cfg_.max_len));
  }

  // Additive key mask: column j is forced to kMaskedLogit for padded frames,
  // so padded keys vanish from every softmax row.
  std::vector<double> km(frames * frames, 0.0);
  for (std::size_t j = 0; j < frames; ++j) {
    if (!mask[j]) {
      for (std::size_t i = 0; i < frames; ++i) {
        km[i * frames + j] = kMaskedLogit;
      }
    }
  }
  Tensor key_mask = Tensor::from({frames, frames}, std::move(km));

  std::vector<double> pos(pos_table_.begin(),
                          pos_table_.begin() + frames * cfg_.d_model);
  Tensor positions = Tensor::from({frames, cfg_.d_model}, std::move(pos));

  // Projected content is scaled by sqrt(d_model) so the unit-amplitude
  // positions do not swamp it.
  Tensor h = add(g,
                 scale(g, input_proj_.forward(g, x),
                       std::sqrt(static_cast<double>(cfg_.d_model))),
                 positions);
  for (const auto& blk : blocks_) {
    Tensor attn = attention(g, blk, h, key_mask);
    h = layer_norm(g, add(g, h, attn), blk.ln1_gamma, blk.ln1_beta, 1e-5);
    Tensor ff = blk.ff2.forward(g, relu(g, blk.ff1.forward(g, h)));
    h = layer_norm(g, add(g, h, ff), blk.ln2_gamma, blk.ln2_beta, 1e-5);
  }
  return h;
}

void TransformerEncoder::collect(const std::string& prefix,
                                 ParamRegistry& reg) const {
  input_proj_.collect(prefix + ".input_proj", reg);
  for (std::size_t i = 0; i < blocks_.size(); ++i) {
    const std::string base = prefix + ".block" + std::to_string(i);
    const auto& b = blocks_[i];
    b.wq.collect(base + ".wq", reg);
    b.wk.collect(base + ".wk", reg);
    b.wv.collect(base + ".wv", reg);
    b.wo.collect(base + ".wo", reg);
    b.ff1.collect(base + ".ff1", reg);
    b.ff2.collect(base + ".ff2", reg);
    reg.add(base + ".ln1.gamma", b.ln1_gamma);
    reg.add(base + ".ln1.beta", b.ln1_beta);
    reg.add(base + ".ln2.gamma", b.ln2_gamma);
    reg.add(base + ".ln2.beta", b.ln2_beta);
  }
}

// ---- min-max normalization -----------------------------------------------

namespace {

// Normalizes `count` slices of `len` strided elements. Returns per-slice
// degeneracy flags; writes argmin/argmax (first occurrence) for backward.
struct MinMaxForward {
  std::vector<double> out;
  std::vector<std::uint8_t> degenerate;
  std::vector<std::size_t> arg_min, arg_max;
  std::vector<double> inv_spread;
};

MinMaxForward min_max_forward(std::span<const double> x, std::size_t count,
                              std::size_t len, std::size_t outer_stride,
                              std::size_t inner_stride) {
  MinMaxForward r;
  r.out.assign(x.size(), 0.0);
  r.degenerate.assign(count, 0);
  r.arg_min.assign(count, 0);
  r.arg_max.assign(count, 0);
  r.inv_spread.assign(count, 0.0);
  for (std::size_t s = 0; s < count; ++s) {
    const std::size_t base = s * outer_stride;
    std::size_t imin = 0, imax = 0;
    double mn = x[base], mx = x[base];
    for (std::size_t j = 1; j < len; ++j) {
      const double v = x[base + j * inner_stride];
      if (v < mn) {
        mn = v;
        imin = j;
      }
      if (v > mx) {
        mx = v;
        imax = j;
      }
    }
    const double spread = mx - mn;
    if (spread <= kDegenerateSpread) {
      r.degenerate[s] = 1;
      for (std::size_t j = 0; j < len; ++j) {
        r.out[base + j * inner_stride] = 0.5;
      }
      continue;
    }
    r.arg_min[s] = imin;
    r.arg_max[s] = imax;
    r.inv_spread[s] = 1.0 / spread;
    // True division keeps the extremes exact: min -> 0 and max -> 1.
    for (std::size_t j = 0; j < len; ++j) {
      r.out[base + j * inner_stride] =
          (x[base + j * inner_stride] - mn) / spread;
    }
  }
  return r;
}

}  // namespace

NormalizedWeights min_max_normalize(Graph& g, const Tensor& raw,
                                    MinMaxAxis axis) {
  if (raw.ndim() != 2) {
    throw std::invalid_argument("min_max_normalize: expects 2-D, got " +
                                shape_str(raw.shape()));
  }
  const std::size_t frames = raw.dim(0), channels = raw.dim(1);
  const bool per_frame = axis == MinMaxAxis::kPerFrame;
  const std::size_t count = per_frame ? frames : channels;
  const std::size_t len = per_frame ? channels : frames;
  const std::size_t outer_stride = per_frame ? channels : 1;
  const std::size_t inner_stride = per_frame ? 1 : channels;

  auto fwd = std::make_shared<MinMaxForward>(min_max_forward(
      raw.values(), count, len, outer_stride, inner_stride));

  NormalizedWeights result;
  result.degenerate = fwd->degenerate;
  for (auto f : fwd->degenerate) result.degenerate_count += f;
  if (!per_frame) result.degenerate.clear();  // flags are per channel here

  const bool track = g.recording() && raw.requires_grad();
  Tensor out_t = Tensor::from(raw.shape(), std::move(fwd->out), track);
  if (track) {
    auto rd = raw.shared();
    auto od = out_t.shared();
    g.add_node("min_max_normalize", {rd}, od,
               [rd, od, fwd, count, len, outer_stride, inner_stride] {
      if (od->grad.empty()) return;
      auto gx = grad_buffer(*rd);
      for (std::size_t s = 0; s < count; ++s) {
        if (fwd->degenerate[s]) continue;  // flat slice: zero gradient
        const std::size_t base = s * outer_stride;
        const std::size_t imin = fwd->arg_min[s];
        const std::size_t imax = fwd->arg_max[s];
        const double inv = fwd->inv_spread[s];
        // dL/dx_k = g_k/r for interior k; the argmax entry absorbs
        // -sum(g.w)/r and the argmin entry absorbs (sum(g.w)-sum(g))/r,
        // which is the exact quotient-rule gradient with min/max routed to
        // their (first) achieving channels.
        double sum_g = 0.0, sum_gw = 0.0;
        for (std::size_t j = 0; j < len; ++j) {
          const std::size_t idx = base + j * inner_stride;
          sum_g += od->grad[idx];
          sum_gw += od->grad[idx] * od->val[idx];
        }
        for (std::size_t j = 0; j < len; ++j) {
          const std::size_t idx = base + j * inner_stride;
          double d = od->grad[idx];
          if (j == imax) d -= sum_gw;
          if (j == imin) d += sum_gw - sum_g;
          gx[idx] += d * inv;
        }
      }
    });
  }
  result.weights = out_t;
  return result;
}

// ---- straight-through substitution -----------------------------------------

Tensor ste_replace(Graph& g, const Tensor& pred, const Tensor& ground_truth) {
  if (pred.shape() != ground_truth.shape()) {
    throw std::invalid_argument("ste_replace: shape mismatch " +
                                shape_str(pred.shape()) + " vs " +
                                shape_str(ground_truth.shape()));
  }
  auto gv = ground_truth.values();
  const bool track = g.recording() && pred.requires_grad();
  Tensor out_t =
      Tensor::from(pred.shape(), std::vector<double>(gv.begin(), gv.end()),
                   track);
  if (track) {
    auto pd = pred.shared();
    auto od = out_t.shared();
    g.add_node("ste_replace", {pd}, od, [pd, od] {
      if (od->grad.empty()) return;
      auto gp = grad_buffer(*pd);
      for (std::size_t i = 0; i < gp.size(); ++i) gp[i] += od->grad[i];
    });
  }
  return out_t;
}

}  // namespace artic
