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

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "artic/autodiff.hpp"
#include "artic/rng.hpp"
#include "artic/tensor.hpp"

namespace artic {

// Named parameter collection. Rejects duplicate names and duplicate storage
// so no tensor can be registered (and hence updated) twice.
class ParamRegistry {
 public:
  void add(const std::string& name, const Tensor& t);
  const std::vector<std::pair<std::string, Tensor>>& items() const {
    return items_;
  }
  std::size_t size() const { return items_.size(); }
  std::size_t total_coords() const;
  void zero_grad();

 private:
  std::vector<std::pair<std::string, Tensor>> items_;
};

// y = x W + b with W [in x out], b [out]. Weights and biases start at
// uniform(-sqrt(1/in), +sqrt(1/in)). The bias is optional; a key projection
// inside softmax attention, for instance, is invariant to one.
struct DenseLayer {
  Tensor weight;
  Tensor bias;

  void init(std::size_t in, std::size_t out, Rng& rng, bool with_bias = true);
  Tensor forward(Graph& g, const Tensor& x) const;
  void collect(const std::string& prefix, ParamRegistry& reg) const;
  std::size_t in_dim() const { return weight.dim(0); }
  std::size_t out_dim() const { return weight.dim(1); }
};

struct EncoderConfig {
  std::size_t layers = 2;
  std::size_t heads = 2;
  std::size_t d_model = 64;
  std::size_t d_ff = 128;
  std::size_t max_len = 512;
};

// Post-norm transformer encoder over one utterance: input projection plus
// sinusoidal positions, then L blocks of self-attention -> add&norm ->
// feed-forward -> add&norm. Padded positions are excluded from attention by
// additive masking of their key logits.
class TransformerEncoder {
 public:
  TransformerEncoder() = default;
  void init(std::size_t input_dim, const EncoderConfig& cfg, Rng& rng);

  // x is [frames x input_dim]; mask holds one {0,1} byte per frame.
  Tensor forward(Graph& g, const Tensor& x,
                 std::span<const std::uint8_t> mask) const;

  void collect(const std::string& prefix, ParamRegistry& reg) const;
  const EncoderConfig& config() const { return cfg_; }
  std::size_t input_dim() const { return input_dim_; }

 private:
  struct Block {
    DenseLayer wq, wk, wv, wo;
    DenseLayer ff1, ff2;
    Tensor ln1_gamma, ln1_beta;
    Tensor ln2_gamma, ln2_beta;
  };

  Tensor attention(Graph& g, const Block& blk, const Tensor& x,
                   const Tensor& key_mask) const;

  EncoderConfig cfg_;
  std::size_t input_dim_ = 0;
  DenseLayer input_proj_;
  std::vector<Block> blocks_;
  std::vector<double> pos_table_;  // max_len x d_model
};

// Axis choice for min-max normalization: per frame across the 12 channels
// (default), or per channel across the utterance's frames.
enum class MinMaxAxis { kPerFrame, kPerChannel };

struct NormalizedWeights {
  Tensor weights;                        // same shape as the raw input
  std::vector<std::uint8_t> degenerate;  // per frame (per-frame axis only)
  std::size_t degenerate_count = 0;
};

// Maps each frame's 12 raw values affinely onto [0,1]. A frame whose spread
// is below 1e-12 becomes all 0.5 and is flagged degenerate; such frames get
// zero gradient. Min/max subgradients route to the first achieving channel.
NormalizedWeights min_max_normalize(Graph& g, const Tensor& raw,
                                    MinMaxAxis axis = MinMaxAxis::kPerFrame);

// Straight-through substitution: forward returns ground_truth, backward
// passes the upstream gradient to pred unchanged. ground_truth gets none.
Tensor ste_replace(Graph& g, const Tensor& pred, const Tensor& ground_truth);

// Sinusoidal position table row-major [len x d_model].
std::vector<double> sinusoidal_positions(std::size_t len, std::size_t d_model);

}  // namespace artic
