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

#include <optional>

#include "artic/data.hpp"
#include "artic/nn.hpp"

namespace artic {

struct PipelineConfig {
  std::size_t mfcc_dim = kMfccDim;
  std::size_t ema_dim = kNumChannels;
  std::size_t num_classes = 8;
  EncoderConfig enc;
  double dropout_p = 0.5;
  double lambda_aai = 1.0;
  double lambda_fpc = 1.0;
  // The two "blocks" are realized as three encoder+head networks by default;
  // sharing reuses the AAI encoder output for the AWP head.
  bool share_aai_awp_trunk = false;
  MinMaxAxis weight_norm_axis = MinMaxAxis::kPerFrame;
  // Ablation/bypass: weights forced to 1, so the classifier sees the
  // articulators unweighted.
  bool bypass_weights = false;
};

struct PipelineOutput {
  Tensor ema_pred;            // [frames x 12]
  NormalizedWeights weights;  // per-frame articulator weights in [0,1]
  Tensor weighted_ema;        // weights (.) substituted articulators
  Tensor logits;              // [frames x K]
  std::size_t degenerate_frame_count = 0;
};

// AAI + AWP + FPC over one utterance (or one padded batch member).
class Pipeline {
 public:
  Pipeline(const PipelineConfig& cfg, Rng& rng);

  const PipelineConfig& config() const { return cfg_; }

  Tensor aai_forward(Graph& g, const Tensor& mfcc,
                     std::span<const std::uint8_t> mask) const;

  NormalizedWeights awp_forward(Graph& g, const Tensor& mfcc,
                                std::span<const std::uint8_t> mask,
                                bool training, Rng& rng) const;

  // gt_ema non-null: articulators fed to FPC are the ground truth via the
  // straight-through substitution. Training requires gt_ema and an rng.
  PipelineOutput forward(Graph& g, const Tensor& mfcc, const Tensor* gt_ema,
                         std::span<const std::uint8_t> mask, bool training,
                         Rng* rng) const;

  ParamRegistry parameters() const;

 private:
  Tensor awp_raw(Graph& g, const Tensor& mfcc,
                 std::span<const std::uint8_t> mask, bool training,
                 Rng& rng) const;

  PipelineConfig cfg_;
  TransformerEncoder aai_enc_;
  DenseLayer aai_head_;
  TransformerEncoder awp_enc_;  // unused when the trunk is shared
  DenseLayer awp_head_;
  TransformerEncoder fpc_enc_;
  DenseLayer fpc_head_;
};

struct LossParts {
  Tensor total;
  Tensor aai;
  Tensor fpc;
};

// total = lambda_aai * mse(ema_pred, gt, mask) + lambda_fpc * ce(logits,
// labels, mask). Rejects lambda_aai = lambda_fpc = 0.
LossParts pipeline_loss(Graph& g, const PipelineOutput& out,
                        const Tensor& gt_ema, const std::vector<int>& labels,
                        const Tensor& mask, double lambda_aai,
                        double lambda_fpc);

// Runs the per-member forward over a padded batch and concatenates outputs
// into [size*max_frames x ...] tensors, with the flattened {0,1} mask and
// padded labels alongside. Degenerate frames are counted on real frames
// only. substitute_gt=false evaluates the pure-inference path.
struct BatchForward {
  PipelineOutput out;
  Tensor gt_ema;
  Tensor mask;
  std::vector<int> labels;
};

BatchForward pipeline_forward_batch(Graph& g, const Pipeline& pipeline,
                                    const Batch& batch, bool training,
                                    Rng* rng, bool substitute_gt = true);

}  // namespace artic
