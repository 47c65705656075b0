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

#include "artic/pipeline.hpp"

#include <stdexcept>

namespace artic {

Pipeline::Pipeline(const PipelineConfig& cfg, Rng& rng) : cfg_(cfg) {
  if (cfg.num_classes < 2) {
    throw std::invalid_argument("pipeline: need at least 2 phoneme classes");
  }
  aai_enc_.init(cfg.mfcc_dim, cfg.enc, rng);
  aai_head_.init(cfg.enc.d_model, cfg.ema_dim, rng);
  if (!cfg.share_aai_awp_trunk) {
    awp_enc_.init(cfg.mfcc_dim, cfg.enc, rng);
  }
  awp_head_.init(cfg.enc.d_model, cfg.ema_dim, rng);
  fpc_enc_.init(cfg.ema_dim, cfg.enc, rng);
  fpc_head_.init(cfg.enc.d_model, cfg.num_classes, rng);
}

Tensor Pipeline::aai_forward(Graph& g, const Tensor& mfcc,
                             std::span<const std::uint8_t> mask) const {
  if (mfcc.ndim() != 2 || mfcc.dim(1) != cfg_.mfcc_dim) {
    throw std::invalid_argument("aai_forward: expected [frames x " +
                                std::to_string(cfg_.mfcc_dim) + "], got " +
                                shape_str(mfcc.shape()));
  }
  return aai_head_.forward(g, aai_enc_.forward(g, mfcc, mask));
}

Tensor Pipeline::awp_raw(Graph& g, const Tensor& mfcc,
                         std::span<const std::uint8_t> mask, bool training,
                         Rng& rng) const {
  if (mfcc.ndim() != 2 || mfcc.dim(1) != cfg_.mfcc_dim) {
    throw std::invalid_argument("awp_forward: expected [frames x " +
                                std::to_string(cfg_.mfcc_dim) + "], got " +
                                shape_str(mfcc.shape()));
  }
  const TransformerEncoder& trunk =
      cfg_.share_aai_awp_trunk ? aai_enc_ : awp_enc_;
  Tensor features = awp_head_.forward(g, trunk.forward(g, mfcc, mask));
  // Dropout acts on the raw 12-dim weight features, before normalization;
  // normalizing first would break the [0,1] guarantee at train time.
  return dropout(g, features, cfg_.dropout_p, training, rng);
}

NormalizedWeights Pipeline::awp_forward(Graph& g, const Tensor& mfcc,
                                        std::span<const std::uint8_t> mask,
                                        bool training, Rng& rng) const {
  return min_max_normalize(g, awp_raw(g, mfcc, mask, training, rng),
                           cfg_.weight_norm_axis);
}

PipelineOutput Pipeline::forward(Graph& g, const Tensor& mfcc,
                                 const Tensor* gt_ema,
                                 std::span<const std::uint8_t> mask,
                                 bool training, Rng* rng) const {
  if (training && gt_ema == nullptr) {
    throw std::invalid_argument(
        "pipeline: training forward requires ground-truth articulators");
  }
  if (training && rng == nullptr) {
    throw std::invalid_argument("pipeline: training forward requires an rng");
  }

  PipelineOutput out;
  out.ema_pred = aai_forward(g, mfcc, mask);

  Rng dummy(0);  // never drawn from in eval mode
  if (cfg_.bypass_weights) {
    out.weights.weights = Tensor::full({mfcc.dim(0), cfg_.ema_dim}, 1.0);
    out.weights.degenerate.assign(mfcc.dim(0), 0);
  } else {
    out.weights = awp_forward(g, mfcc, mask, training, rng ? *rng : dummy);
  }
  out.degenerate_frame_count = out.weights.degenerate_count;

  Tensor articulators = gt_ema != nullptr
                            ? ste_replace(g, out.ema_pred, *gt_ema)
                            : out.ema_pred;
  out.weighted_ema = mul(g, out.weights.weights, articulators);
  out.logits = fpc_head_.forward(g, fpc_enc_.forward(g, out.weighted_ema,
                                                     mask));
  return out;
}

ParamRegistry Pipeline::parameters() const {
  ParamRegistry reg;
  aai_enc_.collect("aai.encoder", reg);
  aai_head_.collect("aai.head", reg);
  if (!cfg_.share_aai_awp_trunk) {
    awp_enc_.collect("awp.encoder", reg);
  }
  awp_head_.collect("awp.head", reg);
  fpc_enc_.collect("fpc.encoder", reg);
  fpc_head_.collect("fpc.head", reg);
  return reg;
}

LossParts pipeline_loss(Graph& g, const PipelineOutput& out,
                        const Tensor& gt_ema, const std::vector<int>& labels,
                        const Tensor& mask, double lambda_aai,
                        double lambda_fpc) {
  if (lambda_aai < 0.0 || lambda_fpc < 0.0) {
    throw std::invalid_argument("pipeline_loss: loss weights must be >= 0");
  }
  if (lambda_aai == 0.0 && lambda_fpc == 0.0) {
    throw std::invalid_argument(
        "pipeline_loss: at least one loss weight must be positive");
  }
  LossParts parts;
  parts.aai = mse_loss(g, out.ema_pred, gt_ema, mask);
  parts.fpc = cross_entropy_loss(g, out.logits, labels, mask);
  parts.total = add(g, scale(g, parts.aai, lambda_aai),
                    scale(g, parts.fpc, lambda_fpc));
  return parts;
}

BatchForward pipeline_forward_batch(Graph& g, const Pipeline& pipeline,
                                    const Batch& batch, bool training,
                                    Rng* rng, bool substitute_gt) {
  const std::size_t t = batch.max_frames;
  const std::size_t mfcc_dim = pipeline.config().mfcc_dim;
  const std::size_t ema_dim = pipeline.config().ema_dim;

  std::vector<Tensor> preds, weights, weighted, logits;
  std::vector<std::uint8_t> degenerate;
  std::size_t degenerate_count = 0;
  for (std::size_t b = 0; b < batch.size; ++b) {
    Tensor mfcc = Tensor::from(
        {t, mfcc_dim},
        std::vector<double>(
            batch.mfcc.begin() + static_cast<std::ptrdiff_t>(b * t * mfcc_dim),
            batch.mfcc.begin() +
                static_cast<std::ptrdiff_t>((b + 1) * t * mfcc_dim)));
    Tensor gt = Tensor::from(
        {t, ema_dim},
        std::vector<double>(
            batch.ema.begin() + static_cast<std::ptrdiff_t>(b * t * ema_dim),
            batch.ema.begin() +
                static_cast<std::ptrdiff_t>((b + 1) * t * ema_dim)));
    std::span<const std::uint8_t> mask(batch.mask.data() + b * t, t);

    PipelineOutput out = pipeline.forward(
        g, mfcc, substitute_gt ? &gt : nullptr, mask, training, rng);
    preds.push_back(out.ema_pred);
    weights.push_back(out.weights.weights);
    weighted.push_back(out.weighted_ema);
    logits.push_back(out.logits);
    if (out.weights.degenerate.empty()) {
      degenerate.insert(degenerate.end(), t, 0);
    } else {
      degenerate.insert(degenerate.end(), out.weights.degenerate.begin(),
                        out.weights.degenerate.end());
    }
    for (std::size_t f = 0; f < t; ++f) {
      if (mask[f] && !out.weights.degenerate.empty() &&
          out.weights.degenerate[f]) {
        ++degenerate_count;
      }
    }
  }

  BatchForward bf;
  bf.out.ema_pred = concat_rows(g, preds);
  bf.out.weights.weights = concat_rows(g, weights);
  bf.out.weights.degenerate = std::move(degenerate);
  bf.out.weights.degenerate_count = degenerate_count;
  bf.out.degenerate_frame_count = degenerate_count;
  bf.out.weighted_ema = concat_rows(g, weighted);
  bf.out.logits = concat_rows(g, logits);
  bf.gt_ema = Tensor::from({batch.size * t, ema_dim}, batch.ema);
  std::vector<double> maskv(batch.size * t);
  for (std::size_t i = 0; i < maskv.size(); ++i) {
    maskv[i] = static_cast<double>(batch.mask[i]);
  }
  bf.mask = Tensor::from({batch.size * t}, std::move(maskv));
  bf.labels = batch.labels;
  return bf;
}

}  // namespace artic
