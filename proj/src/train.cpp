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

#include "artic/train.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

#include "artic/textio.hpp"

namespace artic {

namespace {

// Stream tags local to the trainer; shuffling tags live in rng.hpp.
constexpr std::uint64_t kEpochShuffleTag = 0x10;
constexpr std::uint64_t kEpochDropoutTag = 0x11;

std::size_t correct_frames(const Tensor& logits,
                           const std::vector<int>& labels,
                           std::span<const double> mask, std::size_t* total) {
  const std::size_t frames = logits.dim(0), k = logits.dim(1);
  std::size_t correct = 0;
  for (std::size_t f = 0; f < frames; ++f) {
    if (mask[f] == 0.0) continue;
    ++*total;
    const double* row = logits.values().data() + f * k;
    std::size_t best = 0;
    for (std::size_t j = 1; j < k; ++j) {
      if (row[j] > row[best]) best = j;
    }
    if (static_cast<int>(best) == labels[f]) ++correct;
  }
  return correct;
}

}  // namespace

void validate_config(const TrainConfig& cfg) {
  if (cfg.learning_rate <= 0.0) {
    throw std::invalid_argument("train: learning_rate must be positive");
  }
  if (cfg.beta1 < 0.0 || cfg.beta1 >= 1.0 || cfg.beta2 < 0.0 ||
      cfg.beta2 >= 1.0) {
    throw std::invalid_argument("train: beta1/beta2 must lie in [0,1)");
  }
  if (cfg.adam_eps <= 0.0) {
    throw std::invalid_argument("train: adam_eps must be positive");
  }
  if (cfg.batch_size < 1) {
    throw std::invalid_argument("train: batch_size must be >= 1");
  }
  if (cfg.grad_clip < 0.0) {
    throw std::invalid_argument("train: grad_clip must be >= 0");
  }
}

void init_adam_state(AdamState& state, const ParamRegistry& params) {
  state.m.clear();
  state.v.clear();
  state.step = 0;
  for (const auto& [name, t] : params.items()) {
    state.m.emplace_back(t.numel(), 0.0);
    state.v.emplace_back(t.numel(), 0.0);
  }
}

void adam_step(ParamRegistry& params, AdamState& state,
               const TrainConfig& cfg) {
  if (state.m.size() != params.size()) {
    throw std::invalid_argument(
        "adam_step: state does not match the parameter registry");
  }
  const auto& items = params.items();
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (state.m[i].size() != items[i].second.numel()) {
      throw std::invalid_argument("adam_step: moment shape mismatch for '" +
                                  items[i].first + "'");
    }
  }

  double clip_scale = 1.0;
  if (cfg.grad_clip > 0.0) {
    double sq = 0.0;
    for (const auto& [name, t] : items) {
      Tensor tt = t;
      for (double gv : tt.grad_mut()) sq += gv * gv;
    }
    const double norm = std::sqrt(sq);
    if (norm > cfg.grad_clip) clip_scale = cfg.grad_clip / norm;
  }

  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(cfg.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < items.size(); ++i) {
    Tensor param = items[i].second;
    auto vals = param.values_mut();
    auto grads = param.grad_mut();  // zero-filled when the step skipped it
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t j = 0; j < vals.size(); ++j) {
      double gv = grads[j];
      if (!std::isfinite(gv)) {
        throw std::runtime_error("adam_step: non-finite gradient in '" +
                                 items[i].first + "' at coordinate " +
                                 std::to_string(j));
      }
      gv *= clip_scale;
      m[j] = cfg.beta1 * m[j] + (1.0 - cfg.beta1) * gv;
      v[j] = cfg.beta2 * v[j] + (1.0 - cfg.beta2) * gv * gv;
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      vals[j] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.adam_eps);
    }
  }
}

TrainResult train(Pipeline& pipeline, const Corpus& train_corpus,
                  const TrainConfig& cfg, const Corpus* eval_corpus,
                  AdamState* state, std::size_t start_epoch) {
  validate_config(cfg);
  if (train_corpus.utterances.empty()) {
    throw std::invalid_argument("train: empty corpus");
  }
  if (train_corpus.phoneme_table.size() != pipeline.config().num_classes) {
    throw std::invalid_argument(
        "train: corpus has " +
        std::to_string(train_corpus.phoneme_table.size()) +
        " phonemes but the pipeline expects " +
        std::to_string(pipeline.config().num_classes));
  }

  TrainResult result;
  result.stats = compute_ema_stats(train_corpus);
  Corpus scored = train_corpus;
  apply_ema_stats(scored, result.stats);
  Corpus scored_eval;
  if (eval_corpus != nullptr) {
    scored_eval = *eval_corpus;
    apply_ema_stats(scored_eval, result.stats);
  }
  const Corpus& eval_ref = eval_corpus ? scored_eval : scored;

  ParamRegistry params = pipeline.parameters();
  AdamState local_state;
  AdamState& adam = state ? *state : local_state;
  if (adam.empty()) init_adam_state(adam, params);

  const double lambda_aai = pipeline.config().lambda_aai;
  const double lambda_fpc = pipeline.config().lambda_fpc;

  double last_eval_acc = 0.0;
  bool have_eval = false;
  for (std::size_t epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
    auto batches =
        make_batches(scored, cfg.batch_size,
                     derive_seed(cfg.seed, kEpochShuffleTag, epoch),
                     cfg.bucket_by_length);
    double sum_aai = 0.0, sum_fpc = 0.0, sum_total = 0.0;
    std::size_t loss_frames = 0;
    std::size_t acc_correct = 0, acc_total = 0;
    for (std::size_t bi = 0; bi < batches.size(); ++bi) {
      Rng dropout_rng(derive_seed(cfg.seed, kEpochDropoutTag,
                                  (epoch << 20) | bi));
      Graph g;
      BatchForward bf = pipeline_forward_batch(g, pipeline, batches[bi],
                                               /*training=*/true,
                                               &dropout_rng,
                                               /*substitute_gt=*/true);
      LossParts loss = pipeline_loss(g, bf.out, bf.gt_ema, bf.labels, bf.mask,
                                     lambda_aai, lambda_fpc);
      if (!std::isfinite(loss.total.item())) {
        throw std::runtime_error(
            "train: non-finite loss at epoch " + std::to_string(epoch + 1) +
            ", batch " + std::to_string(bi + 1));
      }
      std::size_t selected = 0;
      acc_correct += correct_frames(bf.out.logits, bf.labels,
                                    bf.mask.values(), &acc_total);
      for (double mv : bf.mask.values()) selected += mv == 1.0;
      sum_aai += loss.aai.item() * static_cast<double>(selected);
      sum_fpc += loss.fpc.item() * static_cast<double>(selected);
      sum_total += loss.total.item() * static_cast<double>(selected);
      loss_frames += selected;

      params.zero_grad();
      g.backward(loss.total);
      adam_step(params, adam, cfg);
    }

    EpochMetrics row;
    row.epoch = epoch + 1;
    row.l_aai = sum_aai / static_cast<double>(loss_frames);
    row.l_fpc = sum_fpc / static_cast<double>(loss_frames);
    row.total = sum_total / static_cast<double>(loss_frames);
    row.train_acc =
        static_cast<double>(acc_correct) / static_cast<double>(acc_total);
    const bool eval_now = cfg.eval_every > 0 &&
                          ((epoch + 1) % cfg.eval_every == 0 ||
                           epoch + 1 == cfg.epochs);
    if (eval_now || !have_eval) {
      last_eval_acc =
          evaluate(pipeline, eval_ref, EmaNormStats::identity(),
                   cfg.batch_size)
              .frame_acc;
      have_eval = true;
    }
    row.eval_acc = last_eval_acc;
    result.log.push_back(row);
  }
  return result;
}

EvalMetrics evaluate(const Pipeline& pipeline, const Corpus& corpus,
                     const EmaNormStats& stats, std::size_t batch_size) {
  if (corpus.utterances.empty()) {
    throw std::invalid_argument("evaluate: empty corpus");
  }
  Corpus scored = corpus;
  apply_ema_stats(scored, stats);

  EvalMetrics metrics;
  std::array<double, kNumChannels> sq_err{};
  std::size_t frames = 0, correct = 0, correct_nosub = 0, degenerate = 0;

  auto batches = make_batches(scored, batch_size, std::nullopt);
  for (const auto& batch : batches) {
    Graph g(false);
    BatchForward with_gt = pipeline_forward_batch(g, pipeline, batch,
                                                  /*training=*/false, nullptr,
                                                  /*substitute_gt=*/true);
    Graph g2(false);
    BatchForward without_gt = pipeline_forward_batch(
        g2, pipeline, batch, /*training=*/false, nullptr,
        /*substitute_gt=*/false);

    std::size_t dummy = 0;
    correct += correct_frames(with_gt.out.logits, with_gt.labels,
                              with_gt.mask.values(), &frames);
    correct_nosub += correct_frames(without_gt.out.logits, without_gt.labels,
                                    without_gt.mask.values(), &dummy);
    degenerate += with_gt.out.degenerate_frame_count;

    auto pred = with_gt.out.ema_pred.values();
    auto gt = with_gt.gt_ema.values();
    auto mask = with_gt.mask.values();
    for (std::size_t f = 0; f < mask.size(); ++f) {
      if (mask[f] == 0.0) continue;
      for (std::size_t c = 0; c < kNumChannels; ++c) {
        const double d = pred[f * kNumChannels + c] - gt[f * kNumChannels + c];
        sq_err[c] += d * d;
      }
    }
  }
  metrics.frames = frames;
  metrics.frame_acc =
      static_cast<double>(correct) / static_cast<double>(frames);
  metrics.frame_acc_nosub =
      static_cast<double>(correct_nosub) / static_cast<double>(frames);
  metrics.degenerate_rate =
      static_cast<double>(degenerate) / static_cast<double>(frames);
  for (std::size_t c = 0; c < kNumChannels; ++c) {
    metrics.rmse[c] = std::sqrt(sq_err[c] / static_cast<double>(frames));
  }
  return metrics;
}

void write_metrics_csv(const std::filesystem::path& path,
                       const std::vector<EpochMetrics>& log) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("metrics: cannot write " + path.string());
  }
  out << "epoch,l_aai,l_fpc,total,train_acc,eval_acc\n";
  for (const auto& row : log) {
    out << row.epoch << "," << format_g12(row.l_aai) << ","
        << format_g12(row.l_fpc) << "," << format_g12(row.total) << ","
        << format_g12(row.train_acc) << "," << format_g12(row.eval_acc)
        << "\n";
  }
}

}  // namespace artic
