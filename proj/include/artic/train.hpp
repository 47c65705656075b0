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

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "artic/pipeline.hpp"

namespace artic {

struct TrainConfig {
  std::size_t epochs = 60;
  std::size_t batch_size = 8;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double grad_clip = 0.0;  // global-norm threshold; 0 disables
  std::uint64_t seed = 1;
  std::size_t eval_every = 1;
  bool bucket_by_length = false;
};

void validate_config(const TrainConfig& cfg);

struct AdamState {
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::uint64_t step = 0;

  bool empty() const { return m.empty(); }
};

void init_adam_state(AdamState& state, const ParamRegistry& params);

// One Adam update with bias correction from the gradients currently stored
// on the registered parameters. Aborts on non-finite gradients, naming the
// offending parameter.
void adam_step(ParamRegistry& params, AdamState& state,
               const TrainConfig& cfg);

struct EpochMetrics {
  std::size_t epoch = 0;  // 1-based
  double l_aai = 0.0;
  double l_fpc = 0.0;
  double total = 0.0;
  double train_acc = 0.0;
  double eval_acc = 0.0;
};

struct EvalMetrics {
  double frame_acc = 0.0;        // ground truth substituted (training-style)
  double frame_acc_nosub = 0.0;  // pure inference path
  std::array<double, kNumChannels> rmse{};  // per-channel, normalized units
  double degenerate_rate = 0.0;
  std::size_t frames = 0;
};

struct TrainResult {
  std::vector<EpochMetrics> log;
  EmaNormStats stats;
};

// End-to-end training: per-epoch shuffled padded batches, training-mode
// forward with ground-truth substitution, joint loss, backward, Adam. All
// randomness is derived from (seed, epoch, batch), so a run is a pure
// function of (pipeline init, corpus, config) and can resume bit-exactly
// from a checkpoint. Corpora come in raw; z-scoring statistics are computed
// from the training corpus here and applied internally.
TrainResult train(Pipeline& pipeline, const Corpus& train_corpus,
                  const TrainConfig& cfg, const Corpus* eval_corpus = nullptr,
                  AdamState* state = nullptr, std::size_t start_epoch = 0);

// Eval-mode metrics; `stats` must be the training-time statistics.
EvalMetrics evaluate(const Pipeline& pipeline, const Corpus& corpus,
                     const EmaNormStats& stats, std::size_t batch_size = 8);

void write_metrics_csv(const std::filesystem::path& path,
                       const std::vector<EpochMetrics>& log);

// ---- checkpointing ----------------------------------------------------------
// Single-file little-endian binary of named parameter blocks plus optimizer
// moments, step/epoch counters, normalization statistics, the phoneme table
// and a config echo. load(save(x)) continues training bit-exactly.

struct LoadedCheckpoint {
  PipelineConfig pcfg;
  std::unique_ptr<Pipeline> pipeline;
  std::vector<std::string> phoneme_table;
  EmaNormStats stats;
  AdamState adam;
  bool has_adam = false;
  std::uint64_t epoch = 0;
  std::string config_echo;
};

void save_checkpoint(const std::filesystem::path& path,
                     const Pipeline& pipeline,
                     const std::vector<std::string>& phoneme_table,
                     const EmaNormStats& stats, const AdamState* adam,
                     std::uint64_t epoch, const std::string& config_echo);

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace artic
