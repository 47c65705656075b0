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

#include <span>
#include <string_view>

#include "artic/train.hpp"

namespace artic {

struct SegmentSpan {
  int label = 0;
  std::size_t begin = 0;
  std::size_t end = 0;  // exclusive
};

// Maximal runs of identical labels, in order, covering all frames once.
std::vector<SegmentSpan> extract_segments(std::span<const int> labels);

struct SegmentWeights {
  std::string phoneme;
  std::string utterance_id;
  std::size_t start = 0;
  std::size_t end = 0;
  std::vector<double> weights;  // (end - start) x 12
};

struct PhonemeCriticality {
  std::string symbol;
  std::array<double, kNumChannels> mean{};  // pooled over raw frames
  std::vector<double> trajectory;           // resample_len x 12 segment average
  std::size_t segment_count = 0;
};

struct CriticalityReport {
  std::vector<PhonemeCriticality> phonemes;  // phoneme-table order
  std::vector<std::string> skipped;          // symbols absent from the corpus
  std::size_t resample_len = 10;
};

// Eval-mode forward over every utterance (ground truth substituted unless
// use_ste is false), per-segment linear resampling to resample_len frames,
// per-phoneme averaging. Read-only on the pipeline.
CriticalityReport build_report(const Pipeline& pipeline, const Corpus& corpus,
                               const EmaNormStats& stats,
                               std::size_t resample_len, bool use_ste = true);

// Channels of one phoneme sorted by mean weight descending; ties break
// toward the canonical channel order.
std::vector<int> top_k_channels(const CriticalityReport& report,
                                std::string_view phoneme, std::size_t k);

// "/m/ : LL_y Jaw_y UL_x"
std::string top_k_display(const CriticalityReport& report,
                          std::string_view phoneme, std::size_t k);

// Writes summary.csv (per phoneme: 12 channel means, segment count, top-3),
// top3.txt (paper-style lines) and one heatmap_<phoneme>.csv per phoneme
// (resample_len rows x 12 channel columns). Deterministic bytes.
void export_report(const CriticalityReport& report,
                   const std::filesystem::path& dir);

// Linear resampling of a [len x 12] trajectory to [target_len x 12].
std::vector<double> resample_trajectory(std::span<const double> weights,
                                        std::size_t len,
                                        std::size_t target_len);

struct PhonemeScore {
  std::string symbol;
  std::vector<int> planted;
  std::vector<int> predicted;
  std::size_t hits = 0;     // planted channels found in the predicted top-k
  bool top1_hit = false;    // most salient planted channel in the top-k
};

struct OracleScore {
  std::vector<PhonemeScore> rows;
  std::size_t phonemes_all_planted_hit = 0;
  std::size_t phonemes_top1_hit = 0;
};

OracleScore score_against_oracle(
    const CriticalityReport& report,
    const std::vector<std::pair<std::string, std::vector<int>>>& oracle,
    std::size_t k);

void export_scoring(const OracleScore& score,
                    const std::filesystem::path& path);

}  // namespace artic
