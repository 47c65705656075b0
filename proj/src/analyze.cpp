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

#include "artic/analyze.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "artic/textio.hpp"

namespace artic {

std::vector<SegmentSpan> extract_segments(std::span<const int> labels) {
  std::vector<SegmentSpan> spans;
  std::size_t s = 0;
  while (s < labels.size()) {
    std::size_t e = s;
    while (e < labels.size() && labels[e] == labels[s]) ++e;
    spans.push_back({labels[s], s, e});
    s = e;
  }
  return spans;
}

std::vector<double> resample_trajectory(std::span<const double> weights,
                                        std::size_t len,
                                        std::size_t target_len) {
  if (len == 0 || weights.size() != len * kNumChannels) {
    throw std::invalid_argument("resample: trajectory size mismatch");
  }
  if (target_len < 2) {
    throw std::invalid_argument("resample: target length must be >= 2");
  }
  std::vector<double> out(target_len * kNumChannels);
  for (std::size_t r = 0; r < target_len; ++r) {
    if (len == 1) {
      std::copy_n(weights.begin(), kNumChannels,
                  out.begin() + static_cast<std::ptrdiff_t>(r * kNumChannels));
      continue;
    }
    const double pos = static_cast<double>(r) *
                       static_cast<double>(len - 1) /
                       static_cast<double>(target_len - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, len - 1);
    const double frac = pos - static_cast<double>(lo);
    for (std::size_t c = 0; c < kNumChannels; ++c) {
      out[r * kNumChannels + c] =
          (1.0 - frac) * weights[lo * kNumChannels + c] +
          frac * weights[hi * kNumChannels + c];
    }
  }
  return out;
}

CriticalityReport build_report(const Pipeline& pipeline, const Corpus& corpus,
                               const EmaNormStats& stats,
                               std::size_t resample_len, bool use_ste) {
  if (resample_len < 2) {
    throw std::invalid_argument("build_report: resample length must be >= 2");
  }
  if (corpus.utterances.empty()) {
    throw std::invalid_argument("build_report: empty corpus");
  }
  Corpus scored = corpus;
  apply_ema_stats(scored, stats);

  const std::size_t k = scored.phoneme_table.size();
  std::vector<std::array<double, kNumChannels>> mean_sum(k);
  for (auto& a : mean_sum) a.fill(0.0);
  std::vector<std::size_t> frame_count(k, 0);
  std::vector<std::vector<double>> traj_sum(
      k, std::vector<double>(resample_len * kNumChannels, 0.0));
  std::vector<std::size_t> seg_count(k, 0);

  for (const auto& u : scored.utterances) {
    Graph g(false);
    Tensor mfcc = Tensor::from({u.frames, kMfccDim}, u.mfcc);
    Tensor gt = Tensor::from({u.frames, kNumChannels}, u.ema);
    std::vector<std::uint8_t> mask(u.frames, 1);
    PipelineOutput out = pipeline.forward(g, mfcc, use_ste ? &gt : nullptr,
                                          mask, /*training=*/false, nullptr);
    auto w = out.weights.weights.values();

    for (std::size_t f = 0; f < u.frames; ++f) {
      const auto p = static_cast<std::size_t>(u.labels[f]);
      for (std::size_t c = 0; c < kNumChannels; ++c) {
        mean_sum[p][c] += w[f * kNumChannels + c];
      }
      ++frame_count[p];
    }
    for (const auto& span : extract_segments(u.labels)) {
      const auto p = static_cast<std::size_t>(span.label);
      const std::size_t len = span.end - span.begin;
      auto resampled = resample_trajectory(
          w.subspan(span.begin * kNumChannels, len * kNumChannels), len,
          resample_len);
      for (std::size_t i = 0; i < resampled.size(); ++i) {
        traj_sum[p][i] += resampled[i];
      }
      ++seg_count[p];
    }
  }

  CriticalityReport report;
  report.resample_len = resample_len;
  for (std::size_t p = 0; p < k; ++p) {
    if (frame_count[p] == 0) {
      report.skipped.push_back(scored.phoneme_table[p]);
      continue;
    }
    PhonemeCriticality row;
    row.symbol = scored.phoneme_table[p];
    for (std::size_t c = 0; c < kNumChannels; ++c) {
      row.mean[c] = mean_sum[p][c] / static_cast<double>(frame_count[p]);
    }
    row.trajectory.resize(resample_len * kNumChannels);
    for (std::size_t i = 0; i < row.trajectory.size(); ++i) {
      row.trajectory[i] = traj_sum[p][i] / static_cast<double>(seg_count[p]);
    }
    row.segment_count = seg_count[p];
    report.phonemes.push_back(std::move(row));
  }
  return report;
}

namespace {

const PhonemeCriticality& find_phoneme(const CriticalityReport& report,
                                       std::string_view phoneme) {
  for (const auto& p : report.phonemes) {
    if (p.symbol == phoneme) return p;
  }
  throw std::invalid_argument("report: unknown phoneme '" +
                              std::string(phoneme) + "'");
}

}  // namespace

std::vector<int> top_k_channels(const CriticalityReport& report,
                                std::string_view phoneme, std::size_t k) {
  if (k < 1 || k > kNumChannels) {
    throw std::invalid_argument("top_k: k must lie in [1,12]");
  }
  const auto& row = find_phoneme(report, phoneme);
  std::vector<int> order(kNumChannels);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    if (row.mean[static_cast<std::size_t>(a)] !=
        row.mean[static_cast<std::size_t>(b)]) {
      return row.mean[static_cast<std::size_t>(a)] >
             row.mean[static_cast<std::size_t>(b)];
    }
    return a < b;  // canonical order breaks ties
  });
  order.resize(k);
  return order;
}

std::string top_k_display(const CriticalityReport& report,
                          std::string_view phoneme, std::size_t k) {
  std::string out = "/" + std::string(phoneme) + "/ :";
  for (int c : top_k_channels(report, phoneme, k)) {
    out += " " + channel_name(c);
  }
  return out;
}

void export_report(const CriticalityReport& report,
                   const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "summary.csv");
    if (!out) {
      throw std::runtime_error("export: cannot write " +
                               (dir / "summary.csv").string());
    }
    out << "phoneme";
    for (const auto& name : channel_names()) out << "," << name;
    out << ",segments,top3\n";
    for (const auto& p : report.phonemes) {
      out << p.symbol;
      for (double m : p.mean) out << "," << format_g12(m);
      out << "," << p.segment_count << ",";
      auto top = top_k_channels(report, p.symbol, 3);
      for (std::size_t i = 0; i < top.size(); ++i) {
        out << (i ? " " : "") << channel_name(top[i]);
      }
      out << "\n";
    }
  }
  {
    std::ofstream out(dir / "top3.txt");
    for (const auto& p : report.phonemes) {
      out << top_k_display(report, p.symbol, 3) << "\n";
    }
  }
  for (const auto& p : report.phonemes) {
    std::ofstream out(dir / ("heatmap_" + p.symbol + ".csv"));
    if (!out) {
      throw std::runtime_error("export: cannot write heatmap for " + p.symbol);
    }
    for (std::size_t c = 0; c < kNumChannels; ++c) {
      out << (c ? "," : "") << channel_names()[c];
    }
    out << "\n";
    for (std::size_t r = 0; r < report.resample_len; ++r) {
      for (std::size_t c = 0; c < kNumChannels; ++c) {
        out << (c ? "," : "")
            << format_g12(p.trajectory[r * kNumChannels + c]);
      }
      out << "\n";
    }
  }
}

OracleScore score_against_oracle(
    const CriticalityReport& report,
    const std::vector<std::pair<std::string, std::vector<int>>>& oracle,
    std::size_t k) {
  OracleScore score;
  for (const auto& [symbol, planted] : oracle) {
    bool present = false;
    for (const auto& p : report.phonemes) present |= p.symbol == symbol;
    if (!present) continue;  // skipped phonemes are not scored
    PhonemeScore row;
    row.symbol = symbol;
    row.planted = planted;
    row.predicted = top_k_channels(report, symbol, k);
    for (int c : planted) {
      if (std::find(row.predicted.begin(), row.predicted.end(), c) !=
          row.predicted.end()) {
        ++row.hits;
      }
    }
    row.top1_hit =
        !planted.empty() &&
        std::find(row.predicted.begin(), row.predicted.end(), planted[0]) !=
            row.predicted.end();
    if (row.hits == planted.size()) ++score.phonemes_all_planted_hit;
    if (row.top1_hit) ++score.phonemes_top1_hit;
    score.rows.push_back(std::move(row));
  }
  return score;
}

void export_scoring(const OracleScore& score,
                    const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("export: cannot write " + path.string());
  }
  out << "phoneme,planted,predicted,hits,top1_hit\n";
  for (const auto& row : score.rows) {
    out << row.symbol << ",";
    for (std::size_t i = 0; i < row.planted.size(); ++i) {
      out << (i ? " " : "") << channel_name(row.planted[i]);
    }
    out << ",";
    for (std::size_t i = 0; i < row.predicted.size(); ++i) {
      out << (i ? " " : "") << channel_name(row.predicted[i]);
    }
    out << "," << row.hits << "," << (row.top1_hit ? 1 : 0) << "\n";
  }
  out << "total_all_planted_hit," << score.phonemes_all_planted_hit << "\n";
  out << "total_top1_hit," << score.phonemes_top1_hit << "\n";
  out << "phonemes_scored," << score.rows.size() << "\n";
}

}  // namespace artic
