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

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace artic {

// ---- articulator channels --------------------------------------------------

inline constexpr std::size_t kNumChannels = 12;
inline constexpr std::size_t kMfccDim = 13;

// Canonical column order everywhere: x and y of UL, LL, Jaw, TT, TB, TD.
enum class ArticulatorChannel : int {
  kUlX = 0,
  kUlY,
  kLlX,
  kLlY,
  kJawX,
  kJawY,
  kTtX,
  kTtY,
  kTbX,
  kTbY,
  kTdX,
  kTdY,
};

// Display names follow the reporting convention ("Jaw_y", not "JAW_y").
const std::array<std::string, kNumChannels>& channel_names();
const std::string& channel_name(int channel);
int channel_from_name(std::string_view name);  // throws on unknown names

// ---- corpus model -----------------------------------------------------------

struct Utterance {
  std::string id;
  std::string subject;
  std::size_t frames = 0;
  std::vector<double> mfcc;  // frames x 13
  std::vector<double> ema;   // frames x 12, canonical channel order
  std::vector<int> labels;   // frames phoneme indices
};

struct Corpus {
  std::vector<Utterance> utterances;
  std::vector<std::string> phoneme_table;

  std::size_t total_frames() const;
  int label_of(std::string_view symbol) const;  // -1 when absent
};

// ---- synthetic planted-criticality corpus ----------------------------------

struct CriticalTarget {
  int channel = 0;
  double target = 0.0;  // position in [-1, 1]
};

struct PhonemeSpec {
  std::string symbol;
  std::vector<CriticalTarget> critical;  // 1..3 channels, most salient first
  // Passive co-movements: channels that are pinned with the same dynamics
  // as critical ones but stay invisible to the acoustics. Pairing phonemes
  // that passively mimic each other's critical channels makes them
  // indistinguishable from articulator positions alone, so discovering the
  // truly critical channels requires the acoustics.
  std::vector<CriticalTarget> passive;
};

struct SyntheticSpec {
  std::vector<PhonemeSpec> phonemes;
  double alpha = 0.7;     // first-order smoothing toward targets
  double sigma_a = 0.05;  // acoustic noise scale
  double sigma_w = 0.15;  // non-critical wander scale
  double sigma_c = 0.02;  // on-target jitter of critical channels
  double walk_bound = 0.35;
  // Probability that a segment anticipates the next segment's articulation:
  // the upcoming phoneme's pinned channels relax toward their targets early
  // instead of walking.
  double anticipation = 0.0;
  // Probability that a segment carries an impostor posture: the critical
  // channels of one randomly drawn other phoneme are passively pinned at
  // their targets. Channel targets are canonical (a shared channel has one
  // target everywhere), so the frame shows two equally plausible phoneme
  // signatures and only the acoustics — which see the true phoneme's
  // channels alone — can say which one is real.
  double impostor_prob = 1.0;
  // Impostors come from a ring neighborhood of this half-width in phoneme
  // table order; 0 draws from all other phonemes. A small span keeps the
  // number of confusion patterns learnable at desk scale.
  std::size_t impostor_span = 1;
  std::size_t seg_len_min = 5;
  std::size_t seg_len_max = 15;
  std::uint64_t seed = 1;
  // Optional 13x12 acoustic projection (row-major). Empty: derived from seed
  // with every entry nonzero.
  std::vector<double> projection;
};

// The committed desk-scale spec: 8 phoneme analogs, 2 planted channels each.
SyntheticSpec default_synthetic_spec();

void validate_spec(const SyntheticSpec& spec);
std::vector<double> spec_projection(const SyntheticSpec& spec);

SyntheticSpec load_synthetic_spec(const std::filesystem::path& path);
void save_synthetic_spec(const SyntheticSpec& spec,
                         const std::filesystem::path& path);

// Generates n utterances of `phones_per_utt` segments each. Critical
// channels relax toward their targets, x[t] = a*x[t-1] + (1-a)*target +
// jitter; non-critical channels follow a clamped random walk; acoustics see
// only the critical channels: mfcc = P * (ema masked to critical) + noise.
// Pure function of (spec, counts): equal seeds give bit-identical corpora.
Corpus generate_corpus(const SyntheticSpec& spec, std::size_t n_utterances,
                       std::size_t phones_per_utt);

// Planted critical channels for one phoneme, most-to-least salient.
std::vector<int> planted_oracle(const SyntheticSpec& spec,
                                std::string_view phoneme);

// Oracle file: one line per phoneme, "<symbol> <channel> <channel>...".
void save_oracle(const SyntheticSpec& spec, const std::filesystem::path& path);
std::vector<std::pair<std::string, std::vector<int>>> load_oracle(
    const std::filesystem::path& path);

// ---- corpus I/O ----------------------------------------------------------

// One text file per utterance: header "frames=N subject=S
// phoneme_table=p1,p2,...", then N rows of 13 MFCC + 12 EMA + 1 label,
// space-separated, formatted to round-trip exactly. The manifest lists one
// utterance path per line, resolved relative to the manifest's directory.
std::filesystem::path write_corpus(const Corpus& corpus,
                                   const std::filesystem::path& dir);
Corpus load_corpus(const std::filesystem::path& manifest_path);

// ---- batching ---------------------------------------------------------

struct Batch {
  std::size_t size = 0;        // utterances in this batch
  std::size_t max_frames = 0;  // padded length
  std::vector<double> mfcc;    // size x max_frames x 13, padded with zeros
  std::vector<double> ema;     // size x max_frames x 12
  std::vector<int> labels;     // size x max_frames, padded with zeros
  std::vector<std::uint8_t> mask;  // 1 exactly on real frames
  std::vector<std::string> ids;
};

std::vector<Batch> make_batches(const Corpus& corpus, std::size_t batch_size,
                                std::optional<std::uint64_t> shuffle_seed,
                                bool bucket_by_length = false);

// ---- per-channel z-scoring --------------------------------------------------

struct EmaNormStats {
  std::array<double, kNumChannels> mean{};
  std::array<double, kNumChannels> stdev{};

  static EmaNormStats identity();
};

EmaNormStats compute_ema_stats(const Corpus& corpus);
void apply_ema_stats(Corpus& corpus, const EmaNormStats& stats);

}  // namespace artic
