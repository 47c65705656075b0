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

#include "artic/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

#include "artic/rng.hpp"
#include "artic/textio.hpp"

namespace artic {

namespace {
using nlohmann::json;
namespace fs = std::filesystem;
}  // namespace

// ---- channels -------------------------------------------------------------

const std::array<std::string, kNumChannels>& channel_names() {
  static const std::array<std::string, kNumChannels> names = {
      "UL_x", "UL_y", "LL_x", "LL_y", "Jaw_x", "Jaw_y",
      "TT_x", "TT_y", "TB_x", "TB_y", "TD_x",  "TD_y"};
  return names;
}

const std::string& channel_name(int channel) {
  if (channel < 0 || channel >= static_cast<int>(kNumChannels)) {
    throw std::invalid_argument("channel index " + std::to_string(channel) +
                                " out of range [0,12)");
  }
  return channel_names()[static_cast<std::size_t>(channel)];
}

int channel_from_name(std::string_view name) {
  const auto& names = channel_names();
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return static_cast<int>(i);
  }
  // Tolerate the all-caps jaw spelling on input.
  if (name == "JAW_x") return static_cast<int>(ArticulatorChannel::kJawX);
  if (name == "JAW_y") return static_cast<int>(ArticulatorChannel::kJawY);
  throw std::invalid_argument("unknown articulator channel '" +
                              std::string(name) + "'");
}

// ---- corpus model -----------------------------------------------------------

std::size_t Corpus::total_frames() const {
  std::size_t n = 0;
  for (const auto& u : utterances) n += u.frames;
  return n;
}

int Corpus::label_of(std::string_view symbol) const {
  for (std::size_t i = 0; i < phoneme_table.size(); ++i) {
    if (phoneme_table[i] == symbol) return static_cast<int>(i);
  }
  return -1;
}

// ---- synthetic spec ----------------------------------------------------------

SyntheticSpec default_synthetic_spec() {
  using C = ArticulatorChannel;
  auto ch = [](C c) { return static_cast<int>(c); };
  SyntheticSpec spec;
  // Targets sit outside the walk bound, so a pinned channel is unambiguous
  // per frame, and a channel's target is canonical: phonemes sharing a
  // channel pull it to the same position. The inventory forms a ring of
  // channel pairs — each phoneme shares one critical channel with the
  // previous phoneme and one with the next. An impostor posture from a ring
  // neighbor (see impostor_prob/impostor_span) then pins three channels of
  // which the shared one says nothing, so telling the true phoneme from the
  // impostor hinges on exactly one critical channel of each; both channels
  // of every phoneme carry discriminative load for one of its confusions.
  spec.phonemes = {
      {"m", {{ch(C::kLlY), 0.72}, {ch(C::kJawY), -0.52}}, {}},
      {"s", {{ch(C::kTtY), 0.70}, {ch(C::kJawY), -0.52}}, {}},
      {"t", {{ch(C::kTtY), 0.70}, {ch(C::kTtX), -0.50}}, {}},
      {"n", {{ch(C::kTdY), 0.72}, {ch(C::kTtX), -0.50}}, {}},
      {"k", {{ch(C::kTdY), 0.72}, {ch(C::kTdX), -0.52}}, {}},
      {"g", {{ch(C::kUlY), -0.70}, {ch(C::kTdX), -0.52}}, {}},
      {"p", {{ch(C::kUlY), -0.70}, {ch(C::kLlX), 0.50}}, {}},
      {"a", {{ch(C::kLlY), 0.72}, {ch(C::kLlX), 0.50}}, {}},
  };
  return spec;
}

void validate_spec(const SyntheticSpec& spec) {
  if (spec.phonemes.empty()) {
    throw std::invalid_argument("spec: 'phonemes' must be nonempty");
  }
  std::set<std::string> seen;
  for (const auto& p : spec.phonemes) {
    if (p.symbol.empty()) {
      throw std::invalid_argument("spec: phoneme with empty 'symbol'");
    }
    if (!seen.insert(p.symbol).second) {
      throw std::invalid_argument("spec: duplicate phoneme symbol '" +
                                  p.symbol + "'");
    }
    if (p.critical.empty() || p.critical.size() > 3) {
      throw std::invalid_argument("spec: phoneme '" + p.symbol +
                                  "' needs 1..3 'critical' channels, has " +
                                  std::to_string(p.critical.size()));
    }
    std::set<int> chans;
    auto check_entry = [&](const CriticalTarget& c, const char* kind) {
      if (c.channel < 0 || c.channel >= static_cast<int>(kNumChannels)) {
        throw std::invalid_argument("spec: phoneme '" + p.symbol + "' has " +
                                    kind + " channel index out of range");
      }
      if (!chans.insert(c.channel).second) {
        throw std::invalid_argument("spec: phoneme '" + p.symbol +
                                    "' repeats channel " +
                                    channel_name(c.channel));
      }
      if (c.target < -1.0 || c.target > 1.0) {
        throw std::invalid_argument("spec: phoneme '" + p.symbol +
                                    "' target for " + channel_name(c.channel) +
                                    " outside [-1,1]");
      }
    };
    for (const auto& c : p.critical) check_entry(c, "critical");
    for (const auto& c : p.passive) check_entry(c, "passive");
  }
  if (!(spec.alpha > 0.0 && spec.alpha < 1.0)) {
    throw std::invalid_argument("spec: 'alpha' must lie in (0,1)");
  }
  if (spec.sigma_a < 0 || spec.sigma_w < 0 || spec.sigma_c < 0) {
    throw std::invalid_argument(
        "spec: 'sigma_a'/'sigma_w'/'sigma_c' must be nonnegative");
  }
  if (spec.walk_bound <= 0.0) {
    throw std::invalid_argument("spec: 'walk_bound' must be positive");
  }
  if (spec.anticipation < 0.0 || spec.anticipation > 1.0) {
    throw std::invalid_argument("spec: 'anticipation' must lie in [0,1]");
  }
  if (spec.impostor_prob < 0.0 || spec.impostor_prob > 1.0) {
    throw std::invalid_argument("spec: 'impostor_prob' must lie in [0,1]");
  }
  if (spec.seg_len_min < 1 || spec.seg_len_max < spec.seg_len_min) {
    throw std::invalid_argument(
        "spec: need 1 <= 'seg_len_min' <= 'seg_len_max'");
  }
  if (!spec.projection.empty()) {
    if (spec.projection.size() != kMfccDim * kNumChannels) {
      throw std::invalid_argument("spec: 'projection' must be 13x12");
    }
    for (const auto& p : spec.phonemes) {
      for (const auto& c : p.critical) {
        bool nonzero = false;
        for (std::size_t r = 0; r < kMfccDim; ++r) {
          if (spec.projection[r * kNumChannels +
                              static_cast<std::size_t>(c.channel)] != 0.0) {
            nonzero = true;
            break;
          }
        }
        if (!nonzero) {
          throw std::invalid_argument(
              "spec: 'projection' column for critical channel " +
              channel_name(c.channel) + " is all zero");
        }
      }
    }
  }
}

std::vector<double> spec_projection(const SyntheticSpec& spec) {
  if (!spec.projection.empty()) return spec.projection;
  // Dominant-diagonal projection: channel c lands mostly on acoustic
  // dimension c, with a little seeded cross-talk and a shared 13th row.
  // A per-frame-readable acoustic map keeps the inverse decode learnable
  // from a desk-scale corpus.
  Rng rng(derive_seed(spec.seed, seed_tag::kProjection));
  std::vector<double> p(kMfccDim * kNumChannels, 0.0);
  for (std::size_t c = 0; c < kNumChannels; ++c) {
    p[c * kNumChannels + c] =
        rng.uniform(0.85, 1.0) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
    const std::size_t other = rng.uniform_index(kNumChannels);
    if (other != c) {
      p[other * kNumChannels + c] += rng.uniform(-0.15, 0.15);
    }
    p[(kMfccDim - 1) * kNumChannels + c] = rng.uniform(-0.15, 0.15);
  }
  return p;
}

// ---- json spec I/O -----------------------------------------------------------

namespace {

void reject_unknown_keys(const json& obj, const std::set<std::string>& known,
                         const std::string& where) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!known.count(it.key())) {
      throw std::invalid_argument("spec: unknown key '" + it.key() + "' in " +
                                  where);
    }
  }
}

}  // namespace

SyntheticSpec load_synthetic_spec(const fs::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("spec: cannot open " + path.string());
  }
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw std::invalid_argument("spec: " + path.string() + ": " + e.what());
  }
  reject_unknown_keys(j,
                      {"phonemes", "alpha", "sigma_a", "sigma_w", "sigma_c",
                       "walk_bound", "anticipation", "impostor_prob",
                       "impostor_span", "seg_len_min", "seg_len_max", "seed",
                       "projection"},
                      "top level");
  SyntheticSpec spec;
  spec.phonemes.clear();
  if (!j.contains("phonemes")) {
    throw std::invalid_argument("spec: missing 'phonemes'");
  }
  for (const auto& jp : j.at("phonemes")) {
    reject_unknown_keys(jp, {"symbol", "critical", "passive"},
                        "phoneme entry");
    PhonemeSpec p;
    p.symbol = jp.at("symbol").get<std::string>();
    for (const auto& jc : jp.at("critical")) {
      reject_unknown_keys(jc, {"channel", "target"}, "critical entry");
      CriticalTarget c;
      c.channel = channel_from_name(jc.at("channel").get<std::string>());
      c.target = jc.at("target").get<double>();
      p.critical.push_back(c);
    }
    if (jp.contains("passive")) {
      for (const auto& jc : jp.at("passive")) {
        reject_unknown_keys(jc, {"channel", "target"}, "passive entry");
        CriticalTarget c;
        c.channel = channel_from_name(jc.at("channel").get<std::string>());
        c.target = jc.at("target").get<double>();
        p.passive.push_back(c);
      }
    }
    spec.phonemes.push_back(std::move(p));
  }
  spec.alpha = j.value("alpha", spec.alpha);
  spec.sigma_a = j.value("sigma_a", spec.sigma_a);
  spec.sigma_w = j.value("sigma_w", spec.sigma_w);
  spec.sigma_c = j.value("sigma_c", spec.sigma_c);
  spec.walk_bound = j.value("walk_bound", spec.walk_bound);
  spec.anticipation = j.value("anticipation", spec.anticipation);
  spec.impostor_prob = j.value("impostor_prob", spec.impostor_prob);
  spec.impostor_span = j.value("impostor_span", spec.impostor_span);
  spec.seg_len_min = j.value("seg_len_min", spec.seg_len_min);
  spec.seg_len_max = j.value("seg_len_max", spec.seg_len_max);
  spec.seed = j.value("seed", spec.seed);
  if (j.contains("projection")) {
    for (const auto& row : j.at("projection")) {
      for (const auto& v : row) spec.projection.push_back(v.get<double>());
    }
  }
  validate_spec(spec);
  return spec;
}

void save_synthetic_spec(const SyntheticSpec& spec, const fs::path& path) {
  json j;
  j["alpha"] = spec.alpha;
  j["sigma_a"] = spec.sigma_a;
  j["sigma_w"] = spec.sigma_w;
  j["sigma_c"] = spec.sigma_c;
  j["walk_bound"] = spec.walk_bound;
  j["anticipation"] = spec.anticipation;
  j["impostor_prob"] = spec.impostor_prob;
  j["impostor_span"] = spec.impostor_span;
  j["seg_len_min"] = spec.seg_len_min;
  j["seg_len_max"] = spec.seg_len_max;
  j["seed"] = spec.seed;
  j["phonemes"] = json::array();
  for (const auto& p : spec.phonemes) {
    json jp;
    jp["symbol"] = p.symbol;
    jp["critical"] = json::array();
    for (const auto& c : p.critical) {
      jp["critical"].push_back(
          {{"channel", channel_name(c.channel)}, {"target", c.target}});
    }
    if (!p.passive.empty()) {
      jp["passive"] = json::array();
      for (const auto& c : p.passive) {
        jp["passive"].push_back(
            {{"channel", channel_name(c.channel)}, {"target", c.target}});
      }
    }
    j["phonemes"].push_back(std::move(jp));
  }
  if (!spec.projection.empty()) {
    json rows = json::array();
    for (std::size_t r = 0; r < kMfccDim; ++r) {
      json row = json::array();
      for (std::size_t c = 0; c < kNumChannels; ++c) {
        row.push_back(spec.projection[r * kNumChannels + c]);
      }
      rows.push_back(std::move(row));
    }
    j["projection"] = std::move(rows);
  }
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("spec: cannot write " + path.string());
  }
  out << j.dump(2) << "\n";
}

// ---- generation ---------------------------------------------------------------

Corpus generate_corpus(const SyntheticSpec& spec, std::size_t n_utterances,
                       std::size_t phones_per_utt) {
  validate_spec(spec);
  if (n_utterances == 0 || phones_per_utt == 0) {
    throw std::invalid_argument("generate_corpus: counts must be positive");
  }
  const std::size_t k = spec.phonemes.size();
  const std::vector<double> proj = spec_projection(spec);

  // Per-phoneme masks and targets, canonical channel order. Pinned =
  // critical plus passive co-movements; only critical channels reach the
  // acoustics.
  std::vector<std::array<bool, kNumChannels>> is_critical(k);
  std::vector<std::array<bool, kNumChannels>> is_pinned(k);
  std::vector<std::array<double, kNumChannels>> targets(k);
  for (std::size_t p = 0; p < k; ++p) {
    is_critical[p].fill(false);
    is_pinned[p].fill(false);
    targets[p].fill(0.0);
    for (const auto& c : spec.phonemes[p].critical) {
      is_critical[p][static_cast<std::size_t>(c.channel)] = true;
      is_pinned[p][static_cast<std::size_t>(c.channel)] = true;
      targets[p][static_cast<std::size_t>(c.channel)] = c.target;
    }
    for (const auto& c : spec.phonemes[p].passive) {
      is_pinned[p][static_cast<std::size_t>(c.channel)] = true;
      targets[p][static_cast<std::size_t>(c.channel)] = c.target;
    }
  }

  Corpus corpus;
  for (const auto& p : spec.phonemes) corpus.phoneme_table.push_back(p.symbol);

  for (std::size_t u = 0; u < n_utterances; ++u) {
    // Independent per-utterance stream: sharded generation stays identical.
    Rng rng(derive_seed(spec.seed, seed_tag::kCorpus, u));
    Utterance utt;
    char idbuf[32];
    std::snprintf(idbuf, sizeof(idbuf), "utt_%05zu", u);
    utt.id = idbuf;
    utt.subject = "synth";

    std::vector<std::size_t> seq(phones_per_utt);
    for (std::size_t s = 0; s < phones_per_utt; ++s) {
      std::size_t pick = rng.uniform_index(k);
      if (s > 0 && k > 1) {
        while (pick == seq[s - 1]) pick = rng.uniform_index(k);
      }
      seq[s] = pick;
    }

    std::array<double, kNumChannels> state;
    for (auto& v : state) v = rng.uniform(-0.5, 0.5);

    for (std::size_t s = 0; s < phones_per_utt; ++s) {
      const std::size_t p = seq[s];
      const std::size_t len = static_cast<std::size_t>(rng.uniform_int(
          static_cast<long>(spec.seg_len_min),
          static_cast<long>(spec.seg_len_max)));
      // Anticipatory coarticulation: the next phoneme's critical channels
      // may already relax toward their upcoming targets. The acoustics mask
      // below still exposes only the current phoneme's channels, so the
      // anticipated signature is invisible to the acoustics.
      const bool anticipate =
          rng.uniform() < spec.anticipation && s + 1 < phones_per_utt;
      const std::size_t next = s + 1 < phones_per_utt ? seq[s + 1] : p;
      // Impostor posture: one other phoneme's critical channels get pinned
      // passively, acoustically invisible.
      const double impostor_u = rng.uniform();
      std::size_t impostor = p;
      bool has_impostor = false;
      if (k > 1 && impostor_u < spec.impostor_prob) {
        if (spec.impostor_span == 0 || 2 * spec.impostor_span >= k - 1) {
          const std::size_t pick = rng.uniform_index(k - 1);
          impostor = pick >= p ? pick + 1 : pick;
        } else {
          // Ring neighborhood of half-width impostor_span around p.
          const std::size_t width = 2 * spec.impostor_span;
          const std::size_t pick = rng.uniform_index(width);
          const long offset = pick < spec.impostor_span
                                  ? -static_cast<long>(spec.impostor_span -
                                                       pick)
                                  : static_cast<long>(pick -
                                                      spec.impostor_span + 1);
          impostor = static_cast<std::size_t>(
              (static_cast<long>(p) + offset + static_cast<long>(k)) %
              static_cast<long>(k));
        }
        has_impostor = true;
      }
      for (std::size_t t = 0; t < len; ++t) {
        for (std::size_t c = 0; c < kNumChannels; ++c) {
          if (is_pinned[p][c]) {
            state[c] = spec.alpha * state[c] +
                       (1.0 - spec.alpha) * targets[p][c] +
                       spec.sigma_c * rng.normal();
          } else if (has_impostor && is_critical[impostor][c]) {
            state[c] = spec.alpha * state[c] +
                       (1.0 - spec.alpha) * targets[impostor][c] +
                       spec.sigma_c * rng.normal();
          } else if (anticipate && is_pinned[next][c]) {
            state[c] = spec.alpha * state[c] +
                       (1.0 - spec.alpha) * targets[next][c] +
                       spec.sigma_c * rng.normal();
          } else {
            // Reflect rather than clamp: a clamped walk sticks to the bound
            // and its within-segment variance collapses there.
            double nx = state[c] + spec.sigma_w * rng.normal();
            const double b = spec.walk_bound;
            while (nx > b || nx < -b) nx = nx > b ? 2 * b - nx : -2 * b - nx;
            state[c] = nx;
          }
        }
        utt.ema.insert(utt.ema.end(), state.begin(), state.end());
        // Acoustics see only the phoneme's critical channels.
        for (std::size_t r = 0; r < kMfccDim; ++r) {
          double acc = 0.0;
          for (std::size_t c = 0; c < kNumChannels; ++c) {
            if (is_critical[p][c]) {
              acc += proj[r * kNumChannels + c] * state[c];
            }
          }
          utt.mfcc.push_back(acc + spec.sigma_a * rng.normal());
        }
        utt.labels.push_back(static_cast<int>(p));
      }
    }
    utt.frames = utt.labels.size();
    corpus.utterances.push_back(std::move(utt));
  }
  return corpus;
}

std::vector<int> planted_oracle(const SyntheticSpec& spec,
                                std::string_view phoneme) {
  for (const auto& p : spec.phonemes) {
    if (p.symbol == phoneme) {
      std::vector<CriticalTarget> sorted = p.critical;
      std::stable_sort(sorted.begin(), sorted.end(),
                       [](const CriticalTarget& a, const CriticalTarget& b) {
                         if (std::abs(a.target) != std::abs(b.target)) {
                           return std::abs(a.target) > std::abs(b.target);
                         }
                         return a.channel < b.channel;
                       });
      std::vector<int> out;
      for (const auto& c : sorted) out.push_back(c.channel);
      return out;
    }
  }
  throw std::invalid_argument("planted_oracle: unknown phoneme '" +
                              std::string(phoneme) + "'");
}

void save_oracle(const SyntheticSpec& spec, const fs::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("oracle: cannot write " + path.string());
  }
  for (const auto& p : spec.phonemes) {
    out << p.symbol;
    for (int c : planted_oracle(spec, p.symbol)) {
      out << " " << channel_name(c);
    }
    out << "\n";
  }
}

std::vector<std::pair<std::string, std::vector<int>>> load_oracle(
    const fs::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("oracle: cannot open " + path.string());
  }
  std::vector<std::pair<std::string, std::vector<int>>> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto toks = split_ws(line);
    if (toks.empty()) continue;
    if (toks.size() < 2) {
      throw std::runtime_error("oracle: " + path.string() + ":" +
                               std::to_string(lineno) +
                               ": expected '<phoneme> <channel>...'");
    }
    std::vector<int> chans;
    for (std::size_t i = 1; i < toks.size(); ++i) {
      chans.push_back(channel_from_name(toks[i]));
    }
    out.emplace_back(toks[0], std::move(chans));
  }
  return out;
}

// ---- corpus I/O ------------------------------------------------------------

namespace {

std::string join(const std::vector<std::string>& parts, char sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

}  // namespace

std::filesystem::path write_corpus(const Corpus& corpus, const fs::path& dir) {
  fs::create_directories(dir);
  const std::string table = join(corpus.phoneme_table, ',');
  std::vector<std::string> entries;
  for (const auto& u : corpus.utterances) {
    const std::string fname = u.id + ".txt";
    std::ofstream out(dir / fname);
    if (!out) {
      throw std::runtime_error("corpus: cannot write " +
                               (dir / fname).string());
    }
    out << "frames=" << u.frames << " subject=" << u.subject
        << " phoneme_table=" << table << "\n";
    for (std::size_t f = 0; f < u.frames; ++f) {
      std::string line;
      for (std::size_t j = 0; j < kMfccDim; ++j) {
        line += format_exact(u.mfcc[f * kMfccDim + j]);
        line += ' ';
      }
      for (std::size_t j = 0; j < kNumChannels; ++j) {
        line += format_exact(u.ema[f * kNumChannels + j]);
        line += ' ';
      }
      line += std::to_string(u.labels[f]);
      out << line << "\n";
    }
    entries.push_back(fname);
  }
  const fs::path manifest = dir / "manifest.txt";
  std::ofstream mf(manifest);
  if (!mf) {
    throw std::runtime_error("corpus: cannot write " + manifest.string());
  }
  for (const auto& e : entries) mf << e << "\n";
  return manifest;
}

namespace {

Utterance load_utterance(const fs::path& path,
                         std::vector<std::string>* table_out) {
  std::ifstream in(path);
  if (!in) {
    throw std::runtime_error("corpus: missing utterance file " +
                             path.string());
  }
  const std::string where = path.string();
  std::string line;
  if (!std::getline(in, line)) {
    throw std::runtime_error(where + ":1: empty utterance file");
  }
  std::size_t frames = 0;
  Utterance utt;
  utt.id = path.stem().string();
  bool saw_frames = false, saw_table = false;
  for (const auto& tok : split_ws(line)) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error(where + ":1: malformed header token '" + tok +
                               "'");
    }
    const std::string key = tok.substr(0, eq);
    const std::string val = tok.substr(eq + 1);
    if (key == "frames") {
      frames = static_cast<std::size_t>(parse_long(val, where + ":1"));
      saw_frames = true;
    } else if (key == "subject") {
      utt.subject = val;
    } else if (key == "phoneme_table") {
      *table_out = split_char(val, ',');
      saw_table = true;
    } else {
      throw std::runtime_error(where + ":1: unknown header key '" + key +
                               "'");
    }
  }
  if (!saw_frames || !saw_table) {
    throw std::runtime_error(where +
                             ":1: header needs frames= and phoneme_table=");
  }
  const std::size_t k = table_out->size();
  utt.mfcc.reserve(frames * kMfccDim);
  utt.ema.reserve(frames * kNumChannels);
  utt.labels.reserve(frames);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto toks = split_ws(line);
    const std::string at = where + ":" + std::to_string(lineno);
    if (toks.size() != kMfccDim + kNumChannels + 1) {
      throw std::runtime_error(at + ": expected 26 fields, got " +
                               std::to_string(toks.size()));
    }
    for (std::size_t j = 0; j < kMfccDim; ++j) {
      utt.mfcc.push_back(parse_double(toks[j], at));
    }
    for (std::size_t j = 0; j < kNumChannels; ++j) {
      utt.ema.push_back(parse_double(toks[kMfccDim + j], at));
    }
    const long label = parse_long(toks[kMfccDim + kNumChannels], at);
    if (label < 0 || static_cast<std::size_t>(label) >= k) {
      throw std::runtime_error(at + ": label " + std::to_string(label) +
                               " outside phoneme table of size " +
                               std::to_string(k));
    }
    utt.labels.push_back(static_cast<int>(label));
  }
  if (utt.labels.size() != frames) {
    throw std::runtime_error(where + ": header says frames=" +
                             std::to_string(frames) + " but found " +
                             std::to_string(utt.labels.size()) + " rows");
  }
  utt.frames = frames;
  return utt;
}

}  // namespace

Corpus load_corpus(const fs::path& manifest_path) {
  std::ifstream in(manifest_path);
  if (!in) {
    throw std::runtime_error("corpus: cannot open manifest " +
                             manifest_path.string());
  }
  const fs::path base = manifest_path.parent_path();
  Corpus corpus;
  std::string line;
  while (std::getline(in, line)) {
    const std::string entry = trim(line);
    if (entry.empty()) continue;
    fs::path p(entry);
    if (p.is_relative()) p = base / p;
    std::vector<std::string> table;
    Utterance utt = load_utterance(p, &table);
    if (corpus.utterances.empty()) {
      corpus.phoneme_table = table;
    } else if (corpus.phoneme_table != table) {
      throw std::runtime_error("corpus: phoneme table in " + p.string() +
                               " differs from the manifest's first utterance");
    }
    corpus.utterances.push_back(std::move(utt));
  }
  if (corpus.utterances.empty()) {
    throw std::runtime_error("corpus: manifest " + manifest_path.string() +
                             " lists no utterances");
  }
  return corpus;
}

// ---- batching -----------------------------------------------------------

std::vector<Batch> make_batches(const Corpus& corpus, std::size_t batch_size,
                                std::optional<std::uint64_t> shuffle_seed,
                                bool bucket_by_length) {
  if (batch_size < 1) {
    throw std::invalid_argument("make_batches: batch_size must be >= 1");
  }
  if (corpus.utterances.empty()) {
    throw std::invalid_argument("make_batches: empty corpus");
  }
  std::vector<std::size_t> order(corpus.utterances.size());
  std::iota(order.begin(), order.end(), 0);
  if (shuffle_seed) {
    Rng rng(derive_seed(*shuffle_seed, seed_tag::kShuffle));
    rng.shuffle(order);
  }
  if (bucket_by_length) {
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) {
                       return corpus.utterances[a].frames <
                              corpus.utterances[b].frames;
                     });
  }
  std::vector<Batch> batches;
  for (std::size_t at = 0; at < order.size(); at += batch_size) {
    const std::size_t n = std::min(batch_size, order.size() - at);
    Batch b;
    b.size = n;
    for (std::size_t i = 0; i < n; ++i) {
      b.max_frames = std::max(b.max_frames,
                              corpus.utterances[order[at + i]].frames);
    }
    b.mfcc.assign(n * b.max_frames * kMfccDim, 0.0);
    b.ema.assign(n * b.max_frames * kNumChannels, 0.0);
    b.labels.assign(n * b.max_frames, 0);
    b.mask.assign(n * b.max_frames, 0);
    for (std::size_t i = 0; i < n; ++i) {
      const Utterance& u = corpus.utterances[order[at + i]];
      b.ids.push_back(u.id);
      std::copy(u.mfcc.begin(), u.mfcc.end(),
                b.mfcc.begin() +
                    static_cast<std::ptrdiff_t>(i * b.max_frames * kMfccDim));
      std::copy(u.ema.begin(), u.ema.end(),
                b.ema.begin() + static_cast<std::ptrdiff_t>(
                                    i * b.max_frames * kNumChannels));
      std::copy(u.labels.begin(), u.labels.end(),
                b.labels.begin() + static_cast<std::ptrdiff_t>(
                                       i * b.max_frames));
      std::fill_n(b.mask.begin() + static_cast<std::ptrdiff_t>(
                                       i * b.max_frames),
                  u.frames, std::uint8_t{1});
    }
    batches.push_back(std::move(b));
  }
  return batches;
}

// ---- z-scoring -----------------------------------------------------------

EmaNormStats EmaNormStats::identity() {
  EmaNormStats s;
  s.mean.fill(0.0);
  s.stdev.fill(1.0);
  return s;
}

EmaNormStats compute_ema_stats(const Corpus& corpus) {
  EmaNormStats s;
  s.mean.fill(0.0);
  s.stdev.fill(0.0);
  const std::size_t frames = corpus.total_frames();
  if (frames == 0) {
    throw std::invalid_argument("compute_ema_stats: corpus has no frames");
  }
  for (const auto& u : corpus.utterances) {
    for (std::size_t f = 0; f < u.frames; ++f) {
      for (std::size_t c = 0; c < kNumChannels; ++c) {
        s.mean[c] += u.ema[f * kNumChannels + c];
      }
    }
  }
  for (auto& m : s.mean) m /= static_cast<double>(frames);
  for (const auto& u : corpus.utterances) {
    for (std::size_t f = 0; f < u.frames; ++f) {
      for (std::size_t c = 0; c < kNumChannels; ++c) {
        const double d = u.ema[f * kNumChannels + c] - s.mean[c];
        s.stdev[c] += d * d;
      }
    }
  }
  for (auto& v : s.stdev) {
    v = std::sqrt(v / static_cast<double>(frames));
    if (v <= 1e-12) v = 1.0;  // constant channel carries no scale
  }
  return s;
}

void apply_ema_stats(Corpus& corpus, const EmaNormStats& stats) {
  for (auto& u : corpus.utterances) {
    for (std::size_t f = 0; f < u.frames; ++f) {
      for (std::size_t c = 0; c < kNumChannels; ++c) {
        auto& v = u.ema[f * kNumChannels + c];
        v = (v - stats.mean[c]) / stats.stdev[c];
      }
    }
  }
}

}  // namespace artic
