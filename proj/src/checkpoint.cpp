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

#include <bit>
#include <cstring>
#include <fstream>

#include "artic/train.hpp"

namespace artic {

namespace {

constexpr char kMagic[8] = {'A', 'R', 'T', 'C', 'K', 'P', 'T', '1'};
constexpr std::uint32_t kVersion = 1;

// All multi-byte fields are serialized little-endian regardless of host.
void put_u64(std::ostream& out, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 8);
}

void put_u32(std::ostream& out, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 4);
}

void put_u8(std::ostream& out, std::uint8_t v) {
  out.put(static_cast<char>(v));
}

void put_f64(std::ostream& out, double v) {
  put_u64(out, std::bit_cast<std::uint64_t>(v));
}

void put_str(std::ostream& out, const std::string& s) {
  put_u64(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

void put_f64_span(std::ostream& out, std::span<const double> v) {
  put_u64(out, v.size());
  for (double x : v) put_f64(out, x);
}

struct Reader {
  std::ifstream in;
  std::string path;

  void fail(const std::string& why) const {
    throw std::runtime_error("checkpoint: " + path + ": " + why);
  }
  void read(char* dst, std::size_t n) {
    in.read(dst, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in.gcount()) != n) fail("truncated file");
  }
  std::uint64_t u64() {
    char b[8];
    read(b, 8);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) {
      v = (v << 8) | static_cast<std::uint8_t>(b[i]);
    }
    return v;
  }
  std::uint32_t u32() {
    char b[4];
    read(b, 4);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) {
      v = (v << 8) | static_cast<std::uint8_t>(b[i]);
    }
    return v;
  }
  std::uint8_t u8() {
    char b;
    read(&b, 1);
    return static_cast<std::uint8_t>(b);
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const std::uint64_t n = u64();
    std::string s(n, '\0');
    read(s.data(), n);
    return s;
  }
  std::vector<double> f64_vec() {
    const std::uint64_t n = u64();
    std::vector<double> v(n);
    for (auto& x : v) x = f64();
    return v;
  }
};

}  // namespace

void save_checkpoint(const std::filesystem::path& path,
                     const Pipeline& pipeline,
                     const std::vector<std::string>& phoneme_table,
                     const EmaNormStats& stats, const AdamState* adam,
                     std::uint64_t epoch, const std::string& config_echo) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("checkpoint: cannot write " + path.string());
  }
  out.write(kMagic, sizeof(kMagic));
  put_u32(out, kVersion);
  put_str(out, config_echo);

  put_u64(out, phoneme_table.size());
  for (const auto& s : phoneme_table) put_str(out, s);

  for (double v : stats.mean) put_f64(out, v);
  for (double v : stats.stdev) put_f64(out, v);

  const PipelineConfig& cfg = pipeline.config();
  put_u64(out, cfg.mfcc_dim);
  put_u64(out, cfg.ema_dim);
  put_u64(out, cfg.num_classes);
  put_u64(out, cfg.enc.layers);
  put_u64(out, cfg.enc.heads);
  put_u64(out, cfg.enc.d_model);
  put_u64(out, cfg.enc.d_ff);
  put_u64(out, cfg.enc.max_len);
  put_f64(out, cfg.dropout_p);
  put_f64(out, cfg.lambda_aai);
  put_f64(out, cfg.lambda_fpc);
  put_u8(out, cfg.share_aai_awp_trunk ? 1 : 0);
  put_u8(out, cfg.weight_norm_axis == MinMaxAxis::kPerChannel ? 1 : 0);
  put_u8(out, cfg.bypass_weights ? 1 : 0);

  put_u64(out, epoch);

  ParamRegistry params = pipeline.parameters();
  put_u64(out, params.size());
  for (const auto& [name, t] : params.items()) {
    put_str(out, name);
    put_u64(out, t.ndim());
    for (std::size_t d = 0; d < t.ndim(); ++d) put_u64(out, t.dim(d));
    put_f64_span(out, t.values());
  }

  put_u8(out, adam != nullptr ? 1 : 0);
  if (adam != nullptr) {
    if (adam->m.size() != params.size()) {
      throw std::invalid_argument(
          "checkpoint: optimizer state does not match parameters");
    }
    put_u64(out, adam->step);
    for (std::size_t i = 0; i < params.size(); ++i) {
      put_f64_span(out, adam->m[i]);
      put_f64_span(out, adam->v[i]);
    }
  }
  if (!out) {
    throw std::runtime_error("checkpoint: write failed for " + path.string());
  }
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  Reader r;
  r.path = path.string();
  r.in.open(path, std::ios::binary);
  if (!r.in) r.fail("cannot open");

  char magic[8];
  r.read(magic, 8);
  if (std::memcmp(magic, kMagic, 8) != 0) r.fail("bad magic");
  const std::uint32_t version = r.u32();
  if (version != kVersion) {
    r.fail("unsupported format version " + std::to_string(version));
  }

  LoadedCheckpoint ck;
  ck.config_echo = r.str();
  const std::uint64_t n_phones = r.u64();
  for (std::uint64_t i = 0; i < n_phones; ++i) {
    ck.phoneme_table.push_back(r.str());
  }
  for (auto& v : ck.stats.mean) v = r.f64();
  for (auto& v : ck.stats.stdev) v = r.f64();

  ck.pcfg.mfcc_dim = r.u64();
  ck.pcfg.ema_dim = r.u64();
  ck.pcfg.num_classes = r.u64();
  ck.pcfg.enc.layers = r.u64();
  ck.pcfg.enc.heads = r.u64();
  ck.pcfg.enc.d_model = r.u64();
  ck.pcfg.enc.d_ff = r.u64();
  ck.pcfg.enc.max_len = r.u64();
  ck.pcfg.dropout_p = r.f64();
  ck.pcfg.lambda_aai = r.f64();
  ck.pcfg.lambda_fpc = r.f64();
  ck.pcfg.share_aai_awp_trunk = r.u8() != 0;
  ck.pcfg.weight_norm_axis =
      r.u8() != 0 ? MinMaxAxis::kPerChannel : MinMaxAxis::kPerFrame;
  ck.pcfg.bypass_weights = r.u8() != 0;

  ck.epoch = r.u64();

  Rng init_rng(0);  // values are overwritten below
  ck.pipeline = std::make_unique<Pipeline>(ck.pcfg, init_rng);
  ParamRegistry params = ck.pipeline->parameters();

  const std::uint64_t n_params = r.u64();
  if (n_params != params.size()) {
    r.fail("parameter count " + std::to_string(n_params) +
           " does not match the rebuilt pipeline's " +
           std::to_string(params.size()));
  }
  for (std::uint64_t i = 0; i < n_params; ++i) {
    const std::string name = r.str();
    if (name != params.items()[i].first) {
      r.fail("parameter '" + name + "' does not match expected '" +
             params.items()[i].first + "'");
    }
    Tensor t = params.items()[i].second;
    const std::uint64_t ndim = r.u64();
    Shape shape(ndim);
    for (auto& d : shape) d = r.u64();
    if (shape != t.shape()) r.fail("shape mismatch for '" + name + "'");
    std::vector<double> vals = r.f64_vec();
    if (vals.size() != t.numel()) r.fail("size mismatch for '" + name + "'");
    std::copy(vals.begin(), vals.end(), t.values_mut().begin());
  }

  ck.has_adam = r.u8() != 0;
  if (ck.has_adam) {
    ck.adam.step = r.u64();
    for (std::uint64_t i = 0; i < n_params; ++i) {
      ck.adam.m.push_back(r.f64_vec());
      ck.adam.v.push_back(r.f64_vec());
    }
  }
  return ck;
}

}  // namespace artic
