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

#include "artic/config.hpp"

#include <fstream>
#include <stdexcept>

#include "artic/textio.hpp"

namespace artic {

PipelineConfig RunConfig::pipeline_config(std::size_t num_classes) const {
  PipelineConfig cfg;
  cfg.num_classes = num_classes;
  cfg.enc.layers = layers;
  cfg.enc.heads = heads;
  cfg.enc.d_model = d_model;
  cfg.enc.d_ff = d_ff;
  cfg.enc.max_len = max_len;
  cfg.dropout_p = dropout_p;
  cfg.lambda_aai = lambda_aai;
  cfg.lambda_fpc = lambda_fpc;
  cfg.share_aai_awp_trunk = share_trunk;
  cfg.bypass_weights = bypass_weights;
  if (weight_norm_axis == "frame") {
    cfg.weight_norm_axis = MinMaxAxis::kPerFrame;
  } else if (weight_norm_axis == "time") {
    cfg.weight_norm_axis = MinMaxAxis::kPerChannel;
  } else {
    throw std::invalid_argument(
        "config: weight_norm_axis must be 'frame' or 'time', got '" +
        weight_norm_axis + "'");
  }
  return cfg;
}

const std::vector<ConfigKeyDoc>& config_key_docs() {
  static const std::vector<ConfigKeyDoc> docs = {
      {"epochs", "60", "training epochs"},
      {"batch_size", "8", "utterances per padded batch"},
      {"learning_rate", "0.001", "Adam learning rate"},
      {"beta1", "0.9", "Adam first-moment decay"},
      {"beta2", "0.999", "Adam second-moment decay"},
      {"adam_eps", "1e-08", "Adam denominator epsilon"},
      {"grad_clip", "0", "global-norm gradient clip; 0 disables"},
      {"seed", "1", "master seed for init/shuffle/dropout streams"},
      {"eval_every", "1", "epochs between held-out evaluations"},
      {"bucket_by_length", "false", "sort utterances by length into batches"},
      {"layers", "2", "encoder layers per network"},
      {"heads", "2", "attention heads"},
      {"d_model", "64", "encoder width"},
      {"d_ff", "128", "feed-forward width"},
      {"max_len", "512", "positional table length"},
      {"lambda_aai", "1", "weight of the articulatory MSE loss"},
      {"lambda_fpc", "1", "weight of the phoneme CE loss"},
      {"dropout_p", "0.5", "dropout on raw articulator weights"},
      {"share_trunk", "false", "share the AAI encoder with the AWP head"},
      {"bypass_weights", "false",
       "ablation: force all articulator weights to 1"},
      {"weight_norm_axis", "frame",
       "min-max across channels per frame, or across time ('frame'|'time')"},
  };
  return docs;
}

namespace {

bool parse_bool(const std::string& value, const std::string& key) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw std::invalid_argument("config: key '" + key +
                              "' expects true/false, got '" + value + "'");
}

std::size_t parse_size(const std::string& value, const std::string& key) {
  const long v = parse_long(value, "config: key '" + key + "'");
  if (v < 0) {
    throw std::invalid_argument("config: key '" + key +
                                "' must be nonnegative");
  }
  return static_cast<std::size_t>(v);
}

void apply_kv(RunConfig& cfg, const std::string& key,
              const std::string& value) {
  const std::string where = "config: key '" + key + "'";
  if (key == "epochs") {
    cfg.train.epochs = parse_size(value, key);
  } else if (key == "batch_size") {
    cfg.train.batch_size = parse_size(value, key);
  } else if (key == "learning_rate") {
    cfg.train.learning_rate = parse_double(value, where);
  } else if (key == "beta1") {
    cfg.train.beta1 = parse_double(value, where);
  } else if (key == "beta2") {
    cfg.train.beta2 = parse_double(value, where);
  } else if (key == "adam_eps") {
    cfg.train.adam_eps = parse_double(value, where);
  } else if (key == "grad_clip") {
    cfg.train.grad_clip = parse_double(value, where);
  } else if (key == "seed") {
    cfg.train.seed = static_cast<std::uint64_t>(parse_size(value, key));
  } else if (key == "eval_every") {
    cfg.train.eval_every = parse_size(value, key);
  } else if (key == "bucket_by_length") {
    cfg.train.bucket_by_length = parse_bool(value, key);
  } else if (key == "layers") {
    cfg.layers = parse_size(value, key);
  } else if (key == "heads") {
    cfg.heads = parse_size(value, key);
  } else if (key == "d_model") {
    cfg.d_model = parse_size(value, key);
  } else if (key == "d_ff") {
    cfg.d_ff = parse_size(value, key);
  } else if (key == "max_len") {
    cfg.max_len = parse_size(value, key);
  } else if (key == "lambda_aai") {
    cfg.lambda_aai = parse_double(value, where);
  } else if (key == "lambda_fpc") {
    cfg.lambda_fpc = parse_double(value, where);
  } else if (key == "dropout_p") {
    cfg.dropout_p = parse_double(value, where);
  } else if (key == "share_trunk") {
    cfg.share_trunk = parse_bool(value, key);
  } else if (key == "bypass_weights") {
    cfg.bypass_weights = parse_bool(value, key);
  } else if (key == "weight_norm_axis") {
    cfg.weight_norm_axis = value;
  } else {
    throw std::invalid_argument("config: unknown key '" + key + "'");
  }
}

}  // namespace

RunConfig parse_run_config(const std::optional<std::filesystem::path>& file,
                           const std::vector<std::string>& overrides) {
  RunConfig cfg;
  if (file) {
    std::ifstream in(*file);
    if (!in) {
      throw std::runtime_error("config: cannot open " + file->string());
    }
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const std::string stripped = trim(line);
      if (stripped.empty() || stripped[0] == '#') continue;
      const auto eq = stripped.find('=');
      if (eq == std::string::npos) {
        throw std::invalid_argument("config: " + file->string() + ":" +
                                    std::to_string(lineno) +
                                    ": expected 'key = value'");
      }
      apply_kv(cfg, trim(stripped.substr(0, eq)),
               trim(stripped.substr(eq + 1)));
    }
  }
  for (const auto& ov : overrides) {
    const auto eq = ov.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config: override '" + ov +
                                  "' is not key=value");
    }
    apply_kv(cfg, trim(ov.substr(0, eq)), trim(ov.substr(eq + 1)));
  }
  return cfg;
}

std::string config_echo(const RunConfig& cfg) {
  std::string out;
  auto kv = [&out](const std::string& k, const std::string& v) {
    out += k + " = " + v + "\n";
  };
  kv("epochs", std::to_string(cfg.train.epochs));
  kv("batch_size", std::to_string(cfg.train.batch_size));
  kv("learning_rate", format_g12(cfg.train.learning_rate));
  kv("beta1", format_g12(cfg.train.beta1));
  kv("beta2", format_g12(cfg.train.beta2));
  kv("adam_eps", format_g12(cfg.train.adam_eps));
  kv("grad_clip", format_g12(cfg.train.grad_clip));
  kv("seed", std::to_string(cfg.train.seed));
  kv("eval_every", std::to_string(cfg.train.eval_every));
  kv("bucket_by_length", cfg.train.bucket_by_length ? "true" : "false");
  kv("layers", std::to_string(cfg.layers));
  kv("heads", std::to_string(cfg.heads));
  kv("d_model", std::to_string(cfg.d_model));
  kv("d_ff", std::to_string(cfg.d_ff));
  kv("max_len", std::to_string(cfg.max_len));
  kv("lambda_aai", format_g12(cfg.lambda_aai));
  kv("lambda_fpc", format_g12(cfg.lambda_fpc));
  kv("dropout_p", format_g12(cfg.dropout_p));
  kv("share_trunk", cfg.share_trunk ? "true" : "false");
  kv("bypass_weights", cfg.bypass_weights ? "true" : "false");
  kv("weight_norm_axis", cfg.weight_norm_axis);
  return out;
}

}  // namespace artic
