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
#include <optional>
#include <string>
#include <vector>

#include "artic/train.hpp"

namespace artic {

// Flat key=value run configuration: a text file plus command-line overrides,
// every key documented with its default. Unknown keys are rejected.
struct RunConfig {
  TrainConfig train;
  std::size_t layers = 2;
  std::size_t heads = 2;
  std::size_t d_model = 64;
  std::size_t d_ff = 128;
  std::size_t max_len = 512;
  double lambda_aai = 1.0;
  double lambda_fpc = 1.0;
  double dropout_p = 0.5;
  bool share_trunk = false;
  bool bypass_weights = false;
  std::string weight_norm_axis = "frame";  // "frame" or "time"

  PipelineConfig pipeline_config(std::size_t num_classes) const;
};

struct ConfigKeyDoc {
  std::string key;
  std::string default_value;
  std::string doc;
};

const std::vector<ConfigKeyDoc>& config_key_docs();

// Applies `key = value` lines from `file` (when given), then the overrides
// (each "key=value"). Throws naming the offending key or line.
RunConfig parse_run_config(
    const std::optional<std::filesystem::path>& file,
    const std::vector<std::string>& overrides);

// Full effective configuration as key = value text (all keys, resolved).
std::string config_echo(const RunConfig& cfg);

}  // namespace artic
