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

#include <iosfwd>
#include <optional>

#include "artic/analyze.hpp"
#include "artic/config.hpp"

namespace artic {

struct GenerateArgs {
  std::optional<std::filesystem::path> spec_file;  // default spec when unset
  std::filesystem::path out_dir;
  std::optional<std::uint64_t> seed;  // overrides the spec's seed
  std::size_t utterances = 200;
  std::size_t phones_per_utt = 6;
};

int run_generate(const GenerateArgs& args, std::ostream& out);

struct TrainArgs {
  std::filesystem::path manifest;
  std::optional<std::filesystem::path> eval_manifest;
  std::optional<std::filesystem::path> config_file;
  std::vector<std::string> overrides;  // key=value
  std::filesystem::path out_dir;
};

int run_train(const TrainArgs& args, std::ostream& out);

struct AnalyzeArgs {
  std::filesystem::path checkpoint;
  std::filesystem::path manifest;
  std::filesystem::path out_dir;
  std::size_t resample = 10;
  std::size_t top_k = 3;
  bool no_ste = false;
  // Defaults to oracle.txt next to the manifest when present.
  std::optional<std::filesystem::path> oracle_file;
};

int run_analyze(const AnalyzeArgs& args, std::ostream& out);

struct GradcheckArgs {
  std::string size = "micro";  // micro | small
  bool corrupt = false;        // verification hook: must force a failure
};

int run_gradcheck(const GradcheckArgs& args, std::ostream& out);

}  // namespace artic
