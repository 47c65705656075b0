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

#include <CLI11.hpp>
#include <iostream>

#include "artic/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{
      "artic: unsupervised discovery of phoneme-specific critical "
      "articulators via weighted articulatory phoneme classification"};
  app.require_subcommand(1);

  artic::GenerateArgs gen;
  std::string gen_spec, gen_out;
  std::uint64_t gen_seed = 0;
  bool gen_seed_set = false;
  auto* generate =
      app.add_subcommand("generate", "generate a synthetic corpus");
  generate->add_option("--spec", gen_spec,
                       "synthetic spec JSON (built-in default when omitted)");
  generate->add_option("--out", gen_out, "output directory")->required();
  generate->add_option("--seed", gen_seed, "override the spec's seed")
      ->each([&](const std::string&) { gen_seed_set = true; });
  generate->add_option("--utterances", gen.utterances,
                       "number of utterances");
  generate->add_option("--phones-per-utt", gen.phones_per_utt,
                       "segments per utterance");

  artic::TrainArgs tr;
  std::string tr_manifest, tr_eval, tr_config, tr_out;
  auto* train_cmd = app.add_subcommand("train", "train the pipeline");
  train_cmd->add_option("--manifest", tr_manifest, "training corpus manifest")
      ->required();
  train_cmd->add_option("--eval", tr_eval, "held-out corpus manifest");
  train_cmd->add_option("--config", tr_config, "key = value config file");
  train_cmd->add_option("--set", tr.overrides,
                        "config override key=value (repeatable)");
  train_cmd->add_option("--out", tr_out, "output directory")->required();

  artic::AnalyzeArgs an;
  std::string an_ckpt, an_manifest, an_out, an_oracle;
  auto* analyze_cmd = app.add_subcommand(
      "analyze", "per-phoneme criticality report from a checkpoint");
  analyze_cmd->add_option("--checkpoint", an_ckpt, "checkpoint file")
      ->required();
  analyze_cmd->add_option("--manifest", an_manifest, "corpus manifest")
      ->required();
  analyze_cmd->add_option("--out", an_out, "output directory")->required();
  analyze_cmd->add_option("--resample", an.resample,
                          "frames per resampled segment trajectory");
  analyze_cmd->add_option("--top-k", an.top_k, "channels per ranking");
  analyze_cmd->add_flag("--no-ste", an.no_ste,
                        "analyze the pure-inference path (no ground-truth "
                        "substitution)");
  analyze_cmd->add_option("--oracle", an_oracle,
                          "planted-channel oracle file (default: oracle.txt "
                          "next to the manifest)");

  artic::GradcheckArgs gc;
  auto* gradcheck_cmd = app.add_subcommand(
      "gradcheck", "finite-difference verification of every operator");
  gradcheck_cmd->add_option("--size", gc.size, "micro|small");
  gradcheck_cmd
      ->add_flag("--corrupt", gc.corrupt,
                 "verification hook: corrupt a backward pass; the run must "
                 "then fail")
      ->group("");  // hidden from normal help

  auto* config_cmd =
      app.add_subcommand("config", "list configuration keys and defaults");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*generate) {
      if (!gen_spec.empty()) gen.spec_file = gen_spec;
      gen.out_dir = gen_out;
      if (gen_seed_set) gen.seed = gen_seed;
      return artic::run_generate(gen, std::cout);
    }
    if (*train_cmd) {
      tr.manifest = tr_manifest;
      if (!tr_eval.empty()) tr.eval_manifest = tr_eval;
      if (!tr_config.empty()) tr.config_file = tr_config;
      tr.out_dir = tr_out;
      return artic::run_train(tr, std::cout);
    }
    if (*analyze_cmd) {
      an.checkpoint = an_ckpt;
      an.manifest = an_manifest;
      an.out_dir = an_out;
      if (!an_oracle.empty()) an.oracle_file = an_oracle;
      return artic::run_analyze(an, std::cout);
    }
    if (*gradcheck_cmd) {
      return artic::run_gradcheck(gc, std::cout);
    }
    if (*config_cmd) {
      for (const auto& doc : artic::config_key_docs()) {
        std::cout << doc.key << " = " << doc.default_value << "\n    "
                  << doc.doc << "\n";
      }
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
