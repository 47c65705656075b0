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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "artic/cli.hpp"
#include "artic/textio.hpp"

using namespace artic;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
  fs::path p = fs::temp_directory_path() / ("artic_cli_" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  REQUIRE(static_cast<bool>(in));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> non_empty_lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) {
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

}  // namespace

TEST_CASE("generate is byte-deterministic for a fixed seed") {
  fs::path a = temp_dir("gen_a");
  fs::path b = temp_dir("gen_b");
  std::ostringstream sink;
  GenerateArgs args;
  args.utterances = 5;
  args.phones_per_utt = 3;
  args.seed = 42;
  args.out_dir = a;
  CHECK(run_generate(args, sink) == 0);
  args.out_dir = b;
  CHECK(run_generate(args, sink) == 0);
  for (const auto& entry : fs::directory_iterator(a)) {
    const fs::path rel = entry.path().filename();
    CHECK(slurp(a / rel) == slurp(b / rel));
  }
}

TEST_CASE("generate honors the utterance count and writes a valid oracle") {
  fs::path dir = temp_dir("gen_one");
  std::ostringstream sink;
  GenerateArgs args;
  args.utterances = 1;
  args.phones_per_utt = 3;
  args.out_dir = dir;
  CHECK(run_generate(args, sink) == 0);
  CHECK(non_empty_lines(slurp(dir / "manifest.txt")).size() == 1);

  SyntheticSpec spec = default_synthetic_spec();
  auto oracle = load_oracle(dir / "oracle.txt");
  REQUIRE(oracle.size() == spec.phonemes.size());
  for (const auto& [sym, chans] : oracle) {
    CHECK(chans == planted_oracle(spec, sym));
  }
}

TEST_CASE("train with zero epochs preserves the seeded initialization") {
  fs::path corpus_dir = temp_dir("train0_corpus");
  std::ostringstream sink;
  GenerateArgs gen;
  gen.utterances = 4;
  gen.phones_per_utt = 3;
  gen.out_dir = corpus_dir;
  REQUIRE(run_generate(gen, sink) == 0);

  fs::path out = temp_dir("train0_out");
  TrainArgs tr;
  tr.manifest = corpus_dir / "manifest.txt";
  tr.out_dir = out;
  tr.overrides = {"epochs=0", "d_model=16", "d_ff=32", "layers=1", "seed=9"};
  REQUIRE(run_train(tr, sink) == 0);

  LoadedCheckpoint ck = load_checkpoint(out / "checkpoint.bin");
  CHECK(ck.epoch == 0);

  // Rebuild the same initialization independently.
  RunConfig cfg = parse_run_config(std::nullopt, tr.overrides);
  Rng init_rng(derive_seed(9, seed_tag::kParamInit));
  Pipeline fresh(cfg.pipeline_config(8), init_rng);
  ParamRegistry a = ck.pipeline->parameters();
  ParamRegistry b = fresh.parameters();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a.items()[i].second.values().size() ==
          b.items()[i].second.values().size());
    for (std::size_t j = 0; j < a.items()[i].second.numel(); ++j) {
      CHECK(a.items()[i].second.values()[j] ==
            b.items()[i].second.values()[j]);
    }
  }

  // metrics.csv: header only for zero epochs.
  CHECK(non_empty_lines(slurp(out / "metrics.csv")).size() == 1);
  CHECK(fs::exists(out / "effective_config.txt"));
}

TEST_CASE("metrics csv has one row per epoch and the config is echoed") {
  fs::path corpus_dir = temp_dir("train_rows_corpus");
  std::ostringstream sink;
  GenerateArgs gen;
  gen.utterances = 6;
  gen.phones_per_utt = 3;
  gen.out_dir = corpus_dir;
  REQUIRE(run_generate(gen, sink) == 0);

  fs::path out = temp_dir("train_rows_out");
  TrainArgs tr;
  tr.manifest = corpus_dir / "manifest.txt";
  tr.out_dir = out;
  tr.overrides = {"epochs=3", "d_model=8", "d_ff=16", "layers=1", "heads=2",
                  "batch_size=3"};
  REQUIRE(run_train(tr, sink) == 0);
  CHECK(non_empty_lines(slurp(out / "metrics.csv")).size() == 4);
  const std::string echo = slurp(out / "effective_config.txt");
  CHECK(echo.find("epochs = 3") != std::string::npos);
  CHECK(echo.find("d_model = 8") != std::string::npos);
  CHECK(echo.find("dropout_p = 0.5") != std::string::npos);
}

TEST_CASE("analyze runs deterministically and scores against the oracle") {
  fs::path corpus_dir = temp_dir("an_corpus");
  std::ostringstream sink;
  GenerateArgs gen;
  gen.utterances = 6;
  gen.phones_per_utt = 4;
  gen.out_dir = corpus_dir;
  REQUIRE(run_generate(gen, sink) == 0);

  fs::path train_out = temp_dir("an_train");
  TrainArgs tr;
  tr.manifest = corpus_dir / "manifest.txt";
  tr.out_dir = train_out;
  tr.overrides = {"epochs=1", "d_model=8", "d_ff=16", "layers=1"};
  REQUIRE(run_train(tr, sink) == 0);

  AnalyzeArgs an;
  an.checkpoint = train_out / "checkpoint.bin";
  an.manifest = corpus_dir / "manifest.txt";

  fs::path out1 = temp_dir("an_out1");
  fs::path out2 = temp_dir("an_out2");
  an.out_dir = out1;
  REQUIRE(run_analyze(an, sink) == 0);
  an.out_dir = out2;
  REQUIRE(run_analyze(an, sink) == 0);
  for (const auto& entry : fs::directory_iterator(out1)) {
    const fs::path rel = entry.path().filename();
    if (rel == "effective_config.txt") continue;  // carries the out path
    CHECK(slurp(out1 / rel) == slurp(out2 / rel));
  }

  // Hand recount: scoring.csv hits must match summary.csv top3 vs oracle.
  auto oracle = load_oracle(corpus_dir / "oracle.txt");
  std::map<std::string, std::vector<int>> planted(oracle.begin(),
                                                  oracle.end());
  std::map<std::string, std::vector<int>> predicted;
  for (const auto& line : non_empty_lines(slurp(out1 / "summary.csv"))) {
    if (line.rfind("phoneme", 0) == 0) continue;
    std::stringstream ss(line);
    std::string tok, sym;
    std::getline(ss, sym, ',');
    for (int i = 0; i < 13; ++i) std::getline(ss, tok, ',');
    std::getline(ss, tok);  // top3 column: "A B C"
    std::vector<int> chans;
    for (const auto& name : split_ws(tok)) {
      chans.push_back(channel_from_name(name));
    }
    predicted[sym] = chans;
  }
  std::size_t recount_all = 0;
  for (const auto& [sym, chans] : planted) {
    REQUIRE(predicted.count(sym));
    std::size_t hits = 0;
    for (int c : chans) {
      if (std::find(predicted[sym].begin(), predicted[sym].end(), c) !=
          predicted[sym].end()) {
        ++hits;
      }
    }
    if (hits == chans.size()) ++recount_all;
  }
  const std::string scoring = slurp(out1 / "scoring.csv");
  CHECK(scoring.find("total_all_planted_hit," +
                     std::to_string(recount_all)) != std::string::npos);

  // Paper-style formatting of the top-3 lines.
  for (const auto& line : non_empty_lines(slurp(out1 / "top3.txt"))) {
    CHECK(line.front() == '/');
    const auto colon = line.find("/ : ");
    REQUIRE(colon != std::string::npos);
    CHECK(split_ws(line.substr(colon + 4)).size() == 3);
  }
}

TEST_CASE("analyze rejects a corpus that mismatches the checkpoint") {
  fs::path corpus_dir = temp_dir("mismatch_corpus");
  std::ostringstream sink;
  GenerateArgs gen;
  gen.utterances = 3;
  gen.phones_per_utt = 3;
  gen.out_dir = corpus_dir;
  REQUIRE(run_generate(gen, sink) == 0);

  fs::path train_out = temp_dir("mismatch_train");
  TrainArgs tr;
  tr.manifest = corpus_dir / "manifest.txt";
  tr.out_dir = train_out;
  tr.overrides = {"epochs=0", "d_model=8", "d_ff=16", "layers=1"};
  REQUIRE(run_train(tr, sink) == 0);

  // A corpus with a different phoneme table.
  fs::path other_dir = temp_dir("mismatch_other");
  SyntheticSpec spec = default_synthetic_spec();
  spec.phonemes.pop_back();
  Corpus corpus = generate_corpus(spec, 3, 3);
  fs::path manifest = write_corpus(corpus, other_dir);

  AnalyzeArgs an;
  an.checkpoint = train_out / "checkpoint.bin";
  an.manifest = manifest;
  an.out_dir = temp_dir("mismatch_out");
  CHECK_THROWS_AS(run_analyze(an, sink), std::runtime_error);
}

TEST_CASE("gradcheck passes clean and fails when corrupted") {
  std::ostringstream report;
  GradcheckArgs args;
  CHECK(run_gradcheck(args, report) == 0);
  const std::string text = report.str();
  CHECK(text.find("matmul") != std::string::npos);
  CHECK(text.find("pipeline_micro") != std::string::npos);
  CHECK(text.find("max_rel_err=") != std::string::npos);
  CHECK(text.find("gradcheck PASS") != std::string::npos);

  std::ostringstream corrupt_report;
  GradcheckArgs corrupt;
  corrupt.corrupt = true;
  CHECK(run_gradcheck(corrupt, corrupt_report) == 1);
  CHECK(corrupt_report.str().find("FAIL") != std::string::npos);
}

TEST_CASE("config parsing rejects unknown keys and applies overrides") {
  CHECK_THROWS_WITH_AS(parse_run_config(std::nullopt, {"learning_rte=0.1"}),
                       doctest::Contains("learning_rte"),
                       std::invalid_argument);

  fs::path dir = temp_dir("config");
  {
    std::ofstream f(dir / "run.cfg");
    f << "# comment line\n";
    f << "epochs = 12\n";
    f << "dropout_p = 0.25\n";
  }
  RunConfig cfg = parse_run_config(dir / "run.cfg", {"epochs=7"});
  CHECK(cfg.train.epochs == 7);  // override wins over the file
  CHECK(cfg.dropout_p == 0.25);
  CHECK(cfg.d_model == 64);  // untouched default

  const std::string echo = config_echo(cfg);
  for (const auto& doc : config_key_docs()) {
    CHECK(echo.find(doc.key + " = ") != std::string::npos);
  }

  std::ofstream bad(dir / "bad.cfg");
  bad << "epochs 12\n";
  bad.close();
  CHECK_THROWS_AS(parse_run_config(dir / "bad.cfg", {}),
                  std::invalid_argument);

  RunConfig axis_cfg = parse_run_config(std::nullopt, {});
  axis_cfg.weight_norm_axis = "diagonal";
  CHECK_THROWS_AS(axis_cfg.pipeline_config(8), std::invalid_argument);
}

#ifdef ARTIC_BIN_PATH
TEST_CASE("the installed binary parses subcommands") {
  const std::string bin = ARTIC_BIN_PATH;
  CHECK(std::system((bin + " config > /dev/null").c_str()) == 0);
  CHECK(std::system((bin + " gradcheck --size micro > /dev/null").c_str()) ==
        0);
  CHECK(std::system((bin + " nonsense > /dev/null 2>&1").c_str()) != 0);
}
#endif
