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

#include "artic/cli.hpp"

#include <chrono>
#include <fstream>
#include <ostream>

#include "artic/textio.hpp"

namespace artic {

namespace fs = std::filesystem;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot write " + path.string());
  }
  out << text;
}

double now_seconds() {
  using clock = std::chrono::steady_clock;
  static const auto t0 = clock::now();
  return std::chrono::duration<double>(clock::now() - t0).count();
}

}  // namespace

int run_generate(const GenerateArgs& args, std::ostream& out) {
  SyntheticSpec spec = args.spec_file ? load_synthetic_spec(*args.spec_file)
                                      : default_synthetic_spec();
  if (args.seed) spec.seed = *args.seed;
  validate_spec(spec);

  Corpus corpus = generate_corpus(spec, args.utterances, args.phones_per_utt);
  fs::create_directories(args.out_dir);
  const fs::path manifest = write_corpus(corpus, args.out_dir);
  save_oracle(spec, args.out_dir / "oracle.txt");
  save_synthetic_spec(spec, args.out_dir / "spec_echo.json");

  std::string echo;
  echo += "command = generate\n";
  echo += "spec = " +
          (args.spec_file ? args.spec_file->string() : "<default>") + "\n";
  echo += "seed = " + std::to_string(spec.seed) + "\n";
  echo += "utterances = " + std::to_string(args.utterances) + "\n";
  echo += "phones_per_utt = " + std::to_string(args.phones_per_utt) + "\n";
  write_text(args.out_dir / "effective_config.txt", echo);

  out << "wrote " << corpus.utterances.size() << " utterances ("
      << corpus.total_frames() << " frames, "
      << corpus.phoneme_table.size() << " phonemes) to "
      << args.out_dir.string() << "\n";
  out << "manifest: " << manifest.string() << "\n";
  return 0;
}

int run_train(const TrainArgs& args, std::ostream& out) {
  RunConfig cfg = parse_run_config(args.config_file, args.overrides);
  Corpus corpus = load_corpus(args.manifest);
  std::optional<Corpus> eval_corpus;
  if (args.eval_manifest) {
    eval_corpus = load_corpus(*args.eval_manifest);
    if (eval_corpus->phoneme_table != corpus.phoneme_table) {
      throw std::runtime_error(
          "train: evaluation corpus phoneme table differs from training");
    }
  }

  fs::create_directories(args.out_dir);
  const std::string echo = config_echo(cfg);
  write_text(args.out_dir / "effective_config.txt", echo);

  Rng init_rng(derive_seed(cfg.train.seed, seed_tag::kParamInit));
  Pipeline pipeline(cfg.pipeline_config(corpus.phoneme_table.size()),
                    init_rng);

  AdamState adam;
  TrainResult result =
      train(pipeline, corpus, cfg.train,
            eval_corpus ? &*eval_corpus : nullptr, &adam);

  write_metrics_csv(args.out_dir / "metrics.csv", result.log);
  save_checkpoint(args.out_dir / "checkpoint.bin", pipeline,
                  corpus.phoneme_table, result.stats, &adam,
                  cfg.train.epochs, echo);

  if (!result.log.empty()) {
    const auto& last = result.log.back();
    out << "epoch " << last.epoch << ": total=" << format_g12(last.total)
        << " l_aai=" << format_g12(last.l_aai)
        << " l_fpc=" << format_g12(last.l_fpc)
        << " train_acc=" << format_g12(last.train_acc)
        << " eval_acc=" << format_g12(last.eval_acc) << "\n";
  }
  out << "checkpoint: " << (args.out_dir / "checkpoint.bin").string() << "\n";
  out << "metrics: " << (args.out_dir / "metrics.csv").string() << "\n";
  return 0;
}

int run_analyze(const AnalyzeArgs& args, std::ostream& out) {
  LoadedCheckpoint ck = load_checkpoint(args.checkpoint);
  Corpus corpus = load_corpus(args.manifest);
  if (corpus.phoneme_table != ck.phoneme_table) {
    throw std::runtime_error(
        "analyze: corpus phoneme table does not match the checkpoint's");
  }

  CriticalityReport report = build_report(*ck.pipeline, corpus, ck.stats,
                                          args.resample, !args.no_ste);
  fs::create_directories(args.out_dir);
  export_report(report, args.out_dir);

  std::string echo;
  echo += "command = analyze\n";
  echo += "checkpoint = " + args.checkpoint.string() + "\n";
  echo += "manifest = " + args.manifest.string() + "\n";
  echo += "resample = " + std::to_string(args.resample) + "\n";
  echo += "top_k = " + std::to_string(args.top_k) + "\n";
  echo += std::string("use_ste = ") + (args.no_ste ? "false" : "true") + "\n";
  write_text(args.out_dir / "effective_config.txt", echo);

  for (const auto& p : report.phonemes) {
    out << top_k_display(report, p.symbol, args.top_k) << "\n";
  }
  if (!report.skipped.empty()) {
    out << "skipped (absent from corpus):";
    for (const auto& s : report.skipped) out << " " << s;
    out << "\n";
  }

  fs::path oracle_path;
  if (args.oracle_file) {
    oracle_path = *args.oracle_file;
  } else {
    const fs::path candidate = args.manifest.parent_path() / "oracle.txt";
    if (fs::exists(candidate)) oracle_path = candidate;
  }
  if (!oracle_path.empty()) {
    OracleScore score =
        score_against_oracle(report, load_oracle(oracle_path), args.top_k);
    export_scoring(score, args.out_dir / "scoring.csv");
    out << "oracle: " << score.phonemes_all_planted_hit << "/"
        << score.rows.size() << " phonemes with all planted channels in the "
        << "top-" << args.top_k << ", " << score.phonemes_top1_hit << "/"
        << score.rows.size() << " with the top-1 planted channel\n";
  }
  return 0;
}

// ---- gradient check command -------------------------------------------------

namespace {

struct CheckRow {
  std::string name;
  double err = 0.0;
  double tolerance = 0.0;
  bool pass = false;
  bool analytic_exact = false;
};

Tensor random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0,
                     bool requires_grad = true) {
  std::vector<double> v(shape_numel(shape));
  for (auto& x : v) x = rng.uniform(lo, hi);
  return Tensor::from(std::move(shape), std::move(v), requires_grad);
}

CheckRow check_op(const std::string& name, double tolerance,
                  const std::function<Tensor(Graph&)>& f,
                  const std::vector<Tensor>& params) {
  CheckRow row;
  row.name = name;
  row.tolerance = tolerance;
  row.err = grad_check(f, params, 1e-5);
  row.pass = row.err < tolerance;
  return row;
}

}  // namespace

int run_gradcheck(const GradcheckArgs& args, std::ostream& out) {
  if (args.size != "micro" && args.size != "small") {
    throw std::invalid_argument("gradcheck: size must be 'micro' or 'small'");
  }
  const double t_start = now_seconds();
  std::vector<CheckRow> rows;
  Rng rng(415);

  {
    Tensor a = random_tensor({3, 4}, rng);
    Tensor b = random_tensor({4, 5}, rng);
    auto f = [&](Graph& g) {
      if (args.corrupt) g.corrupt_matmul_backward = true;
      return sum(g, matmul(g, a, b));
    };
    rows.push_back(check_op("matmul", 1e-6, f, {a, b}));
  }
  {
    Tensor a = random_tensor({4, 4}, rng);
    Tensor b = random_tensor({4, 4}, rng);
    Tensor bias = random_tensor({4}, rng);
    auto f = [&](Graph& g) {
      return sum(g, relu(g, add(g, mul(g, a, b), bias)));
    };
    rows.push_back(check_op("ew_add_mul_relu", 1e-6, f, {a, b, bias}));
  }
  {
    Tensor x = random_tensor({3, 6}, rng);
    Tensor c = random_tensor({3, 6}, rng, -1.0, 1.0, false);
    auto f = [&](Graph& g) {
      return sum(g, mul(g, softmax(g, x, 1), c));
    };
    rows.push_back(check_op("softmax", 1e-6, f, {x}));
  }
  {
    Tensor x = random_tensor({4, 6}, rng);
    Tensor gamma = random_tensor({6}, rng, 0.5, 1.5);
    Tensor beta = random_tensor({6}, rng, -0.5, 0.5);
    Tensor c = random_tensor({4, 6}, rng, -1.0, 1.0, false);
    auto f = [&](Graph& g) {
      return sum(g, mul(g, layer_norm(g, x, gamma, beta, 1e-5), c));
    };
    rows.push_back(check_op("layer_norm", 1e-5, f, {x, gamma, beta}));
  }
  {
    Tensor x = random_tensor({6, 8}, rng);
    Tensor c = random_tensor({6, 8}, rng, -1.0, 1.0, false);
    auto f = [&](Graph& g) {
      Rng drop_rng(99);  // rebuilt per evaluation: deterministic mask
      return sum(g, mul(g, dropout(g, x, 0.5, true, drop_rng), c));
    };
    rows.push_back(check_op("dropout", 1e-6, f, {x}));
  }
  {
    Tensor pred = random_tensor({5, 3}, rng);
    Tensor target = random_tensor({5, 3}, rng, -1.0, 1.0, false);
    Tensor mask = Tensor::from({5}, {1, 1, 0, 1, 1});
    auto f = [&](Graph& g) { return mse_loss(g, pred, target, mask); };
    rows.push_back(check_op("mse_loss", 1e-6, f, {pred}));
  }
  {
    Tensor logits = random_tensor({5, 4}, rng, -2.0, 2.0);
    Tensor mask = Tensor::from({5}, {1, 0, 1, 1, 1});
    std::vector<int> labels = {1, 0, 3, 2, 0};
    auto f = [&](Graph& g) {
      return cross_entropy_loss(g, logits, labels, mask);
    };
    rows.push_back(check_op("cross_entropy_loss", 1e-6, f, {logits}));
  }
  {
    // Well-separated raw values keep argmin/argmax stable under eps nudges.
    std::vector<double> v(3 * 12);
    for (std::size_t f = 0; f < 3; ++f) {
      for (std::size_t c = 0; c < 12; ++c) {
        v[f * 12 + c] =
            static_cast<double>(c) * 0.4 + rng.uniform(-0.12, 0.12);
      }
    }
    Tensor raw = Tensor::from({3, 12}, std::move(v), true);
    Tensor c = random_tensor({3, 12}, rng, -1.0, 1.0, false);
    auto f = [&](Graph& g) {
      return sum(g, mul(g, min_max_normalize(g, raw).weights, c));
    };
    rows.push_back(check_op("min_max_normalize", 1e-6, f, {raw}));
  }
  {
    // The straight-through backward is checked analytically: the gradient
    // w.r.t. pred must equal the upstream coefficients bitwise.
    Tensor pred = random_tensor({4, 12}, rng);
    Tensor gt = random_tensor({4, 12}, rng, -2.0, 2.0, false);
    Tensor coeff = random_tensor({4, 12}, rng, -3.0, 3.0, false);
    Graph g;
    Tensor substituted = ste_replace(g, pred, gt);
    Tensor loss = sum(g, mul(g, substituted, coeff));
    g.backward(loss);
    CheckRow row;
    row.name = "ste_replace";
    row.tolerance = 0.0;
    row.analytic_exact = true;
    row.pass = true;
    for (std::size_t i = 0; i < pred.numel(); ++i) {
      // Forward must bit-equal the ground truth; backward must pass the
      // upstream through unchanged.
      if (substituted.values()[i] != gt.values()[i]) row.pass = false;
      if (pred.grad()[i] != coeff.values()[i]) row.pass = false;
    }
    if (gt.has_grad()) row.pass = false;
    rows.push_back(row);
  }
  {
    TransformerEncoder enc;
    EncoderConfig ecfg;
    ecfg.layers = 1;
    ecfg.heads = 2;
    ecfg.d_model = 8;
    ecfg.d_ff = 16;
    ecfg.max_len = 16;
    enc.init(5, ecfg, rng);
    Tensor x = random_tensor({4, 5}, rng, -1.0, 1.0, false);
    Tensor c = random_tensor({4, 8}, rng, -1.0, 1.0, false);
    std::vector<std::uint8_t> mask = {1, 1, 1, 0};
    ParamRegistry reg;
    enc.collect("enc", reg);
    std::vector<Tensor> params;
    for (const auto& [n, t] : reg.items()) params.push_back(t);
    auto f = [&](Graph& g) {
      return sum(g, mul(g, enc.forward(g, x, mask), c));
    };
    rows.push_back(check_op("encoder_1layer", 1e-5, f, params));
  }
  {
    PipelineConfig pcfg;
    pcfg.num_classes = 4;
    pcfg.enc.layers = args.size == "small" ? 2 : 1;
    pcfg.enc.heads = 2;
    pcfg.enc.d_model = args.size == "small" ? 16 : 8;
    pcfg.enc.d_ff = args.size == "small" ? 32 : 16;
    pcfg.enc.max_len = 16;
    Rng prng(1);
    Pipeline pipeline(pcfg, prng);
    Rng drng(101);
    Tensor mfcc = random_tensor({4, 13}, drng, -1.0, 1.0, false);
    Tensor gt = random_tensor({4, 12}, drng, -1.0, 1.0, false);
    std::vector<std::uint8_t> mask(4, 1);
    Tensor mask_t = Tensor::full({4}, 1.0);
    std::vector<int> labels(4);
    for (auto& l : labels) l = static_cast<int>(drng.uniform_index(4));
    ParamRegistry reg = pipeline.parameters();
    std::vector<Tensor> params;
    for (const auto& [n, t] : reg.items()) params.push_back(t);
    auto f = [&](Graph& g) {
      PipelineOutput o =
          pipeline.forward(g, mfcc, nullptr, mask, false, nullptr);
      return pipeline_loss(g, o, gt, labels, mask_t, 1.0, 1.0).total;
    };
    rows.push_back(
        check_op("pipeline_" + args.size, 1e-4, f, params));
  }

  bool all_pass = true;
  for (const auto& row : rows) {
    all_pass = all_pass && row.pass;
    char err_buf[32];
    if (row.analytic_exact) {
      std::snprintf(err_buf, sizeof(err_buf), "%s", "exact");
    } else {
      std::snprintf(err_buf, sizeof(err_buf), "%.3e", row.err);
    }
    out << (row.pass ? "PASS" : "FAIL") << "  " << row.name;
    for (std::size_t pad = row.name.size(); pad < 22; ++pad) out << ' ';
    out << "max_rel_err=" << err_buf;
    if (!row.analytic_exact) out << "  tol=" << row.tolerance;
    out << "\n";
  }
  const double elapsed = now_seconds() - t_start;
  out << (all_pass ? "gradcheck PASS" : "gradcheck FAIL") << " ("
      << rows.size() << " checks, " << format_g12(elapsed) << " s)\n";
  return all_pass ? 0 : 1;
}

}  // namespace artic
