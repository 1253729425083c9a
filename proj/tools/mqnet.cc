// tools/mqnet.cc

// Copyright 2026  mqnet authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Command-line front end: featurize | build-vocab | train-lm | train |
// decode | eval | count-params | dump-weights | make-toy-corpus.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mq/checkpoint.h"
#include "mq/config.h"
#include "mq/ctc.h"
#include "mq/decoder.h"
#include "mq/mfcc.h"
#include "mq/model.h"
#include "mq/ngram_lm.h"
#include "mq/trainer.h"
#include "mq/util.h"
#include "mq/vocab.h"
#include "mq/wav.h"

namespace fs = std::filesystem;

namespace {

std::vector<std::string> collect_files(const std::string& path,
                                       const std::string& ext) {
  std::vector<std::string> out;
  if (fs::is_directory(path)) {
    for (const auto& entry : fs::directory_iterator(path)) {
      if (entry.is_regular_file() && entry.path().extension() == ext) {
        out.push_back(entry.path().string());
      }
    }
    std::sort(out.begin(), out.end());
  } else if (fs::is_regular_file(path)) {
    out.push_back(path);
  }
  if (out.empty()) {
    throw std::runtime_error("no " + ext + " files found at " + path);
  }
  return out;
}

std::vector<mq::FeatureMatrix> load_feature_set(const std::string& path) {
  std::vector<mq::FeatureMatrix> out;
  for (const std::string& f : collect_files(path, ".mqft")) {
    out.push_back(mq::load_features(f));
    if (out.back().utt_id.empty()) {
      out.back().utt_id = fs::path(f).stem().string();
    }
  }
  return out;
}

// Shared flags for every subcommand that instantiates a model.
struct ModelArgs {
  std::string config_path;
  std::string vocab_path;
  int reduction = 16;
  bool reduction_set = false;
};

void add_model_flags(CLI::App* cmd, ModelArgs* args, bool need_vocab) {
  cmd->add_option("--config", args->config_path, "model config file")
      ->required()
      ->check(CLI::ExistingFile);
  auto* vocab = cmd->add_option("--vocab", args->vocab_path,
                                "vocabulary file (one character per line)");
  if (need_vocab) vocab->required()->check(CLI::ExistingFile);
  cmd->add_option_function<int>(
         "--reduction",
         [args](int r) {
           args->reduction = r;
           args->reduction_set = true;
         },
         "override attention/fusion reduction from the config")
      ->default_val(16);
}

mq::ModelConfig load_config(const ModelArgs& args, int vocab_size) {
  mq::ModelConfig cfg = mq::load_model_config(args.config_path);
  if (args.reduction_set) {
    cfg.reduction = args.reduction;
    cfg.fusion_reduction = args.reduction;
  }
  mq::resolve_vocab(cfg, vocab_size);
  return cfg;
}

std::vector<mq::TrainExample> make_corpus(
    const std::vector<mq::FeatureMatrix>& features,
    const std::map<std::string, std::string>& transcripts,
    const mq::Vocabulary& vocab) {
  std::vector<mq::TrainExample> corpus;
  for (const mq::FeatureMatrix& f : features) {
    auto it = transcripts.find(f.utt_id);
    if (it == transcripts.end()) {
      std::cerr << "warning: no transcript for '" << f.utt_id
                << "', utterance dropped\n";
      continue;
    }
    corpus.push_back({f.utt_id, f, vocab.encode(it->second)});
  }
  if (corpus.empty()) {
    throw std::runtime_error("no utterance has both features and transcript");
  }
  return corpus;
}

int run(int argc, char** argv) {
  CLI::App app{"multi-resolution separable-conv speech recognizer"};
  app.require_subcommand(1);

  // featurize
  auto* featurize = app.add_subcommand(
      "featurize", "compute MFCC features for WAV files");
  std::string fz_in, fz_out;
  mq::MfccOptions mfcc_opts;
  bool fz_no_norm = false;
  featurize->add_option("--in", fz_in, "WAV file or directory")->required();
  featurize->add_option("--out", fz_out, "output directory")->required();
  featurize->add_option("--num-coeffs", mfcc_opts.num_coeffs,
                        "MFCC coefficients per frame")
      ->default_val(64);
  featurize->add_flag("--no-normalize", fz_no_norm,
                      "skip per-utterance mean/variance normalization");

  // build-vocab
  auto* build_vocab =
      app.add_subcommand("build-vocab", "collect characters from transcripts");
  std::string bv_transcripts, bv_out;
  build_vocab->add_option("--transcripts", bv_transcripts, "TSV file")
      ->required()
      ->check(CLI::ExistingFile);
  build_vocab->add_option("--out", bv_out, "vocabulary output file")
      ->required();

  // train-lm
  auto* train_lm =
      app.add_subcommand("train-lm", "train a character n-gram LM");
  std::string tl_transcripts, tl_vocab, tl_out;
  int tl_order = 4;
  double tl_discount = 0.75;
  train_lm->add_option("--transcripts", tl_transcripts, "TSV file")
      ->required()
      ->check(CLI::ExistingFile);
  train_lm->add_option("--vocab", tl_vocab, "vocabulary file")
      ->required()
      ->check(CLI::ExistingFile);
  train_lm->add_option("--out", tl_out, "ARPA output file")->required();
  train_lm->add_option("--order", tl_order, "n-gram order")->default_val(4);
  train_lm->add_option("--discount", tl_discount, "absolute discount")
      ->default_val(0.75);

  // train
  auto* train_cmd = app.add_subcommand("train", "run the training loop");
  ModelArgs tr_model;
  add_model_flags(train_cmd, &tr_model, /*need_vocab=*/true);
  std::string tr_features, tr_transcripts;
  mq::TrainOptions tr_opts;
  std::uint64_t tr_init_seed = 0;
  bool tr_no_augment = false;
  train_cmd->add_option("--features", tr_features, ".mqft file or directory")
      ->required();
  train_cmd->add_option("--transcripts", tr_transcripts, "TSV file")
      ->required()
      ->check(CLI::ExistingFile);
  train_cmd->add_option("--steps", tr_opts.steps, "total optimizer steps")
      ->required();
  train_cmd->add_option("--batch-size", tr_opts.batch_size)->default_val(8);
  train_cmd->add_option("--lr", tr_opts.lr, "peak learning rate")
      ->default_val(0.01);
  train_cmd->add_option("--lr-min", tr_opts.lr_min)->default_val(0.0);
  train_cmd->add_option("--warmup", tr_opts.warmup_steps, "warmup steps")
      ->default_val(8000);
  train_cmd->add_option("--weight-decay", tr_opts.weight_decay)
      ->default_val(0.0001);
  train_cmd->add_option("--seed", tr_opts.seed, "init and sampling seed")
      ->default_val(1);
  train_cmd->add_option("--init-seed", tr_init_seed,
                        "model init seed (defaults to --seed)");
  train_cmd->add_flag("--no-augment", tr_no_augment, "disable SpecAugment");
  train_cmd->add_option("--augment-freq-width", tr_opts.augment_freq_width)
      ->default_val(8);
  train_cmd->add_option("--augment-time-width", tr_opts.augment_time_width)
      ->default_val(10);
  train_cmd->add_option("--checkpoint", tr_opts.checkpoint_path,
                        "checkpoint output path");
  train_cmd->add_option("--checkpoint-every", tr_opts.checkpoint_every,
                        "also snapshot every N steps to <path>.step<N>")
      ->default_val(0);
  train_cmd->add_option("--metrics", tr_opts.metrics_path,
                        "JSON-lines metrics path");
  train_cmd->add_option("--resume", tr_opts.resume_from,
                        "checkpoint to resume from")
      ->check(CLI::ExistingFile);

  // decode
  auto* decode = app.add_subcommand("decode", "print hypotheses for features");
  ModelArgs de_model;
  add_model_flags(decode, &de_model, /*need_vocab=*/true);
  std::string de_ckpt, de_features, de_lm;
  mq::DecodeOptions de_opts;
  decode->add_option("--checkpoint", de_ckpt)->required()
      ->check(CLI::ExistingFile);
  decode->add_option("--features", de_features, ".mqft file or directory")
      ->required();
  decode->add_option("--lm", de_lm, "ARPA LM for shallow fusion")
      ->check(CLI::ExistingFile);
  decode->add_option("--alpha", de_opts.alpha, "LM weight")->default_val(1.8);
  decode->add_option("--beta", de_opts.beta, "length bonus")->default_val(3.5);
  decode->add_option("--beam", de_opts.beam, "beam width")->default_val(200);

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "CER report against references");
  ModelArgs ev_model;
  add_model_flags(eval_cmd, &ev_model, /*need_vocab=*/true);
  std::string ev_ckpt, ev_features, ev_transcripts, ev_lm, ev_out;
  mq::DecodeOptions ev_opts;
  eval_cmd->add_option("--checkpoint", ev_ckpt)->required()
      ->check(CLI::ExistingFile);
  eval_cmd->add_option("--features", ev_features, ".mqft file or directory")
      ->required();
  eval_cmd->add_option("--transcripts", ev_transcripts, "reference TSV")
      ->required()
      ->check(CLI::ExistingFile);
  eval_cmd->add_option("--lm", ev_lm, "ARPA LM for shallow fusion")
      ->check(CLI::ExistingFile);
  eval_cmd->add_option("--alpha", ev_opts.alpha)->default_val(1.8);
  eval_cmd->add_option("--beta", ev_opts.beta)->default_val(3.5);
  eval_cmd->add_option("--beam", ev_opts.beam)->default_val(200);
  eval_cmd->add_option("--out", ev_out, "write the JSON report here too");

  // count-params
  auto* count = app.add_subcommand("count-params",
                                   "itemized parameter accounting");
  ModelArgs cp_model;
  add_model_flags(count, &cp_model, /*need_vocab=*/false);
  int cp_vocab_size = 0;
  count->add_option("--vocab-size", cp_vocab_size,
                    "vocabulary size when no --vocab file is given");

  // dump-weights
  auto* dump = app.add_subcommand(
      "dump-weights", "CSV gate probes for one utterance");
  ModelArgs dw_model;
  add_model_flags(dump, &dw_model, /*need_vocab=*/true);
  std::string dw_ckpt, dw_features, dw_out;
  dump->add_option("--checkpoint", dw_ckpt)->required()
      ->check(CLI::ExistingFile);
  dump->add_option("--features", dw_features, "probe .mqft file")
      ->required()
      ->check(CLI::ExistingFile);
  dump->add_option("--out", dw_out, "output directory")->required();

  // make-toy-corpus
  auto* toy = app.add_subcommand("make-toy-corpus",
                                 "generate synthetic WAVs and transcripts");
  std::string toy_out;
  int toy_num = 20;
  std::uint64_t toy_seed = 1;
  toy->add_option("--out", toy_out, "output directory")->required();
  toy->add_option("--num", toy_num, "number of utterances")->default_val(20);
  toy->add_option("--seed", toy_seed)->default_val(1);

  CLI11_PARSE(app, argc, argv);

  if (*featurize) {
    mfcc_opts.normalize = !fz_no_norm;
    mfcc_opts.num_mel = std::max(mfcc_opts.num_coeffs, mfcc_opts.num_mel);
    fs::create_directories(fz_out);
    for (const std::string& w : collect_files(fz_in, ".wav")) {
      mq::AudioSample audio = mq::load_wav(w);
      if (audio.utt_id.empty()) audio.utt_id = fs::path(w).stem().string();
      mq::FeatureMatrix f = mq::mfcc(audio, mfcc_opts);
      const std::string out = fz_out + "/" + audio.utt_id + ".mqft";
      mq::save_features(out, f);
      std::cout << audio.utt_id << "\t" << f.num_frames << " frames\t" << out
                << "\n";
    }
    return 0;
  }

  if (*build_vocab) {
    auto transcripts = mq::load_transcripts(bv_transcripts);
    std::vector<std::string> texts;
    for (const auto& [id, text] : transcripts) texts.push_back(text);
    mq::Vocabulary vocab = mq::Vocabulary::from_corpus(texts);
    vocab.save(bv_out);
    std::cout << "vocabulary of " << vocab.size() << " characters -> "
              << bv_out << "\n";
    return 0;
  }

  if (*train_lm) {
    mq::Vocabulary vocab = mq::Vocabulary::load(tl_vocab);
    auto transcripts = mq::load_transcripts(tl_transcripts);
    std::vector<std::string> texts;
    for (const auto& [id, text] : transcripts) texts.push_back(text);
    mq::NGramLM lm = mq::NGramLM::train(texts, vocab, tl_order, tl_discount);
    lm.save(tl_out, vocab);
    std::cout << "order-" << tl_order << " LM over " << texts.size()
              << " sentences -> " << tl_out << "\n";
    return 0;
  }

  if (*train_cmd) {
    mq::Vocabulary vocab = mq::Vocabulary::load(tr_model.vocab_path);
    mq::ModelConfig cfg = load_config(tr_model, vocab.size());
    auto features = load_feature_set(tr_features);
    auto transcripts = mq::load_transcripts(tr_transcripts);
    auto corpus = make_corpus(features, transcripts, vocab);
    tr_opts.augment_on = !tr_no_augment;
    if (train_cmd->count("--init-seed") == 0) tr_init_seed = tr_opts.seed;
    auto model = mq::build_model(cfg, tr_init_seed);
    std::cout << "model '" << cfg.name << "': "
              << model->trainable_param_count() << " trainable parameters, "
              << corpus.size() << " utterances\n";
    mq::TrainResult result = mq::train(*model, corpus, tr_opts);
    std::cout << "finished step " << result.final_step << ", final loss "
              << mq::format_double(result.final_loss);
    if (result.skipped_utterances > 0) {
      std::cout << " (" << result.skipped_utterances
                << " infeasible utterances skipped)";
    }
    std::cout << "\n";
    return 0;
  }

  if (*decode) {
    mq::Vocabulary vocab = mq::Vocabulary::load(de_model.vocab_path);
    mq::ModelConfig cfg = load_config(de_model, vocab.size());
    auto model = mq::build_model(cfg, 1);
    mq::load_checkpoint(de_ckpt, *model);
    std::unique_ptr<mq::NGramLM> lm;
    if (!de_lm.empty()) {
      lm = std::make_unique<mq::NGramLM>(mq::NGramLM::load(de_lm, vocab));
    }
    const int blank = vocab.blank_id();
    for (const mq::FeatureMatrix& f : load_feature_set(de_features)) {
      mq::Tensor log_probs =
          model->forward(mq::Tensor::from_data({f.num_frames, f.num_coeffs},
                                               f.values),
                         /*training=*/false);
      mq::LogProbMatrix lp =
          mq::log_prob_matrix_from_tensor(log_probs, f.utt_id);
      const std::string greedy = vocab.decode(mq::greedy_decode(lp, blank));
      const std::string beam =
          vocab.decode(mq::beam_search(lp, lm.get(), de_opts));
      std::cout << f.utt_id << "\t" << greedy << "\t" << beam << "\n";
    }
    return 0;
  }

  if (*eval_cmd) {
    mq::Vocabulary vocab = mq::Vocabulary::load(ev_model.vocab_path);
    mq::ModelConfig cfg = load_config(ev_model, vocab.size());
    auto model = mq::build_model(cfg, 1);
    mq::load_checkpoint(ev_ckpt, *model);
    std::unique_ptr<mq::NGramLM> lm;
    if (!ev_lm.empty()) {
      lm = std::make_unique<mq::NGramLM>(mq::NGramLM::load(ev_lm, vocab));
    }
    auto features = load_feature_set(ev_features);
    auto transcripts = mq::load_transcripts(ev_transcripts);
    mq::EvalReport report =
        mq::evaluate(*model, features, transcripts, vocab, lm.get(), ev_opts);
    const std::string json = report.to_json();
    if (!ev_out.empty()) mq::write_text_file(ev_out, json);
    std::cout << json << "\n";
    return 0;
  }

  if (*count) {
    int vocab_size = cp_vocab_size;
    if (!cp_model.vocab_path.empty()) {
      vocab_size = mq::Vocabulary::load(cp_model.vocab_path).size();
    }
    if (vocab_size <= 0) {
      throw std::runtime_error("count-params needs --vocab or --vocab-size");
    }
    mq::ModelConfig cfg = load_config(cp_model, vocab_size);
    mq::ParamCountReport report = mq::count_params(cfg);
    std::cout << "row\tdepthwise\tpointwise\tbn\tattention\ttotal\n";
    for (const mq::RowParamCount& r : report.rows) {
      std::cout << r.row << "\t" << r.depthwise << "\t" << r.pointwise << "\t"
                << r.bn << "\t" << r.attention << "\t" << r.total << "\n";
    }
    std::cout << "total\t\t\t\t\t" << report.total << "\n";
    return 0;
  }

  if (*dump) {
    mq::Vocabulary vocab = mq::Vocabulary::load(dw_model.vocab_path);
    mq::ModelConfig cfg = load_config(dw_model, vocab.size());
    auto model = mq::build_model(cfg, 1);
    mq::load_checkpoint(dw_ckpt, *model);
    mq::FeatureMatrix f = mq::load_features(dw_features);
    for (const std::string& path :
         mq::dump_weights(*model, f, dw_out)) {
      std::cout << path << "\n";
    }
    return 0;
  }

  if (*toy) {
    const std::string path = mq::make_toy_corpus(toy_out, toy_num, toy_seed);
    std::cout << toy_num << " utterances -> " << toy_out << " (" << path
              << ")\n";
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
