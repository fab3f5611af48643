// Copyright 2026 The NTC Authors. All Rights Reserved.
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

// Command-line front end: training, coding, evaluation and R-D sweeps.
// Exit codes: 0 success, 2 argument error, 3 data error, 4 divergence.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "CLI11.hpp"
#include "ntc/codec.h"
#include "ntc/harness.h"
#include "ntc/image.h"
#include "ntc/synthetic.h"
#include "ntc/training.h"

namespace {

constexpr int kExitArgument = 2;
constexpr int kExitData = 3;
constexpr int kExitDiverged = 4;

struct TrainFlags {
  std::string transform = "gdn";
  std::string metric = "mse";
  ntc::TrainConfig cfg;
};

void AddTrainFlags(CLI::App* cmd, TrainFlags* f) {
  cmd->add_option("--transform", f->transform, "linear or gdn")
      ->check(CLI::IsMember({"linear", "gdn"}));
  cmd->add_option("--metric", f->metric, "mse or nlp")
      ->check(CLI::IsMember({"mse", "nlp"}));
  cmd->add_option("--steps", f->cfg.steps, "optimizer steps");
  cmd->add_option("--seed", f->cfg.seed, "random seed");
  cmd->add_option("--block", f->cfg.block_side, "block side B");
  cmd->add_option("--batch", f->cfg.batch_size, "patches per batch");
  cmd->add_option("--patch", f->cfg.patch_side, "patch side (multiple of B)");
  cmd->add_option("--lr", f->cfg.learning_rate, "Adam learning rate");
  cmd->add_option("--density-rate", f->cfg.density_rate, "density EMA rate");
  cmd->add_option("--init-gain", f->cfg.init_gain, "initial analysis gain");
  cmd->add_option("--norm-lr-scale", f->cfg.norm_lr_scale,
                  "learning-rate multiplier for the GDN parameters");
  cmd->add_option("--lr-decay-fraction", f->cfg.lr_decay_fraction,
                  "final fraction of steps with geometric learning-rate decay");
  cmd->add_option("--lr-final-ratio", f->cfg.lr_final_ratio,
                  "learning-rate ratio reached at the last step");
  cmd->add_flag("--train-exponents", f->cfg.train_exponents,
                "also train the GDN exponents");
}

ntc::TrainConfig Finish(const TrainFlags& f) {
  ntc::TrainConfig cfg = f.cfg;
  cfg.transform = ntc::ParseTransformKind(f.transform);
  cfg.metric = ntc::ParseMetric(f.metric);
  return cfg;
}

std::vector<ntc::ImagePlane> LoadSet(const std::string& dir, int crop) {
  std::vector<ntc::ImagePlane> images = ntc::LoadImageDir(dir);
  if (images.empty()) ntc::Fail(ntc::ErrorKind::kIo, "no .pgm/.ppm images in " + dir);
  if (crop > 0) {
    for (ntc::ImagePlane& img : images) img = ntc::CropBorder(img, crop);
  }
  return images;
}

void WriteCsv(const std::string& path, const std::vector<ntc::RdPoint>& points) {
  const std::string text = ntc::FormatRdCsv(points);
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  ntc::WriteFileAtomic(path, {reinterpret_cast<const uint8_t*>(text.data()), text.size()});
}

ntc::ProgressFn Logger(int every) {
  if (every <= 0) return {};
  return [every](const ntc::TrainProgress& p) {
    if (p.step % every == 0) {
      std::cerr << "step " << p.step << " loss " << p.loss << " rate " << p.rate_bpp
                << " dist " << p.distortion << "\n";
    }
  };
}

std::vector<double> ParseList(const std::string& text) {
  std::vector<double> out;
  size_t start = 0;
  while (start <= text.size()) {
    const size_t comma = text.find(',', start);
    const std::string item = text.substr(start, comma - start);
    if (item.empty()) ntc::Fail(ntc::ErrorKind::kArgument, "empty item in list: " + text);
    double v;
    try {
      v = ntc::ParseDouble(item);
    } catch (const ntc::Error&) {
      ntc::Fail(ntc::ErrorKind::kArgument, "bad number in list: " + item);
    }
    out.push_back(v);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

int Run(int argc, char** argv) {
  CLI::App app{"Nonlinear transform image codec"};
  app.require_subcommand(1);

  // train
  TrainFlags train;
  std::string train_corpus, train_out;
  int train_log = 0;
  auto* cmd_train = app.add_subcommand("train", "train a model");
  cmd_train->add_option("--corpus", train_corpus, "directory of training images")
      ->required();
  cmd_train->add_option("--lambda", train.cfg.lambda, "rate-distortion trade-off")
      ->required();
  cmd_train->add_option("--out", train_out, "output model file")->required();
  cmd_train->add_option("--log-every", train_log, "progress interval (0 = quiet)");
  AddTrainFlags(cmd_train, &train);

  // encode / decode
  std::string model, in_path, out_path;
  auto* cmd_encode = app.add_subcommand("encode", "compress a PGM/PPM image");
  cmd_encode->add_option("--model", model)->required();
  cmd_encode->add_option("input", in_path)->required();
  cmd_encode->add_option("output", out_path)->required();
  auto* cmd_decode = app.add_subcommand("decode", "decompress to PGM");
  cmd_decode->add_option("--model", model)->required();
  cmd_decode->add_option("input", in_path)->required();
  cmd_decode->add_option("output", out_path)->required();

  // eval
  std::string images_dir, csv_path;
  int crop = 0;
  auto* cmd_eval = app.add_subcommand("eval", "rate-distortion of a model");
  cmd_eval->add_option("--model", model)->required();
  cmd_eval->add_option("--images", images_dir)->required();
  cmd_eval->add_option("--csv", csv_path, "output CSV ('-' for stdout)");
  cmd_eval->add_option("--crop", crop, "border crop in pixels");

  // dct-baseline
  int dct_block = 16;
  std::string dct_steps = "0.02,0.03,0.05,0.08,0.12,0.18,0.25,0.35,0.5";
  std::string dct_zones = "1,1.25,1.5,1.75,2,2.5,3";
  auto* cmd_dct = app.add_subcommand("dct-baseline", "block DCT reference curves");
  cmd_dct->add_option("--images", images_dir)->required();
  cmd_dct->add_option("--block", dct_block, "block side");
  cmd_dct->add_option("--steps", dct_steps, "comma-separated step sizes");
  cmd_dct->add_option("--zone-ratios", dct_zones, "comma-separated zero-bin ratios");
  cmd_dct->add_option("--csv", csv_path);
  cmd_dct->add_option("--crop", crop);

  // sweep
  TrainFlags sweep;
  std::string lambdas, sweep_corpus, model_dir;
  int sweep_log = 0;
  auto* cmd_sweep = app.add_subcommand("sweep", "train and evaluate over a lambda grid");
  cmd_sweep->add_option("--lambdas", lambdas, "comma-separated lambdas")->required();
  cmd_sweep->add_option("--corpus", sweep_corpus)->required();
  cmd_sweep->add_option("--images", images_dir)->required();
  cmd_sweep->add_option("--model-dir", model_dir, "cache trained models here");
  cmd_sweep->add_option("--csv", csv_path);
  cmd_sweep->add_option("--crop", crop);
  cmd_sweep->add_option("--log-every", sweep_log);
  AddTrainFlags(cmd_sweep, &sweep);

  // synth
  int synth_count = 24, synth_size = 192;
  uint64_t synth_seed = 1;
  std::string synth_out;
  auto* cmd_synth = app.add_subcommand("synth", "write a dead-leaves image corpus");
  cmd_synth->add_option("--count", synth_count)->check(CLI::PositiveNumber);
  cmd_synth->add_option("--size", synth_size)->check(CLI::PositiveNumber);
  cmd_synth->add_option("--seed", synth_seed);
  cmd_synth->add_option("--out", synth_out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitArgument;
  }

  const ntc::NlpConfig nlp = ntc::NlpConfig::Default();
  if (*cmd_train) {
    ntc::TrainConfig cfg = Finish(train);
    const auto corpus = LoadSet(train_corpus, 0);
    try {
      ntc::SaveCheckpoint(ntc::Train(corpus, cfg, nlp, Logger(train_log)), train_out);
    } catch (const ntc::TrainingDivergedError& e) {
      ntc::SaveCheckpoint(e.last_good(), train_out + ".last_good");
      throw;
    }
  } else if (*cmd_encode) {
    const ntc::Codec codec(ntc::LoadCheckpoint(model));
    const std::vector<uint8_t> bytes = codec.Compress(ntc::LoadImage(in_path)).Serialize();
    ntc::WriteFileAtomic(out_path, bytes);
  } else if (*cmd_decode) {
    const ntc::Codec codec(ntc::LoadCheckpoint(model));
    const ntc::Bitstream bs = ntc::Bitstream::Parse(ntc::ReadFileBytes(in_path));
    ntc::SavePgm(codec.Decompress(bs), out_path);
  } else if (*cmd_eval) {
    const auto images = LoadSet(images_dir, crop);
    WriteCsv(csv_path, {ntc::Evaluate(ntc::LoadCheckpoint(model), images, nlp)});
  } else if (*cmd_dct) {
    const auto images = LoadSet(images_dir, crop);
    const std::vector<double> steps = ParseList(dct_steps);
    const std::vector<double> zones = ParseList(dct_zones);
    WriteCsv(csv_path, ntc::DctBaseline(images, dct_block, steps, zones, nlp));
  } else if (*cmd_sweep) {
    const std::vector<double> grid = ParseList(lambdas);
    const ntc::TrainConfig cfg = Finish(sweep);
    cfg.Validate();
    const auto corpus = LoadSet(sweep_corpus, 0);
    const auto images = LoadSet(images_dir, crop);
    ntc::SweepOptions options;
    options.model_dir = model_dir;
    options.log = &std::cerr;
    options.log_every = sweep_log;
    WriteCsv(csv_path, ntc::RdSweep(corpus, images, grid, cfg, nlp, options));
  } else if (*cmd_synth) {
    ntc::DeadLeavesConfig dl;
    dl.width = dl.height = synth_size;
    const auto corpus = ntc::GenerateCorpus(synth_count, dl, synth_seed);
    std::filesystem::create_directories(synth_out);
    for (size_t i = 0; i < corpus.size(); ++i) {
      char name[32];
      std::snprintf(name, sizeof(name), "leaves_%04zu.pgm", i);
      ntc::SavePgm(corpus[i], (std::filesystem::path(synth_out) / name).string());
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
#if defined(__GLIBC__)
  // Training allocates many equally sized temporaries; keep them on the heap
  // instead of mapping and unmapping pages for each one.
  mallopt(M_MMAP_THRESHOLD, 64 << 20);
  mallopt(M_TRIM_THRESHOLD, 256 << 20);
#endif
  try {
    return Run(argc, argv);
  } catch (const ntc::Error& e) {
    std::cerr << "ntc: " << e.what() << "\n";
    switch (e.kind()) {
      case ntc::ErrorKind::kArgument:
        return kExitArgument;
      case ntc::ErrorKind::kNumeric:
        return kExitDiverged;
      default:
        return kExitData;
    }
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "ntc: " << e.what() << "\n";
    return kExitData;
  }
}
