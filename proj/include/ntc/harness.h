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

// Rate-distortion evaluation: learned codecs, DCT baselines, lambda sweeps
// and CSV reports.

#ifndef NTC_HARNESS_H_
#define NTC_HARNESS_H_

#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "ntc/codec.h"
#include "ntc/entropy.h"
#include "ntc/image.h"
#include "ntc/perceptual.h"
#include "ntc/training.h"

namespace ntc {

struct RdPoint {
  std::string codec;
  double lambda = 0.0;
  double rate_entropy = 0.0;     // bits/px, pooled discrete entropy of q
  double rate_codelength = 0.0;  // bits/px of actual streams; nan if none
  double psnr = 0.0;             // from the MSE pooled over the set
  double dnlp = 0.0;             // mean of per-image NLP distances

  bool operator==(const RdPoint&) const;
};

struct CodedImage {
  IndexMatrix indices;  // one row per channel; empty for index-free coders
  ImagePlane reconstruction;
  double coded_bytes = -1.0;  // negative when the coder produces no stream
};

using ImageCoder = std::function<CodedImage(const ImagePlane&)>;

// Every codec, learned or fixed, is scored by this function.
RdPoint EvaluateCoder(const ImageCoder& coder, std::span<const ImagePlane> images,
                      const std::string& codec, double lambda,
                      const NlpConfig& metric);

// Hard quantization through the real encoder and decoder.
ImageCoder LearnedCoder(const Codec& codec);
// Passes images through untouched.
ImageCoder IdentityCoder();
ImageCoder DctCoder(int block_side, const DeadzoneQuantizer& quantizer);

std::string CodecId(const TrainConfig& cfg);

RdPoint Evaluate(const Checkpoint& ckpt, std::span<const ImagePlane> images,
                 const NlpConfig& metric);
RdPoint Evaluate(const Checkpoint& ckpt, std::span<const ImagePlane> images);

// Points with no other point at lower-or-equal rate and higher PSNR,
// sorted by rate.
std::vector<RdPoint> ParetoFront(std::vector<RdPoint> points);

// Uniform-quantizer points (codec "dct-uniform", zone ratio 1) for every
// step, followed by the Pareto front over all zone ratios ("dct-deadzone").
std::vector<RdPoint> DctBaseline(std::span<const ImagePlane> images, int block_side,
                                 std::span<const double> steps,
                                 std::span<const double> zone_ratios,
                                 const NlpConfig& metric);

enum class RdField { kPsnr, kDnlp };

// Linear interpolation of `field` at `rate` along points sorted by entropy
// rate; nan outside the covered range.
double InterpolateAtRate(std::vector<RdPoint> points, double rate, RdField field);

// Mean relaxed objective of a trained model on `batches` patch batches drawn
// from `images` with a fixed seed.
double HeldOutLoss(const Checkpoint& ckpt, std::span<const ImagePlane> images,
                   int batches, uint64_t seed);

std::string RdCsvHeader();
std::string RdCsvRow(const RdPoint& p);
std::string FormatRdCsv(std::span<const RdPoint> points);
std::vector<RdPoint> ParseRdCsv(const std::string& text);

struct SweepOptions {
  // When set, models are saved there and reused when already present.
  std::string model_dir;
  std::ostream* log = nullptr;
  int log_every = 0;
};

// Trains one model per lambda (lambda_index = position in `lambdas`) and
// evaluates each. Failures are logged and produce a row of nans.
std::vector<RdPoint> RdSweep(std::span<const ImagePlane> corpus,
                             std::span<const ImagePlane> images,
                             std::span<const double> lambdas,
                             const TrainConfig& cfg_template, const NlpConfig& nlp,
                             const SweepOptions& options = {});

}  // namespace ntc

#endif  // NTC_HARNESS_H_
