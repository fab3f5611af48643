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

// End-to-end rate-distortion training: the relaxed objective and its full
// gradient, Adam, constraint projection, the training loop and model
// checkpoints.

#ifndef NTC_TRAINING_H_
#define NTC_TRAINING_H_

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "ntc/common.h"
#include "ntc/entropy.h"
#include "ntc/image.h"
#include "ntc/perceptual.h"
#include "ntc/transform.h"

namespace ntc {

enum class Metric : uint8_t { kMse = 0, kNlp = 1 };

const char* MetricName(Metric m);
Metric ParseMetric(const std::string& name);

struct TrainConfig {
  double lambda = 0.0;
  Metric metric = Metric::kMse;
  TransformKind transform = TransformKind::kGdn;
  int block_side = 16;
  int64_t steps = 1000;
  int batch_size = 4;
  int patch_side = 128;
  double learning_rate = 1e-4;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  double density_rate = 0.05;
  // Density-only EMA updates with the final parameters after the last step.
  int density_refresh_batches = 32;
  uint64_t seed = 0;
  // H is initialized as gain * (random orthonormal), H' as its inverse.
  double init_gain = 1.0;
  double gamma_init = 1e-3;
  // Learning-rate multiplier for beta, gamma, alpha and epsilon.
  double norm_lr_scale = 1.0;
  // Over the last lr_decay_fraction of the steps the learning rate decays
  // geometrically to lr_final_ratio times its base value.
  double lr_decay_fraction = 0.0;
  double lr_final_ratio = 0.1;
  bool train_exponents = false;
  int lambda_index = 0;

  void Validate() const;
  std::string ToText() const;
  static TrainConfig FromText(const std::string& text);
  bool operator==(const TrainConfig&) const = default;
};

struct TransformGrads {
  GdnParams analysis;
  GdnParams synthesis;
};

struct LossResult {
  double loss = 0.0;        // rate_bpp + lambda * distortion
  double rate_bpp = 0.0;    // rate proxy, bits per pixel
  double distortion = 0.0;  // mean over the batch
  TransformGrads grads;
  Matrix noisy;  // the perturbed codes, one block per column
};

// Concatenates the blocks of every patch, patch by patch.
Matrix BatchBlocks(const PatchBatch& batch, int block_side);

// Relaxed objective with the given noise (one column per block of
// BatchBlocks). The density is held fixed; its slope carries the rate
// gradient into the analysis transform.
LossResult RdLoss(const PatchBatch& batch, const TransformParams& params,
                  const DensityModel& density, const TrainConfig& cfg,
                  const NlpConfig& nlp, const Matrix& noise);
LossResult RdLoss(const PatchBatch& batch, const TransformParams& params,
                  const DensityModel& density, const TrainConfig& cfg,
                  const NlpConfig& nlp, Rng& rng);

// Flattening of the trainable parameters in the order H, beta, gamma,
// alpha, eps (analysis), then the same for synthesis; untrainable entries
// are skipped.
Vector PackTrainable(const TransformParams& params, const GradRequest& req);
void UnpackTrainable(const Vector& flat, const GradRequest& req,
                     TransformParams* params);
Vector PackGradients(const TransformGrads& grads, const GradRequest& req);

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct OptimizerState {
  Vector m;
  Vector v;
  int64_t step = 0;
};

// Learning rate used at optimizer step `step` (1-based) under cfg's schedule.
double LearningRateAt(const TrainConfig& cfg, int64_t step);

// Bias-corrected Adam. Lazily sizes the state on the first call.
// `lr_scale`, when given, multiplies the learning rate per coordinate.
void AdamStep(const Vector& grads, const AdamConfig& cfg, OptimizerState* state,
              Vector* params, const Vector* lr_scale = nullptr);

constexpr double kMinBeta = 1e-6;
constexpr double kMinEpsilon = 1e-6;

// Clamps beta >= 1e-6, gamma >= 0, alpha >= 1 and eps into [1e-6, 1].
void ProjectParams(TransformParams* params);

struct Checkpoint {
  static constexpr uint16_t kVersion = 1;

  TransformParams params;
  DensityModel density;
  NlpConfig nlp;
  TrainConfig config;
  int64_t steps = 0;

  bool operator==(const Checkpoint&) const = default;
};

// Layout (little-endian): "NTCM", u16 version, u8 kind, u8 B; ten real
// blocks H, beta, gamma, alpha, eps, H', beta', gamma', alpha', eps' (u64
// count, then f64 values, matrices row-major); density block (u64 byte
// length; f64 spacing, f64 floor, u32 channels, then per channel f64 origin,
// f64 spacing, u32 count, f64 values); NLP config text; training config
// text (texts are u64 length + bytes); u64 step count; u64 FNV-1a digest of
// everything before it.
std::vector<uint8_t> SerializeCheckpoint(const Checkpoint& ckpt);
Checkpoint ParseCheckpoint(std::span<const uint8_t> bytes);
void SaveCheckpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint LoadCheckpoint(const std::string& path);
// The trailing digest of the serialized checkpoint.
uint64_t CheckpointDigest(const Checkpoint& ckpt);

class TrainingDivergedError : public Error {
 public:
  TrainingDivergedError(const std::string& what, Checkpoint last_good)
      : Error(ErrorKind::kNumeric, what), last_good_(std::move(last_good)) {}
  const Checkpoint& last_good() const { return last_good_; }

 private:
  Checkpoint last_good_;
};

struct TrainProgress {
  int64_t step;
  double loss;
  double rate_bpp;
  double distortion;
};

using ProgressFn = std::function<void(const TrainProgress&)>;

// Deterministic given (corpus, cfg, nlp). `progress` is called after every
// optimizer step.
Checkpoint Train(std::span<const ImagePlane> corpus, const TrainConfig& cfg,
                 const NlpConfig& nlp, const ProgressFn& progress = {});

}  // namespace ntc

#endif  // NTC_TRAINING_H_
