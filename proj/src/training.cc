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

#include "ntc/training.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

namespace ntc {

namespace {

constexpr char kCheckpointMagic[4] = {'N', 'T', 'C', 'M'};

// Visits the five parameter arrays of a stage in serialization order.
template <typename Params, typename Fn>
void ForEachArray(Params& p, Fn&& fn) {
  fn(p.filters, 0);
  fn(p.beta, 1);
  fn(p.gamma, 2);
  fn(p.alpha, 3);
  fn(p.epsilon, 4);
}

bool Requested(const GradRequest& req, int which) {
  switch (which) {
    case 0: return req.filters;
    case 1: return req.beta;
    case 2: return req.gamma;
    case 3: return req.alpha;
    default: return req.epsilon;
  }
}

template <typename M>
void WriteRowMajor(ByteWriter* w, const M& m) {
  std::vector<double> flat;
  flat.reserve(m.size());
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) flat.push_back(m(i, j));
  }
  w->F64Block(flat);
}

template <typename M>
void ReadRowMajor(ByteReader* r, M* m, Eigen::Index rows, Eigen::Index cols) {
  const std::vector<double> flat = r->F64Block();
  if (flat.size() != static_cast<size_t>(rows * cols)) {
    Fail(ErrorKind::kCorrupt, "checkpoint: parameter block has " +
                                  std::to_string(flat.size()) + " values, expected " +
                                  std::to_string(rows * cols));
  }
  m->resize(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) (*m)(i, j) = flat[i * cols + j];
  }
}

void WriteStage(ByteWriter* w, const GdnParams& p) {
  WriteRowMajor(w, p.filters);
  WriteRowMajor(w, p.beta);
  WriteRowMajor(w, p.gamma);
  WriteRowMajor(w, p.alpha);
  WriteRowMajor(w, p.epsilon);
}

void ReadStage(ByteReader* r, int d, GdnParams* p) {
  ReadRowMajor(r, &p->filters, d, d);
  ReadRowMajor(r, &p->beta, d, 1);
  ReadRowMajor(r, &p->gamma, d, d);
  ReadRowMajor(r, &p->alpha, d, d);
  ReadRowMajor(r, &p->epsilon, d, 1);
}

std::vector<uint8_t> SerializeDensity(const DensityModel& m) {
  ByteWriter w;
  w.F64(m.spacing());
  w.F64(m.floor());
  w.U32(static_cast<uint32_t>(m.channels()));
  for (int c = 0; c < m.channels(); ++c) {
    const auto& ch = m.channel(c);
    w.F64(m.LowerBound(c));
    w.F64(m.spacing());
    w.U32(static_cast<uint32_t>(ch.count()));
    for (double v : ch.values) w.F64(v);
  }
  return w.Release();
}

DensityModel ParseDensity(std::span<const uint8_t> bytes) {
  ByteReader r(bytes);
  const double spacing = r.F64();
  const double floor = r.F64();
  const uint32_t channels = r.U32();
  if (!(spacing > 0.0) || channels == 0 || channels > (1u << 16)) {
    Fail(ErrorKind::kCorrupt, "checkpoint: invalid density header");
  }
  std::vector<DensityModel::Channel> chans(channels);
  for (auto& ch : chans) {
    const double origin = r.F64();
    const double ch_spacing = r.F64();
    const uint32_t count = r.U32();
    if (ch_spacing != spacing || !std::isfinite(origin) ||
        count > DensityModel::kMaxKnots || count > r.remaining() / 8) {
      Fail(ErrorKind::kCorrupt, "checkpoint: invalid density channel");
    }
    ch.first_index = std::llround(origin / spacing);
    ch.values.resize(count);
    for (double& v : ch.values) v = r.F64();
  }
  if (r.remaining() != 0) {
    Fail(ErrorKind::kCorrupt, "checkpoint: trailing bytes in density block");
  }
  return DensityModel::FromParts(spacing, floor, std::move(chans));
}

bool ParseBool(const std::string& v) {
  if (v == "1" || v == "true") return true;
  if (v == "0" || v == "false") return false;
  Fail(ErrorKind::kDecode, "not a boolean: '" + v + "'");
}

int64_t ParseInt(const std::string& v) {
  try {
    size_t pos = 0;
    const long long x = std::stoll(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    Fail(ErrorKind::kDecode, "not an integer: '" + v + "'");
  }
}

}  // namespace

const char* MetricName(Metric m) { return m == Metric::kMse ? "mse" : "nlp"; }

Metric ParseMetric(const std::string& name) {
  if (name == "mse") return Metric::kMse;
  if (name == "nlp") return Metric::kNlp;
  Fail(ErrorKind::kArgument, "unknown metric '" + name + "'");
}

void TrainConfig::Validate() const {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    Fail(ErrorKind::kArgument, "lambda must be a finite nonnegative number");
  }
  if (steps < 1) Fail(ErrorKind::kArgument, "steps must be >= 1");
  if (batch_size < 1 || patch_side < 1 || block_side < 1) {
    Fail(ErrorKind::kArgument, "batch, patch and block sizes must be positive");
  }
  if (patch_side % block_side != 0) {
    Fail(ErrorKind::kArgument, "patch side must be a multiple of the block side");
  }
  if (block_side > 255) Fail(ErrorKind::kArgument, "block side must be <= 255");
  if (!(learning_rate > 0.0)) Fail(ErrorKind::kArgument, "learning rate must be > 0");
  if (!(density_rate > 0.0 && density_rate <= 1.0)) {
    Fail(ErrorKind::kArgument, "density rate must lie in (0, 1]");
  }
  if (density_refresh_batches < 0) {
    Fail(ErrorKind::kArgument, "density refresh batches must be >= 0");
  }
  if (!(lr_decay_fraction >= 0.0 && lr_decay_fraction <= 1.0)) {
    Fail(ErrorKind::kArgument, "lr_decay_fraction must be in [0, 1]");
  }
  if (!(lr_final_ratio > 0.0 && lr_final_ratio <= 1.0)) {
    Fail(ErrorKind::kArgument, "lr_final_ratio must be in (0, 1]");
  }
  if (!(norm_lr_scale > 0.0)) {
    Fail(ErrorKind::kArgument, "normalization learning-rate scale must be > 0");
  }
  if (!(init_gain > 0.0) || !(gamma_init >= 0.0)) {
    Fail(ErrorKind::kArgument, "init gain must be > 0 and gamma init >= 0");
  }
  if (lambda_index < 0 || lambda_index > 0xFFFF) {
    Fail(ErrorKind::kArgument, "lambda index must fit in 16 bits");
  }
}

std::string TrainConfig::ToText() const {
  std::ostringstream s;
  s << "lambda=" << FormatDouble(lambda) << "\n"
    << "metric=" << MetricName(metric) << "\n"
    << "transform=" << TransformKindName(transform) << "\n"
    << "block_side=" << block_side << "\n"
    << "steps=" << steps << "\n"
    << "batch_size=" << batch_size << "\n"
    << "patch_side=" << patch_side << "\n"
    << "learning_rate=" << FormatDouble(learning_rate) << "\n"
    << "adam_beta1=" << FormatDouble(adam_beta1) << "\n"
    << "adam_beta2=" << FormatDouble(adam_beta2) << "\n"
    << "adam_epsilon=" << FormatDouble(adam_epsilon) << "\n"
    << "density_rate=" << FormatDouble(density_rate) << "\n"
    << "density_refresh_batches=" << density_refresh_batches << "\n"
    << "seed=" << seed << "\n"
    << "init_gain=" << FormatDouble(init_gain) << "\n"
    << "gamma_init=" << FormatDouble(gamma_init) << "\n"
    << "norm_lr_scale=" << FormatDouble(norm_lr_scale) << "\n"
    << "lr_decay_fraction=" << FormatDouble(lr_decay_fraction) << "\n"
    << "lr_final_ratio=" << FormatDouble(lr_final_ratio) << "\n"
    << "train_exponents=" << (train_exponents ? 1 : 0) << "\n"
    << "lambda_index=" << lambda_index << "\n";
  return s.str();
}

TrainConfig TrainConfig::FromText(const std::string& text) {
  TrainConfig c;
  std::stringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      Fail(ErrorKind::kDecode, "train config: malformed line '" + line + "'");
    }
    const std::string k = line.substr(0, eq);
    const std::string v = line.substr(eq + 1);
    if (k == "lambda") c.lambda = ParseDouble(v);
    else if (k == "metric") c.metric = ParseMetric(v);
    else if (k == "transform") c.transform = ParseTransformKind(v);
    else if (k == "block_side") c.block_side = static_cast<int>(ParseInt(v));
    else if (k == "steps") c.steps = ParseInt(v);
    else if (k == "batch_size") c.batch_size = static_cast<int>(ParseInt(v));
    else if (k == "patch_side") c.patch_side = static_cast<int>(ParseInt(v));
    else if (k == "learning_rate") c.learning_rate = ParseDouble(v);
    else if (k == "adam_beta1") c.adam_beta1 = ParseDouble(v);
    else if (k == "adam_beta2") c.adam_beta2 = ParseDouble(v);
    else if (k == "adam_epsilon") c.adam_epsilon = ParseDouble(v);
    else if (k == "density_rate") c.density_rate = ParseDouble(v);
    else if (k == "density_refresh_batches") {
      c.density_refresh_batches = static_cast<int>(ParseInt(v));
    } else if (k == "seed") c.seed = std::stoull(v);
    else if (k == "init_gain") c.init_gain = ParseDouble(v);
    else if (k == "gamma_init") c.gamma_init = ParseDouble(v);
    else if (k == "norm_lr_scale") c.norm_lr_scale = ParseDouble(v);
    else if (k == "lr_decay_fraction") c.lr_decay_fraction = ParseDouble(v);
    else if (k == "lr_final_ratio") c.lr_final_ratio = ParseDouble(v);
    else if (k == "train_exponents") c.train_exponents = ParseBool(v);
    else if (k == "lambda_index") c.lambda_index = static_cast<int>(ParseInt(v));
    else Fail(ErrorKind::kDecode, "train config: unknown key '" + k + "'");
  }
  return c;
}

Matrix BatchBlocks(const PatchBatch& batch, int block_side) {
  const BlockLayout layout = MakeBlockLayout(batch.side, batch.side, block_side);
  const int per = layout.block_count();
  Matrix all(layout.coefficients(), static_cast<Eigen::Index>(per) * batch.count());
  for (int p = 0; p < batch.count(); ++p) {
    all.middleCols(static_cast<Eigen::Index>(p) * per, per) =
        BlockifyArray(ToArray(batch.patches[p]), layout);
  }
  return all;
}

LossResult RdLoss(const PatchBatch& batch, const TransformParams& params,
                  const DensityModel& density, const TrainConfig& cfg,
                  const NlpConfig& nlp, const Matrix& noise) {
  const int b = params.block_side;
  if (batch.count() < 1 || batch.side % b != 0) {
    Fail(ErrorKind::kArgument, "rd_loss: patches must tile exactly into blocks");
  }
  const BlockLayout layout = MakeBlockLayout(batch.side, batch.side, b);
  const int per = layout.block_count();
  const Matrix x = BatchBlocks(batch, b);
  if (noise.rows() != x.rows() || noise.cols() != x.cols()) {
    Fail(ErrorKind::kArgument, "rd_loss: noise shape does not match the batch");
  }
  const GradRequest req = GradRequest::For(params.kind, cfg.train_exponents);

  const GdnForward fa = GdnAnalyze(x, params.analysis);
  LossResult out;
  out.noisy = fa.output + noise;
  const RateProxy rate = RateProxyBits(density, out.noisy);
  const double pixels = static_cast<double>(batch.count()) * batch.side * batch.side;
  out.rate_bpp = rate.bits / pixels;

  const GdnForward fs = GdnSynthesize(out.noisy, params.synthesis);
  Matrix xhat_bar(x.rows(), x.cols());
  double dist_sum = 0.0;
  const double weight = cfg.lambda / batch.count();
  for (int p = 0; p < batch.count(); ++p) {
    const auto cols = Eigen::seqN(static_cast<Eigen::Index>(p) * per, per);
    const PlaneArray rec = UnblockifyArray(fs.output(Eigen::all, cols), layout);
    const PlaneArray ref = ToArray(batch.patches[p]);
    const MetricValue m = cfg.metric == Metric::kMse
                              ? MseWithGradient(ref, rec)
                              : NlpDistance(ref, rec, nlp, cfg.lambda != 0.0);
    dist_sum += m.value;
    if (cfg.lambda != 0.0) {
      xhat_bar(Eigen::all, cols) = weight * BlockifyArray(m.gradient, layout);
    } else {
      xhat_bar(Eigen::all, cols).setZero();
    }
  }
  out.distortion = dist_sum / batch.count();
  out.loss = out.rate_bpp + cfg.lambda * out.distortion;
  if (!std::isfinite(out.loss)) {
    Fail(ErrorKind::kNumeric, "rd_loss: non-finite loss (rate " +
                                  FormatDouble(out.rate_bpp) + ", distortion " +
                                  FormatDouble(out.distortion) + ")");
  }

  const GdnGradients gs = GdnSynthesizeVjp(fs.cache, params.synthesis, xhat_bar, req);
  const Matrix ybar = gs.input + rate.gradient / pixels;
  GradRequest analysis_req = req;
  analysis_req.input = false;
  GdnGradients ga = GdnAnalyzeVjp(fa.cache, params.analysis, ybar, analysis_req);
  out.grads.analysis = std::move(ga.params);
  out.grads.synthesis = gs.params;
  return out;
}

LossResult RdLoss(const PatchBatch& batch, const TransformParams& params,
                  const DensityModel& density, const TrainConfig& cfg,
                  const NlpConfig& nlp, Rng& rng) {
  const int b = params.block_side;
  const Eigen::Index cols =
      static_cast<Eigen::Index>(batch.count()) * (batch.side / b) * (batch.side / b);
  const Matrix noise = UniformNoise(b * b, cols, rng);
  return RdLoss(batch, params, density, cfg, nlp, noise);
}

Vector PackTrainable(const TransformParams& params, const GradRequest& req) {
  std::vector<double> flat;
  for (const GdnParams* p : {&params.analysis, &params.synthesis}) {
    ForEachArray(*p, [&](const auto& a, int which) {
      if (!Requested(req, which)) return;
      flat.insert(flat.end(), a.data(), a.data() + a.size());
    });
  }
  return Eigen::Map<Vector>(flat.data(), static_cast<Eigen::Index>(flat.size()));
}

void UnpackTrainable(const Vector& flat, const GradRequest& req,
                     TransformParams* params) {
  Eigen::Index pos = 0;
  for (GdnParams* p : {&params->analysis, &params->synthesis}) {
    ForEachArray(*p, [&](auto& a, int which) {
      if (!Requested(req, which)) return;
      if (pos + a.size() > flat.size()) {
        Fail(ErrorKind::kArgument, "unpack: flat vector too short");
      }
      std::memcpy(a.data(), flat.data() + pos, sizeof(double) * a.size());
      pos += a.size();
    });
  }
  if (pos != flat.size()) Fail(ErrorKind::kArgument, "unpack: flat vector too long");
}

Vector PackGradients(const TransformGrads& grads, const GradRequest& req) {
  TransformParams tmp;
  tmp.analysis = grads.analysis;
  tmp.synthesis = grads.synthesis;
  return PackTrainable(tmp, req);
}

double LearningRateAt(const TrainConfig& cfg, int64_t step) {
  const double decay_steps = cfg.lr_decay_fraction * static_cast<double>(cfg.steps);
  const double into = static_cast<double>(step) - (static_cast<double>(cfg.steps) - decay_steps);
  if (decay_steps <= 0.0 || into <= 0.0) return cfg.learning_rate;
  return cfg.learning_rate * std::pow(cfg.lr_final_ratio, std::min(1.0, into / decay_steps));
}

void AdamStep(const Vector& grads, const AdamConfig& cfg, OptimizerState* state,
              Vector* params, const Vector* lr_scale) {
  if (grads.size() != params->size() ||
      (lr_scale != nullptr && lr_scale->size() != params->size())) {
    Fail(ErrorKind::kArgument, "adam: gradient and parameter sizes differ");
  }
  if (state->m.size() == 0) {
    state->m = Vector::Zero(params->size());
    state->v = Vector::Zero(params->size());
  }
  if (state->m.size() != params->size() || state->v.size() != params->size()) {
    Fail(ErrorKind::kArgument, "adam: optimizer state shape mismatch");
  }
  ++state->step;
  const double t = static_cast<double>(state->step);
  state->m = cfg.beta1 * state->m + (1.0 - cfg.beta1) * grads;
  state->v = cfg.beta2 * state->v + (1.0 - cfg.beta2) * grads.cwiseAbs2();
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  const Eigen::ArrayXd step = cfg.learning_rate * (state->m.array() / c1) /
                              ((state->v.array() / c2).sqrt() + cfg.epsilon);
  if (lr_scale != nullptr) {
    params->array() -= step * lr_scale->array();
  } else {
    params->array() -= step;
  }
}

void ProjectParams(TransformParams* params) {
  for (GdnParams* p : {&params->analysis, &params->synthesis}) {
    p->beta = p->beta.cwiseMax(kMinBeta);
    p->gamma = p->gamma.cwiseMax(0.0);
    p->alpha = p->alpha.cwiseMax(1.0);
    p->epsilon = p->epsilon.cwiseMax(kMinEpsilon).cwiseMin(1.0);
  }
}

std::vector<uint8_t> SerializeCheckpoint(const Checkpoint& ckpt) {
  const TransformParams& p = ckpt.params;
  if (p.block_side < 1 || p.block_side > 255) {
    Fail(ErrorKind::kArgument, "checkpoint: block side must fit in a byte");
  }
  ByteWriter w;
  w.Bytes({reinterpret_cast<const uint8_t*>(kCheckpointMagic), 4});
  w.U16(Checkpoint::kVersion);
  w.U8(static_cast<uint8_t>(p.kind));
  w.U8(static_cast<uint8_t>(p.block_side));
  WriteStage(&w, p.analysis);
  WriteStage(&w, p.synthesis);
  const auto density = SerializeDensity(ckpt.density);
  w.U64(density.size());
  w.Bytes(density);
  w.Text(ckpt.nlp.ToText());
  w.Text(ckpt.config.ToText());
  w.U64(static_cast<uint64_t>(ckpt.steps));
  const uint64_t digest = Fnv1a64(w.bytes());
  w.U64(digest);
  return w.Release();
}

Checkpoint ParseCheckpoint(std::span<const uint8_t> bytes) {
  ByteReader r(bytes);
  const auto magic = r.Bytes(4);
  if (std::memcmp(magic.data(), kCheckpointMagic, 4) != 0) {
    Fail(ErrorKind::kCorrupt, "not a model checkpoint (bad magic)");
  }
  const uint16_t version = r.U16();
  if (version != Checkpoint::kVersion) {
    Fail(ErrorKind::kVersion, "unsupported checkpoint version " +
                                  std::to_string(version));
  }
  if (bytes.size() < 8 + r.position()) {
    Fail(ErrorKind::kCorrupt, "checkpoint truncated");
  }
  const auto body = bytes.first(bytes.size() - 8);
  ByteReader tail(bytes.last(8));
  if (Fnv1a64(body) != tail.U64()) {
    Fail(ErrorKind::kCorrupt, "checkpoint digest mismatch (truncated or corrupt)");
  }
  Checkpoint ckpt;
  const uint8_t kind = r.U8();
  if (kind > 1) Fail(ErrorKind::kCorrupt, "checkpoint: unknown transform kind");
  ckpt.params.kind = static_cast<TransformKind>(kind);
  ckpt.params.block_side = r.U8();
  if (ckpt.params.block_side < 1) Fail(ErrorKind::kCorrupt, "checkpoint: zero block side");
  const int d = ckpt.params.dim();
  ReadStage(&r, d, &ckpt.params.analysis);
  ReadStage(&r, d, &ckpt.params.synthesis);
  const uint64_t dlen = r.U64();
  if (dlen > r.remaining()) Fail(ErrorKind::kCorrupt, "checkpoint: density block truncated");
  ckpt.density = ParseDensity(r.Bytes(dlen));
  if (ckpt.density.channels() != d) {
    Fail(ErrorKind::kCorrupt, "checkpoint: density channels != block coefficients");
  }
  ckpt.nlp = NlpConfig::FromText(r.Text());
  ckpt.config = TrainConfig::FromText(r.Text());
  ckpt.steps = static_cast<int64_t>(r.U64());
  if (r.remaining() != 8) Fail(ErrorKind::kCorrupt, "checkpoint: unexpected trailing data");
  try {
    ValidateParams(ckpt.params.analysis);
    ValidateParams(ckpt.params.synthesis);
  } catch (const Error& e) {
    Fail(ErrorKind::kCorrupt, std::string("checkpoint: ") + e.what());
  }
  return ckpt;
}

void SaveCheckpoint(const Checkpoint& ckpt, const std::string& path) {
  WriteFileAtomic(path, SerializeCheckpoint(ckpt));
}

Checkpoint LoadCheckpoint(const std::string& path) {
  return ParseCheckpoint(ReadFileBytes(path));
}

uint64_t CheckpointDigest(const Checkpoint& ckpt) {
  const auto bytes = SerializeCheckpoint(ckpt);
  ByteReader tail(std::span<const uint8_t>(bytes).last(8));
  return tail.U64();
}

Checkpoint Train(std::span<const ImagePlane> corpus, const TrainConfig& cfg,
                 const NlpConfig& nlp, const ProgressFn& progress) {
  cfg.Validate();
  nlp.Validate();
  if (cfg.metric == Metric::kNlp &&
      cfg.patch_side < (1 << nlp.levels)) {
    Fail(ErrorKind::kArgument, "patch side too small for the NLP pyramid");
  }
  Rng rng(cfg.seed);
  Checkpoint ckpt;
  ckpt.nlp = nlp;
  ckpt.config = cfg;
  ckpt.params = InitParams(cfg.transform, cfg.block_side, rng, cfg.init_gain,
                           cfg.gamma_init);
  const int d = ckpt.params.dim();
  ckpt.density = DensityModel(d);

  auto sample_codes = [&]() {
    const PatchBatch batch = SamplePatches(corpus, cfg.batch_size, cfg.patch_side, rng);
    const Matrix y = GdnAnalyze(BatchBlocks(batch, cfg.block_side),
                                ckpt.params.analysis).output;
    return Matrix(y + UniformNoise(y.rows(), y.cols(), rng));
  };
  ckpt.density.Update(sample_codes(), 1.0);

  const GradRequest req = GradRequest::For(cfg.transform, cfg.train_exponents);
  AdamConfig adam{cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2,
                        cfg.adam_epsilon};
  OptimizerState state;
  Vector flat = PackTrainable(ckpt.params, req);
  // Per-coordinate multipliers: filters move at the base rate, the
  // normalization parameters at norm_lr_scale times it.
  TransformParams scale_shape = ckpt.params;
  for (GdnParams* p : {&scale_shape.analysis, &scale_shape.synthesis}) {
    p->filters.setOnes();
    p->beta.setConstant(cfg.norm_lr_scale);
    p->gamma.setConstant(cfg.norm_lr_scale);
    p->alpha.setConstant(cfg.norm_lr_scale);
    p->epsilon.setConstant(cfg.norm_lr_scale);
  }
  const Vector lr_scale = PackTrainable(scale_shape, req);
  for (int64_t step = 1; step <= cfg.steps; ++step) {
    const PatchBatch batch = SamplePatches(corpus, cfg.batch_size, cfg.patch_side, rng);
    LossResult loss;
    try {
      loss = RdLoss(batch, ckpt.params, ckpt.density, cfg, nlp, rng);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kNumeric) throw;
      throw TrainingDivergedError(
          "training diverged at step " + std::to_string(step) + ": " + e.what(),
          ckpt);
    }
    Vector next = flat;
    adam.learning_rate = LearningRateAt(cfg, step);
    AdamStep(PackGradients(loss.grads, req), adam, &state, &next, &lr_scale);
    if (!next.allFinite()) {
      throw TrainingDivergedError(
          "training diverged at step " + std::to_string(step) +
              ": non-finite parameter update",
          ckpt);
    }
    TransformParams updated = ckpt.params;
    UnpackTrainable(next, req, &updated);
    ProjectParams(&updated);
    ckpt.params = std::move(updated);
    flat = PackTrainable(ckpt.params, req);
    ckpt.density.Update(loss.noisy, cfg.density_rate);
    ckpt.steps = step;
    if (progress) progress({step, loss.loss, loss.rate_bpp, loss.distortion});
  }
  for (int i = 0; i < cfg.density_refresh_batches; ++i) {
    ckpt.density.Update(sample_codes(), cfg.density_rate);
  }
  return ckpt;
}

}  // namespace ntc
