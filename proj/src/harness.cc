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

#include "ntc/harness.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>

namespace ntc {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

bool SameDouble(double a, double b) {
  return (std::isnan(a) && std::isnan(b)) || a == b;
}

std::vector<std::string> SplitCsv(const std::string& line) {
  std::vector<std::string> out;
  size_t start = 0;
  while (true) {
    const size_t comma = line.find(',', start);
    out.push_back(line.substr(start, comma - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

bool ByRate(const RdPoint& a, const RdPoint& b) {
  return a.rate_entropy < b.rate_entropy;
}

}  // namespace

bool RdPoint::operator==(const RdPoint& o) const {
  return codec == o.codec && SameDouble(lambda, o.lambda) &&
         SameDouble(rate_entropy, o.rate_entropy) &&
         SameDouble(rate_codelength, o.rate_codelength) &&
         SameDouble(psnr, o.psnr) && SameDouble(dnlp, o.dnlp);
}

RdPoint EvaluateCoder(const ImageCoder& coder, std::span<const ImagePlane> images,
                      const std::string& codec, double lambda,
                      const NlpConfig& metric) {
  if (images.empty()) Fail(ErrorKind::kArgument, "evaluation needs at least one image");
  std::optional<EntropyAccumulator> acc;
  int channels = 0;
  double sse = 0.0, pixels = 0.0, dnlp = 0.0, bytes = 0.0;
  bool have_stream = true;
  for (const ImagePlane& img : images) {
    const CodedImage coded = coder(img);
    if (coded.indices.size() > 0) {
      if (!acc) {
        channels = static_cast<int>(coded.indices.rows());
        acc.emplace(channels);
      }
      acc->Add(coded.indices);
    }
    const double n = static_cast<double>(img.size());
    sse += Mse(img, coded.reconstruction) * n;
    pixels += n;
    dnlp += NlpDistance(img, coded.reconstruction, metric);
    if (coded.coded_bytes < 0) {
      have_stream = false;
    } else {
      bytes += coded.coded_bytes;
    }
  }
  RdPoint p;
  p.codec = codec;
  p.lambda = lambda;
  // Pooled channel entropies times the number of coded blocks, spread over
  // the true (unpadded) pixels.
  p.rate_entropy =
      acc ? acc->BitsPerPixel() * channels * static_cast<double>(acc->samples()) / pixels
          : 0.0;
  p.rate_codelength = have_stream ? 8.0 * bytes / pixels : kNan;
  p.psnr = PsnrFromMse(sse / pixels);
  p.dnlp = dnlp / static_cast<double>(images.size());
  return p;
}

ImageCoder LearnedCoder(const Codec& codec) {
  return [&codec](const ImagePlane& img) {
    const Bitstream bs = codec.Compress(img);
    CodedImage out;
    out.reconstruction = codec.Decompress(bs, &out.indices);
    out.coded_bytes = static_cast<double>(bs.size());
    return out;
  };
}

ImageCoder IdentityCoder() {
  return [](const ImagePlane& img) {
    CodedImage out;
    out.reconstruction = img;
    return out;
  };
}

ImageCoder DctCoder(int block_side, const DeadzoneQuantizer& quantizer) {
  if (!(quantizer.step > 0.0) || !(quantizer.zone_ratio >= 1.0)) {
    Fail(ErrorKind::kArgument, "dead-zone quantizer needs step > 0 and zone ratio >= 1");
  }
  const Matrix basis = MakeDctBasis(block_side);
  return [block_side, basis, quantizer](const ImagePlane& img) {
    const BlockSet set = Blockify(img, block_side);
    const DeadzoneQuantized q = QuantizeDeadzone(basis * set.blocks, quantizer);
    CodedImage out;
    out.indices = q.indices;
    out.reconstruction =
        ClampToUnit(UnblockifyArray(basis.transpose() * q.reconstruction, set.layout));
    return out;
  };
}

std::string CodecId(const TrainConfig& cfg) {
  return std::string(TransformKindName(cfg.transform)) + "-" + MetricName(cfg.metric);
}

RdPoint Evaluate(const Checkpoint& ckpt, std::span<const ImagePlane> images,
                 const NlpConfig& metric) {
  const Codec codec(ckpt);
  return EvaluateCoder(LearnedCoder(codec), images, CodecId(ckpt.config),
                       ckpt.config.lambda, metric);
}

RdPoint Evaluate(const Checkpoint& ckpt, std::span<const ImagePlane> images) {
  return Evaluate(ckpt, images, ckpt.nlp);
}

std::vector<RdPoint> ParetoFront(std::vector<RdPoint> points) {
  std::erase_if(points, [](const RdPoint& p) {
    return std::isnan(p.rate_entropy) || std::isnan(p.psnr);
  });
  std::stable_sort(points.begin(), points.end(), [](const RdPoint& a, const RdPoint& b) {
    if (a.rate_entropy != b.rate_entropy) return a.rate_entropy < b.rate_entropy;
    return a.psnr > b.psnr;
  });
  std::vector<RdPoint> front;
  double best = -std::numeric_limits<double>::infinity();
  for (const RdPoint& p : points) {
    if (p.psnr > best) {
      front.push_back(p);
      best = p.psnr;
    }
  }
  return front;
}

std::vector<RdPoint> DctBaseline(std::span<const ImagePlane> images, int block_side,
                                 std::span<const double> steps,
                                 std::span<const double> zone_ratios,
                                 const NlpConfig& metric) {
  std::vector<RdPoint> uniform;
  std::vector<RdPoint> all;
  for (double step : steps) {
    for (double ratio : zone_ratios) {
      DeadzoneQuantizer dz;
      dz.step = step;
      dz.zone_ratio = ratio;
      RdPoint p = EvaluateCoder(DctCoder(block_side, dz), images, "dct-deadzone", step,
                                metric);
      all.push_back(p);
    }
    DeadzoneQuantizer u;
    u.step = step;
    RdPoint p = EvaluateCoder(DctCoder(block_side, u), images, "dct-uniform", step, metric);
    uniform.push_back(p);
  }
  std::vector<RdPoint> out = uniform;
  std::stable_sort(out.begin(), out.end(), ByRate);
  for (const RdPoint& p : ParetoFront(all)) out.push_back(p);
  return out;
}

double InterpolateAtRate(std::vector<RdPoint> points, double rate, RdField field) {
  std::erase_if(points, [](const RdPoint& p) { return std::isnan(p.rate_entropy); });
  std::stable_sort(points.begin(), points.end(), ByRate);
  auto value = [field](const RdPoint& p) {
    return field == RdField::kPsnr ? p.psnr : p.dnlp;
  };
  for (size_t i = 0; i + 1 < points.size(); ++i) {
    const double r0 = points[i].rate_entropy, r1 = points[i + 1].rate_entropy;
    if (rate < r0 || rate > r1) continue;
    if (r1 == r0) return value(points[i]);
    const double t = (rate - r0) / (r1 - r0);
    return (1.0 - t) * value(points[i]) + t * value(points[i + 1]);
  }
  if (points.size() == 1 && points[0].rate_entropy == rate) return value(points[0]);
  return kNan;
}

double HeldOutLoss(const Checkpoint& ckpt, std::span<const ImagePlane> images,
                   int batches, uint64_t seed) {
  if (batches <= 0) Fail(ErrorKind::kArgument, "held-out loss needs at least one batch");
  Rng rng(seed);
  double total = 0.0;
  for (int b = 0; b < batches; ++b) {
    const PatchBatch batch =
        SamplePatches(images, ckpt.config.batch_size, ckpt.config.patch_side, rng);
    total += RdLoss(batch, ckpt.params, ckpt.density, ckpt.config, ckpt.nlp, rng).loss;
  }
  return total / batches;
}

std::string RdCsvHeader() {
  return "codec,lambda,rate_entropy_bpp,rate_codelength_bpp,psnr_db,dnlp";
}

std::string RdCsvRow(const RdPoint& p) {
  return p.codec + "," + FormatDouble(p.lambda) + "," + FormatDouble(p.rate_entropy) +
         "," + FormatDouble(p.rate_codelength) + "," + FormatDouble(p.psnr) + "," +
         FormatDouble(p.dnlp);
}

std::string FormatRdCsv(std::span<const RdPoint> points) {
  std::string out = RdCsvHeader() + "\n";
  for (const RdPoint& p : points) out += RdCsvRow(p) + "\n";
  return out;
}

std::vector<RdPoint> ParseRdCsv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != RdCsvHeader()) {
    Fail(ErrorKind::kDecode, "missing or unexpected R-D CSV header");
  }
  std::vector<RdPoint> points;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const std::vector<std::string> f = SplitCsv(line);
    if (f.size() != 6) Fail(ErrorKind::kDecode, "R-D CSV row needs 6 fields: " + line);
    RdPoint p;
    p.codec = f[0];
    p.lambda = ParseDouble(f[1]);
    p.rate_entropy = ParseDouble(f[2]);
    p.rate_codelength = ParseDouble(f[3]);
    p.psnr = ParseDouble(f[4]);
    p.dnlp = ParseDouble(f[5]);
    points.push_back(p);
  }
  return points;
}

std::vector<RdPoint> RdSweep(std::span<const ImagePlane> corpus,
                             std::span<const ImagePlane> images,
                             std::span<const double> lambdas,
                             const TrainConfig& cfg_template, const NlpConfig& nlp,
                             const SweepOptions& options) {
  std::vector<RdPoint> points;
  if (!options.model_dir.empty()) std::filesystem::create_directories(options.model_dir);
  for (size_t i = 0; i < lambdas.size(); ++i) {
    TrainConfig cfg = cfg_template;
    cfg.lambda = lambdas[i];
    cfg.lambda_index = static_cast<int>(i);
    const std::string id = CodecId(cfg);
    try {
      cfg.Validate();
      std::optional<Checkpoint> ckpt;
      std::string path;
      if (!options.model_dir.empty()) {
        path = (std::filesystem::path(options.model_dir) /
                (id + "-" + std::to_string(i) + ".ntcm"))
                   .string();
        if (std::filesystem::exists(path)) {
          Checkpoint cached = LoadCheckpoint(path);
          if (cached.config == cfg && cached.nlp == nlp) ckpt = std::move(cached);
        }
      }
      if (!ckpt) {
        ProgressFn progress;
        if (options.log && options.log_every > 0) {
          progress = [&](const TrainProgress& tp) {
            if (tp.step % options.log_every == 0) {
              *options.log << id << " lambda=" << FormatDouble(cfg.lambda)
                           << " step=" << tp.step << " loss=" << FormatDouble(tp.loss)
                           << " rate=" << FormatDouble(tp.rate_bpp)
                           << " dist=" << FormatDouble(tp.distortion) << "\n";
            }
          };
        }
        ckpt = Train(corpus, cfg, nlp, progress);
        if (!path.empty()) SaveCheckpoint(*ckpt, path);
      }
      points.push_back(Evaluate(*ckpt, images, nlp));
    } catch (const Error& e) {
      if (options.log) {
        *options.log << id << " lambda=" << FormatDouble(cfg.lambda)
                     << " failed: " << e.what() << "\n";
      }
      points.push_back(RdPoint{id, cfg.lambda, kNan, kNan, kNan, kNan});
    }
  }
  return points;
}

}  // namespace ntc
