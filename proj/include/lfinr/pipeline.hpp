#pragma once

#include <chrono>

#include "lfinr/bitstream.hpp"
#include "lfinr/config_json.hpp"
#include "lfinr/metrics.hpp"
#include "lfinr/trainer.hpp"

namespace lfinr {

struct StageTimings {
  double train_s = 0.0;
  double prune_s = 0.0;
  double finetune_s = 0.0;
  double quantize_s = 0.0;
  double serialize_s = 0.0;
};

template <typename S>
struct EncodeResult {
  Model<S> model;  // dequantized parameters: exactly what a decoder rebuilds
  std::vector<std::uint8_t> bitstream;
  TrainLog train_log;
  TrainLog finetune_log;
  QualityReport pre_compress;   // trained model vs. input
  QualityReport post_compress;  // dequantized model vs. input
  StageTimings timings;
};

template <typename S>
LightField<S> render_field(const Model<S>& model) {
  const ModelConfig& cfg = model.config;
  LightField<S> lf(cfg.u_views, cfg.v_views, cfg.crop_h, cfg.crop_w);
  for (int u = 0; u < cfg.u_views; ++u)
    for (int v = 0; v < cfg.v_views; ++v) lf.view(u, v) = model.forward({u, v});
  return lf;
}

// Full encoding pipeline: train, prune, masked fine-tune, quantize,
// entropy-code. A prune ratio of zero skips the fine-tune stage. The
// returned model carries the dequantized parameters so its renders match
// the decoder's bit for bit.
template <typename S>
EncodeResult<S> encode_lightfield(const LightField<S>& lf, const FullConfig& cfg) {
  cfg.model.validate();
  cfg.train.validate();
  cfg.compress.validate();
  using clock = std::chrono::steady_clock;
  const auto stamp = [](clock::time_point& t) {
    const auto now = clock::now();
    const double s = std::chrono::duration<double>(now - t).count();
    t = now;
    return s;
  };

  EncodeResult<S> result;
  auto t = clock::now();
  result.model = build_model<S>(cfg.model, cfg.train.seed);
  result.train_log = train(result.model, lf, cfg.train);
  result.timings.train_s = stamp(t);

  result.pre_compress = evaluate_field(lf, render_field(result.model));
  t = clock::now();

  PruneMask mask = prune_global(result.model, cfg.compress.prune_ratio);
  apply_mask(result.model, mask);
  result.timings.prune_s = stamp(t);

  if (cfg.compress.prune_ratio > 0.0 && cfg.train.finetune_epochs > 0) {
    result.finetune_log = finetune_masked(result.model, lf, mask, cfg.train);
    result.timings.finetune_s = stamp(t);
  }

  result.bitstream = serialize(result.model, mask, cfg.compress.quant_bits,
                               cfg.compress.per_tensor_range);
  result.timings.serialize_s = stamp(t);

  apply_quantization(result.model, mask, cfg.compress.quant_bits,
                     cfg.compress.per_tensor_range);
  result.timings.quantize_s = stamp(t);

  result.post_compress = evaluate_field(lf, render_field(result.model),
                                        result.bitstream.size());
  return result;
}

}  // namespace lfinr
