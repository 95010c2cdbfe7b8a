#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "lfinr/tensor.hpp"

namespace lfinr {

// Affine quantization of one parameter tensor. min/max cover kept positions
// only and are stored as 32-bit floats so the decoder reproduces the exact
// same dequantization arithmetic.
struct QuantRecord {
  float min_v = 0.0f;
  float max_v = 0.0f;
  int bits = 8;
  std::vector<std::uint32_t> symbols;  // one per kept position, flat order

  // scale factor S = (max - min) / 2^bits; 1 when the range collapses
  double scale() const {
    if (max_v == min_v) return 1.0;
    return (static_cast<double>(max_v) - static_cast<double>(min_v)) /
           static_cast<double>(1u << bits);
  }
};

// Range of the kept positions, as the 32-bit floats the stream stores.
template <typename S>
bool kept_range(const Vec<S>& values, const std::vector<std::uint8_t>* kept, float& lo_f,
                float& hi_f) {
  bool any = false;
  double lo = 0.0, hi = 0.0;
  for (std::int64_t i = 0; i < values.size(); ++i) {
    if (kept && !(*kept)[static_cast<std::size_t>(i)]) continue;
    const double v = static_cast<double>(values[i]);
    if (!any) {
      lo = hi = v;
      any = true;
    } else {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  if (any) {
    lo_f = static_cast<float>(lo);
    hi_f = static_cast<float>(hi);
  }
  return any;
}

// symbol = clamp(round((v - min)/S), 0, 2^bits - 1). The top endpoint maps
// to 2^bits by the scale definition and is clamped into range; its error is
// bounded by S instead of S/2. A forced range overrides the per-tensor
// min/max (global-range mode).
template <typename S>
QuantRecord quantize_tensor(const Vec<S>& values, const std::vector<std::uint8_t>* kept,
                            int bits, const float* forced_min = nullptr,
                            const float* forced_max = nullptr) {
  if (bits < 1 || bits > 16) throw ConfigError("quantize: bits must be in [1, 16]");
  if (!values.allFinite()) throw NumericError("quantize: non-finite values");
  if (kept && static_cast<std::int64_t>(kept->size()) != values.size())
    throw NumericError("quantize: mask/tensor shape mismatch");

  QuantRecord rec;
  rec.bits = bits;
  float lo = 0.0f, hi = 0.0f;
  if (!kept_range(values, kept, lo, hi)) {
    if (!forced_min) return rec;  // fully pruned tensor: no symbols, zero range
    rec.min_v = *forced_min;
    rec.max_v = *forced_max;
    return rec;
  }
  rec.min_v = forced_min ? *forced_min : lo;
  rec.max_v = forced_max ? *forced_max : hi;
  const double scale = rec.scale();
  const std::int64_t top = (1ll << bits) - 1;
  for (std::int64_t i = 0; i < values.size(); ++i) {
    if (kept && !(*kept)[static_cast<std::size_t>(i)]) continue;
    const double v = static_cast<double>(values[i]);
    std::int64_t q = std::llround((v - static_cast<double>(rec.min_v)) / scale);
    q = std::max<std::int64_t>(0, std::min(top, q));
    rec.symbols.push_back(static_cast<std::uint32_t>(q));
  }
  return rec;
}

// v = symbol * S + min at kept positions, exact zero elsewhere. Shared by
// the encoder's post-quantization evaluation and the decoder, so both sides
// produce bit-identical parameters.
template <typename S>
void dequantize_into(Vec<S>& out, const QuantRecord& rec,
                     const std::vector<std::uint8_t>* kept) {
  if (kept && static_cast<std::int64_t>(kept->size()) != out.size())
    throw NumericError("dequantize: mask/tensor shape mismatch");
  const double scale = rec.scale();
  const std::uint32_t top = (1u << rec.bits) - 1;
  std::size_t s = 0;
  for (std::int64_t i = 0; i < out.size(); ++i) {
    if (kept && !(*kept)[static_cast<std::size_t>(i)]) {
      out[i] = S(0);
      continue;
    }
    if (s >= rec.symbols.size()) throw BitstreamError("dequantize: missing symbols");
    const std::uint32_t q = rec.symbols[s++];
    if (q > top) throw BitstreamError("dequantize: symbol out of range");
    out[i] = static_cast<S>(static_cast<double>(q) * scale +
                            static_cast<double>(rec.min_v));
  }
  if (s != rec.symbols.size()) throw BitstreamError("dequantize: extra symbols");
}

}  // namespace lfinr
