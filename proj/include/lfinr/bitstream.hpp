#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "lfinr/model.hpp"
#include "lfinr/prune.hpp"
#include "lfinr/quantize.hpp"
#include "lfinr/range_coder.hpp"

namespace lfinr {

// CRC-32 (IEEE, reflected polynomial 0xEDB88320), table-driven.
inline std::uint32_t crc32(const std::uint8_t* data, std::size_t size,
                           std::uint32_t crc = 0) {
  static const std::array<std::uint32_t, 256> table = [] {
    std::array<std::uint32_t, 256> t{};
    for (std::uint32_t i = 0; i < 256; ++i) {
      std::uint32_t c = i;
      for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
      t[i] = c;
    }
    return t;
  }();
  crc = ~crc;
  for (std::size_t i = 0; i < size; ++i) crc = table[(crc ^ data[i]) & 0xFF] ^ (crc >> 8);
  return ~crc;
}

namespace detail {

class ByteWriter {
public:
  std::vector<std::uint8_t> bytes;

  void u8(std::uint8_t v) { bytes.push_back(v); }
  void u16(std::uint32_t v) {
    bytes.push_back(static_cast<std::uint8_t>(v));
    bytes.push_back(static_cast<std::uint8_t>(v >> 8));
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    u32(bits);
  }
  void raw(const std::uint8_t* p, std::size_t n) { bytes.insert(bytes.end(), p, p + n); }
};

class ByteReader {
public:
  ByteReader(const std::uint8_t* p, std::size_t n) : p_(p), n_(n) {}

  std::uint8_t u8() {
    need(1);
    return p_[pos_++];
  }
  std::uint32_t u16() {
    need(2);
    std::uint32_t v = p_[pos_] | (p_[pos_ + 1] << 8);
    pos_ += 2;
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(p_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  float f32() {
    const std::uint32_t bits = u32();
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
  }
  const std::uint8_t* raw(std::size_t n) {
    need(n);
    const std::uint8_t* p = p_ + pos_;
    pos_ += n;
    return p;
  }
  std::size_t remaining() const { return n_ - pos_; }

private:
  void need(std::size_t n) const {
    if (pos_ + n > n_) throw BitstreamError("bitstream truncated");
  }
  const std::uint8_t* p_;
  std::size_t n_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline constexpr char kBitstreamMagic[4] = {'L', 'F', 'I', 'N'};
inline constexpr std::uint8_t kBitstreamVersion = 1;

struct DecodedStream {
  ModelConfig config;
  int quant_bits = 8;
  PruneMask mask;
  // model parameters are filled with the dequantized values
};

// Serializes the model into the container format (docs/bitstream.md): a
// little-endian header that rebuilds the architecture, one record per
// parameter tensor (explicit keep-mask bits coded with an adaptive binary
// model, then kept-position symbols with a 2^b-ary model), and a CRC-32
// over everything that precedes it.
//
// Only default activation switches are representable in version 1.
template <typename S>
std::vector<std::uint8_t> serialize(const Model<S>& model, const PruneMask& mask,
                                    int quant_bits, bool per_tensor_range = true) {
  const ModelConfig& cfg = model.config;
  cfg.validate();
  if (cfg.output_activation != OutputActivation::kSigmoid ||
      !cfg.residual_post_activation)
    throw ConfigError("serialize: bitstream v1 encodes only the default activations");
  if (quant_bits < 1 || quant_bits > 16)
    throw ConfigError("serialize: quant bits must be in [1, 16]");
  if (cfg.blocks.size() > 255 || model.params.size() > 65535)
    throw ConfigError("serialize: model too large for the container");

  detail::ByteWriter w;
  w.raw(reinterpret_cast<const std::uint8_t*>(kBitstreamMagic), 4);
  w.u8(kBitstreamVersion);
  w.u16(static_cast<std::uint32_t>(cfg.u_views));
  w.u16(static_cast<std::uint32_t>(cfg.v_views));
  w.u16(static_cast<std::uint32_t>(cfg.crop_h));
  w.u16(static_cast<std::uint32_t>(cfg.crop_w));
  w.u16(static_cast<std::uint32_t>(cfg.out_h));
  w.u16(static_cast<std::uint32_t>(cfg.out_w));
  w.f32(static_cast<float>(cfg.pe.b));
  w.u8(static_cast<std::uint8_t>(cfg.pe.L));
  w.u16(static_cast<std::uint32_t>(cfg.mlp_hidden));
  w.u8(static_cast<std::uint8_t>(cfg.h0));
  w.u8(static_cast<std::uint8_t>(cfg.w0));
  w.u16(static_cast<std::uint32_t>(cfg.c0));
  w.u8(static_cast<std::uint8_t>(cfg.blocks.size()));
  for (const auto& blk : cfg.blocks) {
    w.u8(static_cast<std::uint8_t>(blk.factor));
    w.u16(static_cast<std::uint32_t>(blk.channels));
  }
  w.u8(static_cast<std::uint8_t>(quant_bits));
  w.u16(static_cast<std::uint32_t>(model.params.size()));

  float global_lo = 0.0f, global_hi = 0.0f;
  bool have_global = false;
  if (!per_tensor_range) {
    for (std::size_t id = 0; id < model.params.size(); ++id) {
      const auto& p = model.params[id];
      const std::vector<std::uint8_t>* kept =
          mask.has_mask(id) ? &mask.kept[id] : nullptr;
      float lo, hi;
      if (!kept_range<S>(p.tensor.value(), kept, lo, hi)) continue;
      if (!have_global) {
        global_lo = lo;
        global_hi = hi;
        have_global = true;
      } else {
        global_lo = std::min(global_lo, lo);
        global_hi = std::max(global_hi, hi);
      }
    }
  }

  for (std::size_t id = 0; id < model.params.size(); ++id) {
    const auto& p = model.params[id];
    const std::vector<std::uint8_t>* kept = nullptr;
    bool pruned = false;
    if (mask.has_mask(id)) {
      const auto& bits = mask.kept[id];
      if (static_cast<std::int64_t>(bits.size()) != p.tensor.numel())
        throw NumericError("serialize: mask/tensor shape mismatch for " + p.name);
      for (std::uint8_t b : bits)
        if (!b) {
          pruned = true;
          break;
        }
      if (pruned) kept = &bits;
    }

    w.u16(static_cast<std::uint32_t>(id));
    w.u8(static_cast<std::uint8_t>(p.tensor.shape().size()));
    for (int d : p.tensor.shape()) w.u32(static_cast<std::uint32_t>(d));
    w.u8(pruned ? 1 : 0);

    const QuantRecord rec =
        per_tensor_range
            ? quantize_tensor<S>(p.tensor.value(), kept, quant_bits)
            : quantize_tensor<S>(p.tensor.value(), kept, quant_bits,
                                 have_global ? &global_lo : nullptr,
                                 have_global ? &global_hi : nullptr);
    w.f32(rec.min_v);
    w.f32(rec.max_v);

    if (pruned) {
      std::vector<std::uint32_t> bits(kept->begin(), kept->end());
      const std::vector<std::uint8_t> payload = arith_encode(bits, 2);
      w.u32(static_cast<std::uint32_t>(payload.size()));
      w.raw(payload.data(), payload.size());
    }
    const std::vector<std::uint8_t> payload =
        arith_encode(rec.symbols, 1u << quant_bits);
    w.u32(static_cast<std::uint32_t>(payload.size()));
    w.raw(payload.data(), payload.size());
  }

  w.u32(crc32(w.bytes.data(), w.bytes.size()));
  return w.bytes;
}

// Rebuilds config, masks and dequantized parameters. The CRC is verified
// over the whole stream before any parsing, so corruption is always
// reported rather than yielding a silently wrong model.
template <typename S>
Model<S> deserialize(const std::uint8_t* data, std::size_t size, DecodedStream* info = nullptr) {
  if (size < 9) throw BitstreamError("bitstream truncated");
  const std::uint32_t stored = static_cast<std::uint32_t>(data[size - 4]) |
                               (static_cast<std::uint32_t>(data[size - 3]) << 8) |
                               (static_cast<std::uint32_t>(data[size - 2]) << 16) |
                               (static_cast<std::uint32_t>(data[size - 1]) << 24);
  if (crc32(data, size - 4) != stored)
    throw BitstreamError("bitstream checksum mismatch");

  detail::ByteReader r(data, size - 4);
  char magic[4];
  std::memcpy(magic, r.raw(4), 4);
  if (std::memcmp(magic, kBitstreamMagic, 4) != 0)
    throw BitstreamError("bad magic: not an LFIN bitstream");
  const std::uint8_t version = r.u8();
  if (version != kBitstreamVersion)
    throw BitstreamError("unsupported bitstream version " + std::to_string(version));

  ModelConfig cfg;
  cfg.u_views = static_cast<int>(r.u16());
  cfg.v_views = static_cast<int>(r.u16());
  cfg.crop_h = static_cast<int>(r.u16());
  cfg.crop_w = static_cast<int>(r.u16());
  cfg.out_h = static_cast<int>(r.u16());
  cfg.out_w = static_cast<int>(r.u16());
  cfg.pe.b = static_cast<double>(r.f32());
  cfg.pe.L = static_cast<int>(r.u8());
  cfg.mlp_hidden = static_cast<int>(r.u16());
  cfg.h0 = static_cast<int>(r.u8());
  cfg.w0 = static_cast<int>(r.u8());
  cfg.c0 = static_cast<int>(r.u16());
  const int n_blocks = static_cast<int>(r.u8());
  for (int i = 0; i < n_blocks; ++i) {
    BlockConfig blk;
    blk.factor = static_cast<int>(r.u8());
    blk.channels = static_cast<int>(r.u16());
    cfg.blocks.push_back(blk);
  }
  const int quant_bits = static_cast<int>(r.u8());
  const std::size_t n_tensors = r.u16();
  try {
    cfg.validate();
  } catch (const ConfigError& e) {
    throw BitstreamError(std::string("header/shape inconsistency: ") + e.what());
  }
  if (quant_bits < 1 || quant_bits > 16)
    throw BitstreamError("header/shape inconsistency: bad quant bits");

  Model<S> model = build_model<S>(cfg, 0);
  if (n_tensors != model.params.size())
    throw BitstreamError("header/shape inconsistency: tensor count mismatch");

  PruneMask mask;
  mask.kept.resize(model.params.size());

  for (std::size_t i = 0; i < n_tensors; ++i) {
    const std::size_t id = r.u16();
    if (id != i) throw BitstreamError("header/shape inconsistency: tensor ids out of order");
    auto& p = model.params[id];
    const int ndim = static_cast<int>(r.u8());
    if (ndim != static_cast<int>(p.tensor.shape().size()))
      throw BitstreamError("header/shape inconsistency: rank mismatch for " + p.name);
    for (int d = 0; d < ndim; ++d)
      if (static_cast<int>(r.u32()) != p.tensor.shape()[d])
        throw BitstreamError("header/shape inconsistency: dims mismatch for " + p.name);
    const bool pruned = r.u8() != 0;

    QuantRecord rec;
    rec.bits = quant_bits;
    rec.min_v = r.f32();
    rec.max_v = r.f32();

    const std::int64_t n = p.tensor.numel();
    std::vector<std::uint8_t>* kept = nullptr;
    std::size_t kept_count = static_cast<std::size_t>(n);
    if (pruned) {
      const std::uint32_t len = r.u32();
      const std::uint8_t* payload = r.raw(len);
      const std::vector<std::uint32_t> bits =
          arith_decode(payload, len, static_cast<std::size_t>(n), 2);
      mask.kept[id].assign(bits.begin(), bits.end());
      kept = &mask.kept[id];
      kept_count = 0;
      for (std::uint8_t b : mask.kept[id]) kept_count += b;
    }
    const std::uint32_t len = r.u32();
    const std::uint8_t* payload = r.raw(len);
    rec.symbols = arith_decode(payload, len, kept_count, 1u << quant_bits);
    dequantize_into(p.tensor.value(), rec, kept);
  }
  if (r.remaining() != 0) throw BitstreamError("bitstream has trailing bytes");

  if (info) {
    info->config = cfg;
    info->quant_bits = quant_bits;
    info->mask = std::move(mask);
  }
  return model;
}

template <typename S>
Model<S> deserialize(const std::vector<std::uint8_t>& data, DecodedStream* info = nullptr) {
  return deserialize<S>(data.data(), data.size(), info);
}

// Applies the same quantize/dequantize arithmetic the decoder will perform,
// in place, so the encoder can evaluate exactly what a decoder reconstructs.
template <typename S>
void apply_quantization(Model<S>& model, const PruneMask& mask, int quant_bits,
                        bool per_tensor_range = true) {
  float global_lo = 0.0f, global_hi = 0.0f;
  bool have_global = false;
  if (!per_tensor_range) {
    for (std::size_t id = 0; id < model.params.size(); ++id) {
      const auto& p = model.params[id];
      const std::vector<std::uint8_t>* kept =
          mask.has_mask(id) ? &mask.kept[id] : nullptr;
      float lo, hi;
      if (!kept_range<S>(p.tensor.value(), kept, lo, hi)) continue;
      if (!have_global) {
        global_lo = lo;
        global_hi = hi;
        have_global = true;
      } else {
        global_lo = std::min(global_lo, lo);
        global_hi = std::max(global_hi, hi);
      }
    }
  }
  for (std::size_t id = 0; id < model.params.size(); ++id) {
    auto& p = model.params[id];
    const std::vector<std::uint8_t>* kept = nullptr;
    if (mask.has_mask(id)) {
      bool pruned = false;
      for (std::uint8_t b : mask.kept[id])
        if (!b) {
          pruned = true;
          break;
        }
      if (pruned) kept = &mask.kept[id];
    }
    const QuantRecord rec =
        per_tensor_range
            ? quantize_tensor<S>(p.tensor.value(), kept, quant_bits)
            : quantize_tensor<S>(p.tensor.value(), kept, quant_bits,
                                 have_global ? &global_lo : nullptr,
                                 have_global ? &global_hi : nullptr);
    dequantize_into(p.tensor.value(), rec, kept);
  }
}

inline void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot create " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write to " + path);
}

inline std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw IoError("cannot open " + path);
  const std::streamsize n = in.tellg();
  in.seekg(0);
  std::vector<std::uint8_t> bytes(static_cast<std::size_t>(n));
  in.read(reinterpret_cast<char*>(bytes.data()), n);
  if (in.gcount() != n) throw IoError("short read from " + path);
  return bytes;
}

}  // namespace lfinr
