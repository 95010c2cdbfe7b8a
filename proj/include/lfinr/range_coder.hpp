#pragma once

#include <cstdint>
#include <vector>

#include "lfinr/common.hpp"

namespace lfinr {

// Byte-oriented integer range coder with 32-bit state and carry
// propagation (the classic cache/pending-0xFF construction). The encoder
// emits one leading zero byte and five flush bytes of overhead.
class RangeEncoder {
public:
  explicit RangeEncoder(std::vector<std::uint8_t>& out) : out_(out) {}

  void encode(std::uint32_t cum, std::uint32_t freq, std::uint32_t total) {
    range_ /= total;
    low_ += static_cast<std::uint64_t>(cum) * range_;
    range_ *= freq;
    while (range_ < kTop) {
      range_ <<= 8;
      shift_low();
    }
  }

  void finish() {
    for (int i = 0; i < 5; ++i) shift_low();
  }

private:
  static constexpr std::uint32_t kTop = 1u << 24;

  void shift_low() {
    if (static_cast<std::uint32_t>(low_) < 0xFF000000u || (low_ >> 32) != 0) {
      std::uint8_t carry = static_cast<std::uint8_t>(low_ >> 32);
      std::uint8_t byte = cache_;
      do {
        out_.push_back(static_cast<std::uint8_t>(byte + carry));
        byte = 0xFF;
      } while (--pending_ != 0);
      cache_ = static_cast<std::uint8_t>(low_ >> 24);
    }
    ++pending_;
    low_ = (low_ & 0x00FFFFFFull) << 8;
  }

  std::vector<std::uint8_t>& out_;
  std::uint64_t low_ = 0;
  std::uint32_t range_ = 0xFFFFFFFFu;
  std::uint8_t cache_ = 0;
  std::uint64_t pending_ = 1;
};

class RangeDecoder {
public:
  RangeDecoder(const std::uint8_t* data, std::size_t size) : data_(data), size_(size) {
    for (int i = 0; i < 5; ++i) code_ = (code_ << 8) | next_byte();
  }

  // Returns a value in [0, total) locating the next symbol's cumulative
  // interval.
  std::uint32_t decode_target(std::uint32_t total) {
    range_ /= total;
    std::uint32_t t = static_cast<std::uint32_t>(code_ / range_);
    return t >= total ? total - 1 : t;
  }

  void decode_update(std::uint32_t cum, std::uint32_t freq) {
    code_ -= static_cast<std::uint64_t>(cum) * range_;
    range_ *= freq;
    while (range_ < kTop) {
      code_ = (code_ << 8) | next_byte();
      range_ <<= 8;
    }
  }

private:
  static constexpr std::uint32_t kTop = 1u << 24;

  std::uint8_t next_byte() {
    if (pos_ >= size_) throw BitstreamError("arithmetic payload truncated");
    return data_[pos_++];
  }

  const std::uint8_t* data_;
  std::size_t size_;
  std::size_t pos_ = 0;
  std::uint64_t code_ = 0;
  std::uint32_t range_ = 0xFFFFFFFFu;
};

// Adaptive order-0 frequency model over a Fenwick tree: every symbol starts
// with count 1, each coded symbol adds 32 to its count, and all counts are
// halved (floor, minimum 1) once the total exceeds 2^16.
class AdaptiveModel {
public:
  static constexpr std::uint32_t kIncrement = 32;
  static constexpr std::uint32_t kMaxTotal = 1u << 16;

  explicit AdaptiveModel(std::uint32_t alphabet) : alphabet_(alphabet) {
    if (alphabet < 1) throw ConfigError("adaptive model: empty alphabet");
    counts_.assign(alphabet, 1);
    rebuild();
  }

  std::uint32_t alphabet() const { return alphabet_; }
  std::uint32_t total() const { return total_; }

  void encode(RangeEncoder& enc, std::uint32_t symbol) {
    if (symbol >= alphabet_) throw NumericError("arith_encode: symbol outside alphabet");
    enc.encode(cum_before(symbol), counts_[symbol], total_);
    update(symbol);
  }

  std::uint32_t decode(RangeDecoder& dec) {
    const std::uint32_t target = dec.decode_target(total_);
    const std::uint32_t symbol = find(target);
    dec.decode_update(cum_before(symbol), counts_[symbol]);
    update(symbol);
    return symbol;
  }

private:
  // cumulative count of symbols strictly below `symbol`
  std::uint32_t cum_before(std::uint32_t symbol) const {
    std::uint32_t sum = 0;
    for (std::uint32_t i = symbol; i > 0; i -= i & (~i + 1)) sum += tree_[i - 1];
    return sum;
  }

  // largest symbol whose cumulative-before is <= target
  std::uint32_t find(std::uint32_t target) const {
    std::uint32_t idx = 0;
    std::uint32_t rem = target;
    std::uint32_t mask = top_bit_;
    while (mask) {
      const std::uint32_t next = idx + mask;
      if (next <= alphabet_ && tree_[next - 1] <= rem) {
        rem -= tree_[next - 1];
        idx = next;
      }
      mask >>= 1;
    }
    return idx;
  }

  void add(std::uint32_t symbol, std::uint32_t delta) {
    for (std::uint32_t i = symbol + 1; i <= alphabet_; i += i & (~i + 1))
      tree_[i - 1] += delta;
  }

  void update(std::uint32_t symbol) {
    counts_[symbol] += kIncrement;
    total_ += kIncrement;
    add(symbol, kIncrement);
    if (total_ > kMaxTotal) {
      for (auto& c : counts_) c = std::max(1u, c >> 1);
      rebuild();
    }
  }

  void rebuild() {
    tree_.assign(alphabet_, 0);
    total_ = 0;
    top_bit_ = 1;
    while ((top_bit_ << 1) <= alphabet_) top_bit_ <<= 1;
    for (std::uint32_t s = 0; s < alphabet_; ++s) {
      total_ += counts_[s];
      add(s, counts_[s]);
    }
  }

  std::uint32_t alphabet_;
  std::vector<std::uint32_t> counts_;
  std::vector<std::uint32_t> tree_;
  std::uint32_t total_ = 0;
  std::uint32_t top_bit_ = 1;
};

// Whole-sequence helpers; an empty sequence encodes to an empty payload.
inline std::vector<std::uint8_t> arith_encode(const std::vector<std::uint32_t>& symbols,
                                              std::uint32_t alphabet) {
  std::vector<std::uint8_t> out;
  if (symbols.empty()) return out;
  RangeEncoder enc(out);
  AdaptiveModel model(alphabet);
  for (std::uint32_t s : symbols) model.encode(enc, s);
  enc.finish();
  return out;
}

inline std::vector<std::uint32_t> arith_decode(const std::uint8_t* data, std::size_t size,
                                               std::size_t count, std::uint32_t alphabet) {
  std::vector<std::uint32_t> symbols;
  if (count == 0) return symbols;
  symbols.reserve(count);
  RangeDecoder dec(data, size);
  AdaptiveModel model(alphabet);
  for (std::size_t i = 0; i < count; ++i) symbols.push_back(model.decode(dec));
  return symbols;
}

inline std::vector<std::uint32_t> arith_decode(const std::vector<std::uint8_t>& data,
                                               std::size_t count, std::uint32_t alphabet) {
  return arith_decode(data.data(), data.size(), count, alphabet);
}

}  // namespace lfinr
