#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace lfinr {

inline constexpr const char* kVersion = "0.1.0";

// Error hierarchy. The CLI maps these onto process exit codes.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed or inconsistent configuration (shape algebra, bad ranges).
class ConfigError : public Error {
public:
  using Error::Error;
};

// File system / image format problems, including malformed inputs.
class IoError : public Error {
public:
  using Error::Error;
};

// Numeric contract violations: non-finite values, degenerate divisors,
// shape mismatches between tensors.
class NumericError : public Error {
public:
  using Error::Error;
};

// Training diverged or the tape was misused.
class TrainError : public Error {
public:
  using Error::Error;
};

// Anything wrong with a serialized bitstream.
class BitstreamError : public Error {
public:
  using Error::Error;
};

// Deterministic RNG used everywhere randomness is needed. mt19937 has a
// fixed algorithm, and the float mapping below avoids the distribution
// classes whose output differs between standard libraries.
class Rng {
public:
  explicit Rng(std::uint32_t seed) : gen_(seed) {}

  std::uint32_t next_u32() { return gen_(); }

  // Uniform in [0, 1) with 24 bits of randomness; exact in float.
  double uniform() { return static_cast<double>(gen_() >> 8) * (1.0 / 16777216.0); }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). Modulo bias is irrelevant at our scales;
  // determinism is what matters.
  std::uint32_t below(std::uint32_t n) { return n ? gen_() % n : 0; }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = below(static_cast<std::uint32_t>(i));
      std::swap(v[i - 1], v[j]);
    }
  }

private:
  std::mt19937 gen_;
};

}  // namespace lfinr
