#pragma once

#include "lfinr/lightfield.hpp"

namespace lfinr {

// Full-range YUV444 planes, same shape as the source image.
template <typename S>
struct YuvImage {
  std::array<Plane<S>, 3> planes;  // Y, U, V
  int height() const { return static_cast<int>(planes[0].rows()); }
  int width() const { return static_cast<int>(planes[0].cols()); }
};

// BT.709 luma coefficients; the chroma divisors are 2*(1-Kb) and 2*(1-Kr)
// so that pure blue maps to U=1 and pure red to V=1 before clamping.
struct ColorMatrix {
  double kr = 0.2126;
  double kg = 0.7152;
  double kb = 0.0722;
};

inline constexpr ColorMatrix kBt709{};

// Full-range conversion on [0,1] floats, output clamped to [0,1].
template <typename S>
YuvImage<S> rgb_to_yuv444(const Sai<S>& img, const ColorMatrix& m = kBt709) {
  using P = Plane<S>;
  const P& r = img.planes[0];
  const P& g = img.planes[1];
  const P& b = img.planes[2];
  YuvImage<S> out;
  P y = (S(m.kr) * r + S(m.kg) * g + S(m.kb) * b).eval();
  P u = ((b - y) / S(2.0 * (1.0 - m.kb)) + S(0.5)).eval();
  P v = ((r - y) / S(2.0 * (1.0 - m.kr)) + S(0.5)).eval();
  out.planes[0] = y.min(S(1)).max(S(0));
  out.planes[1] = u.min(S(1)).max(S(0));
  out.planes[2] = v.min(S(1)).max(S(0));
  return out;
}

}  // namespace lfinr
