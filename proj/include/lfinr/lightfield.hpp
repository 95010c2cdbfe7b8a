#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <vector>

#include "lfinr/common.hpp"

namespace lfinr {

// Angular grid position of a sub-aperture image: u is the row, v the column.
struct AngularCoord {
  int u = 0;
  int v = 0;
  friend bool operator==(const AngularCoord&, const AngularCoord&) = default;
};

template <typename S>
using Plane = Eigen::Array<S, Eigen::Dynamic, Eigen::Dynamic>;

// One sub-aperture image: three RGB planes of H x W samples in [0, 1].
template <typename S>
struct Sai {
  std::array<Plane<S>, 3> planes;

  Sai() = default;
  Sai(int h, int w) {
    for (auto& p : planes) p = Plane<S>::Zero(h, w);
  }

  int height() const { return static_cast<int>(planes[0].rows()); }
  int width() const { return static_cast<int>(planes[0].cols()); }

  bool same_size(const Sai& o) const {
    return height() == o.height() && width() == o.width();
  }

  bool finite_in_unit_range() const {
    for (const auto& p : planes) {
      if (!p.allFinite()) return false;
      if ((p < S(0)).any() || (p > S(1)).any()) return false;
    }
    return true;
  }
};

// U x V grid of views, all with the same spatial resolution.
template <typename S>
struct LightField {
  int u_views = 0;
  int v_views = 0;
  std::vector<Sai<S>> views;  // row-major: index = u * v_views + v

  LightField() = default;
  LightField(int u, int v, int h, int w) : u_views(u), v_views(v) {
    views.assign(static_cast<std::size_t>(u) * v, Sai<S>(h, w));
  }

  Sai<S>& view(int u, int v) { return views[static_cast<std::size_t>(u) * v_views + v]; }
  const Sai<S>& view(int u, int v) const {
    return views[static_cast<std::size_t>(u) * v_views + v];
  }

  int height() const { return views.empty() ? 0 : views.front().height(); }
  int width() const { return views.empty() ? 0 : views.front().width(); }
};

// Centered sub-grid selection. Both margins must be even so the window is
// exactly centered.
template <typename S>
LightField<S> select_central_views(const LightField<S>& lf, int u_sel, int v_sel) {
  if (u_sel < 1 || v_sel < 1 || u_sel > lf.u_views || v_sel > lf.v_views)
    throw ConfigError("select_central_views: window exceeds grid");
  if ((lf.u_views - u_sel) % 2 != 0 || (lf.v_views - v_sel) % 2 != 0)
    throw ConfigError("select_central_views: margins not centerable (odd parity)");
  const int du = (lf.u_views - u_sel) / 2;
  const int dv = (lf.v_views - v_sel) / 2;
  LightField<S> out;
  out.u_views = u_sel;
  out.v_views = v_sel;
  out.views.reserve(static_cast<std::size_t>(u_sel) * v_sel);
  for (int u = 0; u < u_sel; ++u)
    for (int v = 0; v < v_sel; ++v) out.views.push_back(lf.view(u + du, v + dv));
  return out;
}

// Offsets of a centered crop: floor of the margin on the top/left, remainder
// on the bottom/right.
inline int crop_offset(int src, int dst) { return (src - dst) / 2; }

template <typename S>
Sai<S> crop_center(const Sai<S>& img, int target_h, int target_w) {
  const int h = img.height(), w = img.width();
  if (target_h < 1 || target_w < 1 || target_h > h || target_w > w)
    throw ConfigError("crop_center: target larger than source");
  const int oy = crop_offset(h, target_h);
  const int ox = crop_offset(w, target_w);
  Sai<S> out(target_h, target_w);
  for (int c = 0; c < 3; ++c) out.planes[c] = img.planes[c].block(oy, ox, target_h, target_w);
  return out;
}

// Serpentine scan: rows top to bottom, even rows left to right, odd rows
// right to left.
inline std::vector<AngularCoord> serpentine_order(int u_views, int v_views) {
  std::vector<AngularCoord> order;
  order.reserve(static_cast<std::size_t>(u_views) * v_views);
  for (int u = 0; u < u_views; ++u) {
    if (u % 2 == 0)
      for (int v = 0; v < v_views; ++v) order.push_back({u, v});
    else
      for (int v = v_views - 1; v >= 0; --v) order.push_back({u, v});
  }
  return order;
}

struct SynthParams {
  double disparity = 0.35;  // pixels of shift per angular step
  int rectangles = 4;
};

namespace detail {

// Soft-edged, sinusoidally textured rectangle whose position moves linearly
// with the angular coordinate.
template <typename S>
void splat_rect(Sai<S>& img, double cx, double cy, double rw, double rh,
                const std::array<double, 3>& color, double tex_fx, double tex_fy,
                double tex_amp) {
  const int h = img.height(), w = img.width();
  const double feather = 1.5;
  const int x0 = std::max(0, static_cast<int>(std::floor(cx - rw / 2 - feather)));
  const int x1 = std::min(w - 1, static_cast<int>(std::ceil(cx + rw / 2 + feather)));
  const int y0 = std::max(0, static_cast<int>(std::floor(cy - rh / 2 - feather)));
  const int y1 = std::min(h - 1, static_cast<int>(std::ceil(cy + rh / 2 + feather)));
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const double ex = std::abs(x - cx) - rw / 2;
      const double ey = std::abs(y - cy) - rh / 2;
      const double d = std::max(ex, ey);
      double a = std::clamp(0.5 - d / feather, 0.0, 1.0);
      if (a <= 0.0) continue;
      const double tex =
          1.0 + tex_amp * std::sin(tex_fx * (x - cx)) * std::sin(tex_fy * (y - cy));
      for (int c = 0; c < 3; ++c) {
        const double base = static_cast<double>(img.planes[c](y, x));
        img.planes[c](y, x) =
            static_cast<S>(std::clamp(base * (1.0 - a) + a * color[c] * tex, 0.0, 1.0));
      }
    }
  }
}

}  // namespace detail

// Deterministic synthetic scene: a smooth color gradient background plus a
// few textured rectangles that shift with (u, v) to mimic parallax. The same
// seed and dimensions always produce a bit-identical field.
template <typename S>
LightField<S> synth_lightfield(std::uint32_t seed, int u_views, int v_views, int h, int w,
                               const SynthParams& params = {}) {
  if (u_views < 1 || v_views < 1 || h < 1 || w < 1)
    throw ConfigError("synth_lightfield: all dimensions must be >= 1");
  Rng rng(seed);

  // Background: bilinear corner blend plus one low-frequency sinusoid.
  std::array<std::array<double, 3>, 4> corners;
  for (auto& corner : corners)
    for (auto& c : corner) c = rng.uniform(0.15, 0.85);
  std::array<double, 3> wave_amp{}, wave_phase{};
  for (int c = 0; c < 3; ++c) {
    wave_amp[c] = rng.uniform(0.02, 0.08);
    wave_phase[c] = rng.uniform(0.0, 6.283185307179586);
  }

  struct Rect {
    double cx, cy, rw, rh, disp;
    std::array<double, 3> color;
    double fx, fy, amp;
  };
  std::vector<Rect> rects;
  for (int i = 0; i < params.rectangles; ++i) {
    Rect r;
    r.cx = rng.uniform(0.2, 0.8) * w;
    r.cy = rng.uniform(0.2, 0.8) * h;
    r.rw = rng.uniform(0.18, 0.4) * w;
    r.rh = rng.uniform(0.18, 0.4) * h;
    r.disp = params.disparity * rng.uniform(0.5, 1.5) * (i % 2 == 0 ? 1.0 : -1.0);
    for (auto& c : r.color) c = rng.uniform(0.1, 0.9);
    r.fx = rng.uniform(0.2, 0.5);
    r.fy = rng.uniform(0.2, 0.5);
    r.amp = rng.uniform(0.05, 0.15);
    rects.push_back(r);
  }

  LightField<S> lf(u_views, v_views, h, w);
  const double uc = (u_views - 1) / 2.0;
  const double vc = (v_views - 1) / 2.0;
  for (int u = 0; u < u_views; ++u) {
    for (int v = 0; v < v_views; ++v) {
      Sai<S>& img = lf.view(u, v);
      for (int y = 0; y < h; ++y) {
        const double fy = h > 1 ? static_cast<double>(y) / (h - 1) : 0.0;
        for (int x = 0; x < w; ++x) {
          const double fx = w > 1 ? static_cast<double>(x) / (w - 1) : 0.0;
          for (int c = 0; c < 3; ++c) {
            double val = (1 - fy) * ((1 - fx) * corners[0][c] + fx * corners[1][c]) +
                         fy * ((1 - fx) * corners[2][c] + fx * corners[3][c]);
            val += wave_amp[c] * std::sin(6.283185307179586 * (fx + fy) + wave_phase[c]);
            img.planes[c](y, x) = static_cast<S>(std::clamp(val, 0.0, 1.0));
          }
        }
      }
      for (const Rect& r : rects) {
        const double dx = r.disp * (v - vc);
        const double dy = r.disp * (u - uc);
        detail::splat_rect(img, r.cx + dx, r.cy + dy, r.rw, r.rh, r.color, r.fx, r.fy,
                           r.amp);
      }
    }
  }
  return lf;
}

}  // namespace lfinr
