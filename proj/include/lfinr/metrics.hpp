#pragma once

#include <cmath>
#include <vector>

#include "lfinr/color.hpp"
#include "lfinr/lightfield.hpp"

namespace lfinr {

// Identical inputs would otherwise give infinite PSNR; averaging needs a
// finite value.
inline constexpr double kPsnrCapDb = 100.0;

template <typename S>
double psnr(const Plane<S>& a, const Plane<S>& b, double peak = 1.0) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw NumericError("psnr: shape mismatch");
  double se = 0.0;
  for (Eigen::Index j = 0; j < a.cols(); ++j)
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      const double d = static_cast<double>(a(i, j)) - static_cast<double>(b(i, j));
      se += d * d;
    }
  const double mse = se / (static_cast<double>(a.rows()) * a.cols());
  if (mse == 0.0) return kPsnrCapDb;
  return std::min(kPsnrCapDb, 10.0 * std::log10(peak * peak / mse));
}

struct SsimParams {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 1.0;
};

// Normalized 1-D Gaussian; the 2-D window is its outer product.
inline std::vector<double> gaussian_window_1d(int size, double sigma) {
  std::vector<double> g(size);
  double total = 0.0;
  for (int i = 0; i < size; ++i) {
    const double d = i - (size - 1) / 2.0;
    g[i] = std::exp(-d * d / (2.0 * sigma * sigma));
    total += g[i];
  }
  for (double& v : g) v /= total;
  return g;
}

namespace detail {

// Valid-mode Gaussian blur: output restricted to fully overlapping window
// positions; separable passes.
inline Plane<double> gauss_valid(const Plane<double>& x, const std::vector<double>& g1) {
  const int k = static_cast<int>(g1.size());
  const int vh = static_cast<int>(x.rows()) - k + 1;
  const int vw = static_cast<int>(x.cols()) - k + 1;
  Plane<double> rows = Plane<double>::Zero(vh, x.cols());
  for (int dy = 0; dy < k; ++dy) rows += g1[dy] * x.block(dy, 0, vh, x.cols());
  Plane<double> out = Plane<double>::Zero(vh, vw);
  for (int dx = 0; dx < k; ++dx) out += g1[dx] * rows.block(0, dx, vh, vw);
  return out;
}

}  // namespace detail

// Mean SSIM over valid window positions (no border padding).
template <typename S>
double ssim(const Plane<S>& a, const Plane<S>& b, const SsimParams& p = {}) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw NumericError("ssim: shape mismatch");
  if (a.rows() < p.window || a.cols() < p.window)
    throw NumericError("ssim: plane smaller than window");
  const auto g1 = gaussian_window_1d(p.window, p.sigma);
  const double c1 = (p.k1 * p.dynamic_range) * (p.k1 * p.dynamic_range);
  const double c2 = (p.k2 * p.dynamic_range) * (p.k2 * p.dynamic_range);

  const Plane<double> ad = a.template cast<double>();
  const Plane<double> bd = b.template cast<double>();
  Plane<double> mu_a = detail::gauss_valid(ad, g1);
  Plane<double> mu_b = detail::gauss_valid(bd, g1);
  Plane<double> saa = detail::gauss_valid((ad * ad).eval(), g1) - mu_a * mu_a;
  Plane<double> sbb = detail::gauss_valid((bd * bd).eval(), g1) - mu_b * mu_b;
  Plane<double> sab = detail::gauss_valid((ad * bd).eval(), g1) - mu_a * mu_b;

  Plane<double> num = (2.0 * mu_a * mu_b + c1) * (2.0 * sab + c2);
  Plane<double> den = (mu_a * mu_a + mu_b * mu_b + c1) * (saa + sbb + c2);
  return (num / den).mean();
}

// Per-plane PSNR weighting used when collapsing YUV PSNRs to one number.
struct YuvWeights {
  double wy = 6.0;
  double wu = 1.0;
  double wv = 1.0;
};

struct ViewQuality {
  double psnr_y = 0.0, psnr_u = 0.0, psnr_v = 0.0;
  double yuv_psnr = 0.0;
  double y_ssim = 0.0;
};

struct QualityReport {
  std::vector<ViewQuality> per_view;
  double yuv_psnr = 0.0;  // mean over views
  double y_ssim = 0.0;    // mean over views
  double bpp = 0.0;       // 0 when no bitstream size was supplied
};

inline double weighted_yuv_psnr(double py, double pu, double pv, const YuvWeights& w) {
  return (w.wy * py + w.wu * pu + w.wv * pv) / (w.wy + w.wu + w.wv);
}

template <typename S>
ViewQuality view_quality(const Sai<S>& ref, const Sai<S>& rec, const YuvWeights& w = {},
                         const ColorMatrix& m = kBt709) {
  if (!ref.same_size(rec)) throw NumericError("view_quality: dimension mismatch");
  const YuvImage<S> yr = rgb_to_yuv444(ref, m);
  const YuvImage<S> yc = rgb_to_yuv444(rec, m);
  ViewQuality q;
  q.psnr_y = psnr(yr.planes[0], yc.planes[0]);
  q.psnr_u = psnr(yr.planes[1], yc.planes[1]);
  q.psnr_v = psnr(yr.planes[2], yc.planes[2]);
  q.yuv_psnr = weighted_yuv_psnr(q.psnr_y, q.psnr_u, q.psnr_v, w);
  q.y_ssim = ssim(yr.planes[0], yc.planes[0]);
  return q;
}

inline double bits_per_pixel(std::size_t stream_bytes, int u_views, int v_views, int h,
                             int w) {
  return 8.0 * static_cast<double>(stream_bytes) /
         (static_cast<double>(u_views) * v_views * h * w);
}

template <typename S>
QualityReport evaluate_field(const LightField<S>& ref, const LightField<S>& rec,
                             std::size_t stream_bytes = 0, const YuvWeights& w = {},
                             const ColorMatrix& m = kBt709) {
  if (ref.u_views != rec.u_views || ref.v_views != rec.v_views ||
      ref.height() != rec.height() || ref.width() != rec.width())
    throw NumericError("evaluate_field: dimension mismatch");
  QualityReport report;
  double sum_psnr = 0.0, sum_ssim = 0.0;
  for (int u = 0; u < ref.u_views; ++u)
    for (int v = 0; v < ref.v_views; ++v) {
      ViewQuality q = view_quality(ref.view(u, v), rec.view(u, v), w, m);
      sum_psnr += q.yuv_psnr;
      sum_ssim += q.y_ssim;
      report.per_view.push_back(q);
    }
  const double n = static_cast<double>(report.per_view.size());
  report.yuv_psnr = sum_psnr / n;
  report.y_ssim = sum_ssim / n;
  if (stream_bytes > 0)
    report.bpp = bits_per_pixel(stream_bytes, ref.u_views, ref.v_views, ref.height(),
                                ref.width());
  return report;
}

}  // namespace lfinr
