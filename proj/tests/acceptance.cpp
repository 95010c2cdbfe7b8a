// Acceptance suite: one line per criterion, nonzero exit on any failure.
// Run via `ctest -R acceptance` or directly from the build tree.

#include <chrono>
#include <cstdio>
#include <string>
#include <vector>

#include "gradcheck_suite.hpp"
#include "lfinr/pipeline.hpp"
#include "lfinr/presets.hpp"
#include "oracles.hpp"

using namespace lfinr;

namespace {

int failures = 0;

void report(const std::string& name, bool pass, const std::string& detail) {
  std::printf("%s: %s (%s)\n", pass ? "PASS" : "FAIL", name.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

LightField<float> desk_scene() { return synth_lightfield<float>(0, 3, 3, 24, 32); }

// ---------------------------------------------------------------------------

void criterion_gradient_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  auto r64 = gradsuite::run_suite<double>(2024, 100, gradsuite::settings64());
  auto r32 = gradsuite::run_suite<float>(77, 100, gradsuite::settings32());
  const double secs = seconds_since(t0);
  const bool pass = r64.worst < 1e-6 && r32.worst < 1e-3 && secs < 60.0;
  char detail[160];
  std::snprintf(detail, sizeof(detail),
                "worst rel err 64-bit %.2e <= 1e-6, 32-bit %.2e <= 1e-3, %.1f s < 60 s",
                r64.worst, r32.worst, secs);
  report("gradient oracle", pass, detail);
}

void criterion_overfit_and_drop() {
  const auto t0 = std::chrono::steady_clock::now();
  LightField<float> lf = desk_scene();
  FullConfig cfg = preset_config(find_preset("tiny"), 3, 3, 24, 32);
  cfg.train.epochs = 300;
  cfg.train.finetune_epochs = 100;
  cfg.train.seed = 0;
  cfg.compress.prune_ratio = 0.8;
  cfg.compress.quant_bits = 8;
  EncodeResult<float> r = encode_lightfield(lf, cfg);
  const double secs = seconds_since(t0);

  {
    const bool pass = r.pre_compress.yuv_psnr >= 35.0 && secs < 300.0;
    char detail[160];
    std::snprintf(detail, sizeof(detail),
                  "tiny preset, 300 epochs, seed 0: %.2f dB >= 35 dB, %.0f s < 300 s",
                  r.pre_compress.yuv_psnr, secs);
    report("overfit check", pass, detail);
  }
  {
    const double psnr_drop = r.pre_compress.yuv_psnr - r.post_compress.yuv_psnr;
    const double ssim_drop = r.pre_compress.y_ssim - r.post_compress.y_ssim;
    const bool pass = psnr_drop <= 2.0 && ssim_drop <= 0.03;
    char detail[160];
    std::snprintf(detail, sizeof(detail),
                  "prune 0.8 + finetune 100 + 8-bit quant: %.2f dB <= 2.0 dB, %.4f ssim "
                  "<= 0.03",
                  psnr_drop, ssim_drop);
    report("compression-drop check", pass, detail);
  }
}

void criterion_lamp_oracle() {
  Rng rng(606);
  bool scores_exact = true;
  for (int trial = 0; trial < 100 && scores_exact; ++trial) {
    const int n = 1 + static_cast<int>(rng.below(300));
    std::vector<double> w(n);
    Vec<double> wv(n);
    for (int i = 0; i < n; ++i) {
      w[i] = rng.uniform(-3.0, 3.0);
      if (i > 0 && rng.below(10) == 0) w[i] = w[i - 1];  // magnitude ties
      wv[i] = w[i];
    }
    const auto lib = lamp_scores<double>(wv);
    const auto ora = oracles::lamp_scores(w);
    for (int i = 0; i < n; ++i)
      if (lib[static_cast<std::size_t>(i)] != ora[static_cast<std::size_t>(i)])
        scores_exact = false;
  }

  Model<float> m = build_model<float>(fit_model_config(find_preset("tiny"), 3, 3, 24, 32), 1);
  PruneMask mask = prune_global(m, 0.8);
  const std::int64_t expected = std::llround(0.8 * static_cast<double>(prunable_weight_count(m)));
  const bool sparsity_exact = mask.zero_count() == expected;

  char detail[160];
  std::snprintf(detail, sizeof(detail),
                "scores %s over 100 random layer sets; zeros %lld == round(0.8*N) %lld",
                scores_exact ? "bitwise-equal" : "MISMATCH",
                static_cast<long long>(mask.zero_count()),
                static_cast<long long>(expected));
  report("LAMP oracle", scores_exact && sparsity_exact, detail);
}

void criterion_quantization_bound() {
  Rng rng(404);
  const int kTensors = 100000;
  bool pass = true;
  double worst_ratio = 0.0;  // |err| / bound
  for (int trial = 0; trial < kTensors && pass; ++trial) {
    const int bits = trial % 3 == 0 ? 4 : (trial % 3 == 1 ? 8 : 12);
    const int n = 2 + static_cast<int>(rng.below(16));
    const double mag = std::pow(10.0, rng.uniform(-3.0, 1.0));
    Vec<float> v(n);
    for (int i = 0; i < n; ++i) v[i] = static_cast<float>(rng.uniform(-mag, mag));
    QuantRecord rec = quantize_tensor<float>(v, nullptr, bits);
    const double s = rec.scale();
    const std::int64_t top = (1ll << bits) - 1;
    for (int i = 0; i < n; ++i) {
      const double exact = static_cast<double>(v[i]);
      const double deq =
          static_cast<double>(rec.symbols[static_cast<std::size_t>(i)]) * s +
          static_cast<double>(rec.min_v);
      const std::int64_t unclamped =
          std::llround((exact - static_cast<double>(rec.min_v)) / s);
      const double bound = unclamped > top ? s : s / 2;
      const double ratio = std::abs(deq - exact) / bound;
      worst_ratio = std::max(worst_ratio, ratio);
      if (ratio > 1.0 + 1e-12) pass = false;
    }
  }
  char detail[160];
  std::snprintf(detail, sizeof(detail),
                "10^5 random tensors, b in {4,8,12}: worst |err|/bound %.6f <= 1",
                worst_ratio);
  report("quantization bound", pass, detail);
}

void criterion_entropy_coder() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(9001);
  bool round_trips = true;
  std::size_t total_symbols = 0;
  const int kCases = 10000;
  for (int trial = 0; trial < kCases && round_trips; ++trial) {
    const std::uint32_t alphabet =
        trial == 0 ? 2 : (trial == 1 ? 1024 : 2 + rng.below(1023));
    std::size_t n;
    if (trial < 3) {
      n = trial == 2 ? 0 : 100000;  // forced edge lengths
    } else if (trial % 100 == 0) {
      n = rng.below(100001);  // occasional long streams
    } else {
      n = static_cast<std::size_t>(std::exp(rng.uniform() * std::log(4001.0))) - 1;
    }
    const int dist = static_cast<int>(rng.below(4));
    std::vector<std::uint32_t> symbols(n);
    for (auto& s : symbols) {
      switch (dist) {
        case 0: s = rng.below(alphabet); break;
        case 1:
          s = std::min(alphabet - 1, static_cast<std::uint32_t>(
                                         rng.uniform() * rng.uniform() * alphabet));
          break;
        case 2: s = rng.below(2) ? alphabet - 1 : 0; break;
        default: s = alphabet / 2;
      }
    }
    total_symbols += n;
    const auto bytes = arith_encode(symbols, alphabet);
    const auto back = arith_decode(bytes, n, alphabet);
    if (back != symbols) round_trips = false;
  }

  bool size_ok = true;
  double worst_overhead = -1e9;
  for (std::uint32_t alphabet : {2u, 16u, 256u, 1024u}) {
    for (int dist : {0, 1}) {
      std::vector<std::uint32_t> symbols(30000);
      for (auto& s : symbols)
        s = dist == 0 ? rng.below(alphabet)
                      : std::min(alphabet - 1, static_cast<std::uint32_t>(
                                                   rng.uniform() * rng.uniform() * alphabet));
      const auto bytes = arith_encode(symbols, alphabet);
      const double ideal = oracles::ideal_adaptive_bits(symbols, alphabet) / 8.0;
      const double overhead = static_cast<double>(bytes.size()) - ideal;
      worst_overhead = std::max(worst_overhead, overhead);
      if (overhead > 64.0) size_ok = false;
    }
  }
  char detail[200];
  std::snprintf(detail, sizeof(detail),
                "10^4 fuzzed sequences (%.1fM symbols) %s; iid overhead %.1f B <= 64 B; "
                "%.1f s",
                static_cast<double>(total_symbols) / 1e6,
                round_trips ? "bit-exact" : "MISMATCH", worst_overhead,
                seconds_since(t0));
  report("entropy coder", round_trips && size_ok, detail);
}

void criterion_bitstream() {
  ModelConfig cfg = fit_model_config(find_preset("tiny"), 3, 3, 24, 32);
  Model<float> m = build_model<float>(cfg, 21);
  PruneMask mask = prune_global(m, 0.8);
  apply_mask(m, mask);
  const auto bytes = serialize(m, mask, 8);

  // encoder-side dequantized reference
  apply_quantization(m, mask, 8);
  Model<float> decoded = deserialize<float>(bytes);
  bool params_bitwise = true;
  for (std::size_t i = 0; i < m.params.size(); ++i)
    if ((m.params[i].tensor.value() != decoded.params[i].tensor.value()).any())
      params_bitwise = false;

  bool corruption_detected = true;
  std::size_t corruption_checks = 0;
  for (std::size_t pos = 0; pos < bytes.size();
       pos += (pos < 128 || pos + 128 >= bytes.size()) ? 1 : 13) {
    auto bad = bytes;
    bad[pos] ^= 0x5A;
    try {
      deserialize<float>(bad);
      corruption_detected = false;
      break;
    } catch (const BitstreamError&) {
    }
    ++corruption_checks;
  }

  bool views_bitwise = true;
  for (int u = 0; u < 3 && views_bitwise; ++u)
    for (int v = 0; v < 3 && views_bitwise; ++v) {
      Sai<float> a = m.decode_view({u, v});
      Sai<float> b = decoded.decode_view({u, v});
      for (int c = 0; c < 3; ++c)
        if ((a.planes[c] != b.planes[c]).any()) views_bitwise = false;
    }

  char detail[200];
  std::snprintf(detail, sizeof(detail),
                "round trip %s; %zu single-byte corruptions all detected: %s; 9/9 views "
                "decode-view == full decode: %s",
                params_bitwise ? "bitwise" : "MISMATCH", corruption_checks,
                corruption_detected ? "yes" : "NO",
                views_bitwise ? "yes" : "NO");
  report("bitstream", params_bitwise && corruption_detected && views_bitwise, detail);
}

void criterion_rd_monotonicity() {
  const auto t0 = std::chrono::steady_clock::now();
  LightField<float> lf = desk_scene();
  const std::vector<std::string> ladder = {"tiny", "small", "medium"};
  const int kSeeds = 3;

  double bpp[3][kSeeds];
  double psnr[3][kSeeds];
  for (std::size_t p = 0; p < ladder.size(); ++p) {
    for (int s = 0; s < kSeeds; ++s) {
      FullConfig cfg = preset_config(find_preset(ladder[p]), 3, 3, 24, 32);
      cfg.train.epochs = 150;
      cfg.train.finetune_epochs = 50;
      cfg.train.seed = static_cast<std::uint32_t>(s);
      EncodeResult<float> r = encode_lightfield(lf, cfg);
      bpp[p][s] = r.post_compress.bpp;
      psnr[p][s] = r.post_compress.yuv_psnr;
    }
  }

  bool all_pairs_pass = true;
  std::string detail = "pairs:";
  for (std::size_t p = 0; p + 1 < ladder.size(); ++p) {
    int good = 0;
    for (int s = 0; s < kSeeds; ++s)
      if (bpp[p + 1][s] > bpp[p][s] && psnr[p + 1][s] >= psnr[p][s]) ++good;
    if (good == 0) all_pairs_pass = false;
    detail += " " + ladder[p] + "->" + ladder[p + 1] + " " + std::to_string(good) + "/" +
              std::to_string(kSeeds) + " seeds" + (good * 2 > kSeeds ? " (majority)" : "");
  }
  char buf[64];
  std::snprintf(buf, sizeof(buf), "; %.0f s", seconds_since(t0));
  report("RD monotonicity", all_pairs_pass, detail + buf);
}

void criterion_metrics_golden() {
  bool pass = true;
  std::string detail;

  Plane<float> base = Plane<float>::Constant(16, 16, 0.25f);
  Plane<float> off = base + 1.0f / 255.0f;
  const double p255 = psnr(base, off);
  if (std::abs(p255 - 48.1308036) > 1e-3) pass = false;

  Rng rng(12);
  Plane<float> x(16, 16);
  for (int r = 0; r < 16; ++r)
    for (int c = 0; c < 16; ++c) x(r, c) = static_cast<float>(rng.uniform());
  const double s_self = ssim(x, x);
  if (s_self != 1.0) pass = false;

  const std::vector<AngularCoord> expect3 = {{0, 0}, {0, 1}, {0, 2}, {1, 2}, {1, 1},
                                             {1, 0}, {2, 0}, {2, 1}, {2, 2}};
  if (serpentine_order(3, 3) != expect3) pass = false;
  const std::vector<AngularCoord> expect2 = {{0, 0}, {0, 1}, {1, 1}, {1, 0}};
  if (serpentine_order(2, 2) != expect2) pass = false;

  Sai<float> big(480, 640);
  for (int y = 0; y < 480; ++y)
    for (int xx = 0; xx < 640; ++xx) big.planes[0](y, xx) = static_cast<float>(y * 640 + xx);
  Sai<float> cropped = crop_center(big, 434, 625);
  if (cropped.planes[0](0, 0) != big.planes[0](23, 7)) pass = false;
  if (cropped.planes[0](433, 624) != big.planes[0](456, 631)) pass = false;
  Sai<float> four(4, 4);
  for (int y = 0; y < 4; ++y)
    for (int xx = 0; xx < 4; ++xx) four.planes[0](y, xx) = static_cast<float>(y * 4 + xx);
  Sai<float> two = crop_center(four, 2, 2);
  if (two.planes[0](0, 0) != 5.0f || two.planes[0](1, 1) != 10.0f) pass = false;

  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "psnr(1/255)=%.4f dB (48.131 +- 1e-3); ssim(x,x)=%s; serpentine+crop "
                "definitional cases exact",
                p255, s_self == 1.0 ? "1.0" : "NOT 1");
  report("metrics golden values", pass, buf);
}

}  // namespace

int main() {
  const auto t0 = std::chrono::steady_clock::now();
  criterion_gradient_oracle();
  criterion_overfit_and_drop();
  criterion_lamp_oracle();
  criterion_quantization_bound();
  criterion_entropy_coder();
  criterion_bitstream();
  criterion_rd_monotonicity();
  criterion_metrics_golden();
  std::printf("%s: %d criterion failure(s), %.0f s total\n", failures ? "RESULT" : "RESULT",
              failures, seconds_since(t0));
  return failures;
}
