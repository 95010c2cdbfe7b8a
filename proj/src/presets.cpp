#include "lfinr/presets.hpp"

#include <algorithm>
#include <cstdint>

namespace lfinr {

const std::vector<PresetSpec>& preset_ladder() {
  static const std::vector<PresetSpec> ladder = {
      {"tiny", 1.25, 10, 48, 24, 12, 2e-3},
      {"small", 1.25, 12, 72, 36, 18, 1.5e-3},
      {"medium", 1.3, 16, 104, 52, 26, 1e-3},
      {"large", 1.3, 20, 160, 80, 40, 5e-4},
  };
  return ladder;
}

const PresetSpec& find_preset(const std::string& name) {
  for (const auto& p : preset_ladder())
    if (p.name == name) return p;
  std::string known;
  for (const auto& p : preset_ladder()) known += (known.empty() ? "" : ", ") + p.name;
  throw ConfigError("unknown preset '" + name + "' (known: " + known + ")");
}

namespace {

struct Fit {
  int h0 = 0, w0 = 0;
  std::vector<int> factors;
  std::int64_t overshoot = -1;
};

// Deterministic search over seed sizes and factor chains built from twos
// plus at most one three and one five. A single five sits mid-chain, the
// shape the upsampling stacks of this family of decoders typically use.
std::vector<int> make_chain(int n2, int n3, int n5) {
  std::vector<int> chain(static_cast<std::size_t>(n2), 2);
  if (n3) chain.insert(chain.begin(), 3);
  if (n5) chain.insert(chain.begin() + chain.size() / 2, 5);
  return chain;
}

}  // namespace

ModelConfig fit_model_config(const PresetSpec& preset, int u_views, int v_views, int h,
                             int w) {
  if (u_views < 1 || v_views < 1 || h < 1 || w < 1)
    throw ConfigError("fit_model_config: bad dimensions");

  Fit best;
  for (int n5 = 0; n5 <= 1; ++n5) {
    for (int n3 = 0; n3 <= 1; ++n3) {
      for (int n2 = 0; n2 <= 9; ++n2) {
        std::int64_t prod = 1;
        for (int i = 0; i < n2; ++i) prod *= 2;
        if (n3) prod *= 3;
        if (n5) prod *= 5;
        if (n2 + n3 + n5 < 1) continue;
        for (int h0 = 2; h0 <= 12; ++h0) {
          if (static_cast<std::int64_t>(h0) * prod < h) continue;
          for (int w0 = 2; w0 <= 12; ++w0) {
            if (static_cast<std::int64_t>(w0) * prod < w) continue;
            const std::int64_t out_h = h0 * prod, out_w = w0 * prod;
            if (out_h > 65535 || out_w > 65535) continue;
            const std::int64_t overshoot = out_h * out_w - static_cast<std::int64_t>(h) * w;
            // ties keep the first candidate in loop order (fewest large factors)
            if (best.overshoot < 0 || overshoot < best.overshoot) {
              best.h0 = h0;
              best.w0 = w0;
              best.factors = make_chain(n2, n3, n5);
              best.overshoot = overshoot;
            }
          }
        }
      }
    }
  }
  if (best.overshoot < 0)
    throw ConfigError("fit_model_config: no factor chain covers " + std::to_string(h) +
                      "x" + std::to_string(w));

  ModelConfig cfg;
  cfg.pe.b = preset.pe_b;
  cfg.pe.L = preset.pe_L;
  cfg.mlp_hidden = preset.mlp_hidden;
  cfg.h0 = best.h0;
  cfg.w0 = best.w0;
  cfg.c0 = preset.c0;
  std::int64_t prod = 1;
  for (std::size_t i = 0; i < best.factors.size(); ++i) {
    BlockConfig blk;
    blk.factor = best.factors[i];
    blk.channels = std::max(preset.c0 >> (i + 1), preset.c_min);
    cfg.blocks.push_back(blk);
    prod *= blk.factor;
  }
  cfg.out_h = static_cast<int>(best.h0 * prod);
  cfg.out_w = static_cast<int>(best.w0 * prod);
  cfg.crop_h = h;
  cfg.crop_w = w;
  cfg.u_views = u_views;
  cfg.v_views = v_views;
  cfg.validate();
  return cfg;
}

FullConfig preset_config(const PresetSpec& preset, int u_views, int v_views, int h, int w) {
  FullConfig cfg;
  cfg.model = fit_model_config(preset, u_views, v_views, h, w);
  cfg.train.lr = preset.lr;
  return cfg;
}

}  // namespace lfinr
