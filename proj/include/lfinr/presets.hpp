#pragma once

#include <string>
#include <vector>

#include "lfinr/config_json.hpp"

namespace lfinr {

// Size knobs of one rung of the model ladder; everything that depends on the
// input dimensions is resolved by fit_model_config.
struct PresetSpec {
  std::string name;
  double pe_b = 1.25;
  int pe_L = 10;
  int mlp_hidden = 40;
  int c0 = 20;
  int c_min = 10;
  double lr = 2e-3;
};

const std::vector<PresetSpec>& preset_ladder();
const PresetSpec& find_preset(const std::string& name);

// Resolves a preset against concrete light-field dimensions: picks a seed
// feature map and a chain of upsampling factors whose product covers H x W
// with minimal overshoot, then applies the preset's channel schedule
// (block i gets max(c0 >> (i+1), c_min) channels).
ModelConfig fit_model_config(const PresetSpec& preset, int u_views, int v_views, int h,
                             int w);

// Full run configuration for a preset at given dimensions, with the paper's
// training defaults and the preset's learning rate.
FullConfig preset_config(const PresetSpec& preset, int u_views, int v_views, int h, int w);

}  // namespace lfinr
