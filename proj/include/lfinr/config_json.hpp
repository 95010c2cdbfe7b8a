#pragma once

#include <json.hpp>
#include <string>

#include "lfinr/model.hpp"
#include "lfinr/trainer.hpp"

namespace lfinr {

struct CompressConfig {
  double prune_ratio = 0.8;
  int quant_bits = 8;
  bool per_tensor_range = true;

  void validate() const {
    if (prune_ratio < 0.0 || prune_ratio >= 1.0)
      throw ConfigError("compress: prune_ratio must be in [0, 1)");
    if (quant_bits < 1 || quant_bits > 16)
      throw ConfigError("compress: quant_bits must be in [1, 16]");
  }
};

// One document holding everything an encode run needs.
struct FullConfig {
  ModelConfig model;
  TrainConfig train;
  CompressConfig compress;
};

inline void to_json(nlohmann::json& j, const ModelConfig& c) {
  j = nlohmann::json{
      {"pe", {{"b", c.pe.b}, {"L", c.pe.L}}},
      {"mlp_hidden", c.mlp_hidden},
      {"h0", c.h0},
      {"w0", c.w0},
      {"c0", c.c0},
      {"out_h", c.out_h},
      {"out_w", c.out_w},
      {"crop_h", c.crop_h},
      {"crop_w", c.crop_w},
      {"views_u", c.u_views},
      {"views_v", c.v_views},
      {"output_activation",
       c.output_activation == OutputActivation::kSigmoid ? "sigmoid" : "clamp"},
      {"residual_post_activation", c.residual_post_activation},
  };
  j["blocks"] = nlohmann::json::array();
  for (const auto& b : c.blocks)
    j["blocks"].push_back({{"factor", b.factor}, {"channels", b.channels}});
}

inline void from_json(const nlohmann::json& j, ModelConfig& c) {
  j.at("pe").at("b").get_to(c.pe.b);
  j.at("pe").at("L").get_to(c.pe.L);
  j.at("mlp_hidden").get_to(c.mlp_hidden);
  j.at("h0").get_to(c.h0);
  j.at("w0").get_to(c.w0);
  j.at("c0").get_to(c.c0);
  j.at("out_h").get_to(c.out_h);
  j.at("out_w").get_to(c.out_w);
  j.at("crop_h").get_to(c.crop_h);
  j.at("crop_w").get_to(c.crop_w);
  j.at("views_u").get_to(c.u_views);
  j.at("views_v").get_to(c.v_views);
  c.blocks.clear();
  for (const auto& b : j.at("blocks"))
    c.blocks.push_back({b.at("factor").get<int>(), b.at("channels").get<int>()});
  const std::string act = j.value("output_activation", "sigmoid");
  if (act == "sigmoid")
    c.output_activation = OutputActivation::kSigmoid;
  else if (act == "clamp")
    c.output_activation = OutputActivation::kClamp;
  else
    throw ConfigError("config: unknown output_activation '" + act + "'");
  c.residual_post_activation = j.value("residual_post_activation", true);
}

inline void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json{
      {"epochs", c.epochs},   {"lr", c.lr},
      {"lr_min", c.lr_min},   {"alpha", c.alpha},
      {"batch", c.batch},     {"seed", c.seed},
      {"beta1", c.beta1},     {"beta2", c.beta2},
      {"eps", c.eps},         {"finetune_epochs", c.finetune_epochs},
  };
}

inline void from_json(const nlohmann::json& j, TrainConfig& c) {
  c.epochs = j.value("epochs", c.epochs);
  c.lr = j.value("lr", c.lr);
  c.lr_min = j.value("lr_min", c.lr_min);
  c.alpha = j.value("alpha", c.alpha);
  c.batch = j.value("batch", c.batch);
  c.seed = j.value("seed", c.seed);
  c.beta1 = j.value("beta1", c.beta1);
  c.beta2 = j.value("beta2", c.beta2);
  c.eps = j.value("eps", c.eps);
  c.finetune_epochs = j.value("finetune_epochs", c.finetune_epochs);
}

inline void to_json(nlohmann::json& j, const CompressConfig& c) {
  j = nlohmann::json{{"prune_ratio", c.prune_ratio},
                     {"quant_bits", c.quant_bits},
                     {"per_tensor_range", c.per_tensor_range}};
}

inline void from_json(const nlohmann::json& j, CompressConfig& c) {
  c.prune_ratio = j.value("prune_ratio", c.prune_ratio);
  c.quant_bits = j.value("quant_bits", c.quant_bits);
  c.per_tensor_range = j.value("per_tensor_range", c.per_tensor_range);
}

inline void to_json(nlohmann::json& j, const FullConfig& c) {
  j = nlohmann::json{{"model", c.model}, {"train", c.train}, {"compress", c.compress}};
}

inline void from_json(const nlohmann::json& j, FullConfig& c) {
  j.at("model").get_to(c.model);
  if (j.contains("train")) j.at("train").get_to(c.train);
  if (j.contains("compress")) j.at("compress").get_to(c.compress);
}

}  // namespace lfinr
