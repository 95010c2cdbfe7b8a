#include <doctest.h>

#include "lfinr/model.hpp"
#include "lfinr/trainer.hpp"

using namespace lfinr;

namespace {

ModelConfig desk_config() {
  ModelConfig cfg;
  cfg.pe = {1.25, 4};
  cfg.mlp_hidden = 10;
  cfg.h0 = 3;
  cfg.w0 = 4;
  cfg.c0 = 8;
  cfg.blocks = {{2, 8}, {2, 8}, {2, 8}};
  cfg.out_h = 24;
  cfg.out_w = 32;
  cfg.crop_h = 20;
  cfg.crop_w = 30;
  cfg.u_views = 3;
  cfg.v_views = 3;
  return cfg;
}

}  // namespace

TEST_CASE("positional encoding") {
  PositionalEncodingConfig pe{2.0, 2};

  SUBCASE("grid center maps to zero phase: sines 0, cosines 1") {
    // center of a 3x3 grid is (1,1) -> u_n = v_n = 0
    auto enc = positional_encoding<float>(AngularCoord{1, 1}, 3, 3, pe);
    REQUIRE(enc.size() == 8);
    const std::vector<float> expect = {0, 0, 1, 1, 0, 0, 1, 1};
    for (std::size_t i = 0; i < 8; ++i) CHECK(enc[i] == doctest::Approx(expect[i]));
  }

  SUBCASE("endpoint evaluates the first Fourier pair") {
    // u = U-1 -> u_n = 0.1; with b=2, L=1: sin(0.2*pi), cos(0.2*pi)
    PositionalEncodingConfig pe1{2.0, 1};
    auto enc = positional_encoding<double>(AngularCoord{2, 1}, 3, 3, pe1);
    REQUIRE(enc.size() == 4);
    CHECK(enc[0] == doctest::Approx(0.5877852523).epsilon(1e-9));
    CHECK(enc[1] == doctest::Approx(0.8090169944).epsilon(1e-9));
    CHECK(enc[2] == doctest::Approx(0.0));
    CHECK(enc[3] == doctest::Approx(1.0));
  }

  SUBCASE("single-view axes normalize to zero") {
    auto enc = positional_encoding<float>(AngularCoord{0, 0}, 1, 1, pe);
    for (std::size_t k = 0; k < 2; ++k) {
      CHECK(enc[k] == 0.0f);      // sines
      CHECK(enc[2 + k] == 1.0f);  // cosines
    }
  }

  SUBCASE("all entries stay in [-1, 1] across the grid") {
    PositionalEncodingConfig big{1.3, 12};
    for (int u = 0; u < 7; ++u)
      for (int v = 0; v < 5; ++v) {
        auto enc = positional_encoding<float>(AngularCoord{u, v}, 7, 5, big);
        for (float e : enc) {
          CHECK(e <= 1.0f);
          CHECK(e >= -1.0f);
        }
      }
  }
}

TEST_CASE("build_model") {
  SUBCASE("paper-scale config reaches 480x640 before the crop") {
    ModelConfig cfg;
    cfg.pe = {1.25, 16};
    cfg.mlp_hidden = 64;
    cfg.h0 = 6;
    cfg.w0 = 8;
    cfg.c0 = 48;
    cfg.blocks = {{2, 24}, {2, 12}, {5, 12}, {2, 12}, {2, 12}};
    cfg.out_h = 480;
    cfg.out_w = 640;
    cfg.crop_h = 434;
    cfg.crop_w = 625;
    cfg.u_views = 11;
    cfg.v_views = 11;
    CHECK_NOTHROW(cfg.validate());
    Model<float> m = build_model<float>(cfg, 1);
    CHECK(m.parameter_count() == expected_parameter_count(cfg));
  }

  SUBCASE("same seed twice gives bitwise-identical parameters") {
    ModelConfig cfg = desk_config();
    Model<float> a = build_model<float>(cfg, 7);
    Model<float> b = build_model<float>(cfg, 7);
    REQUIRE(a.params.size() == b.params.size());
    for (std::size_t i = 0; i < a.params.size(); ++i)
      CHECK((a.params[i].tensor.value() == b.params[i].tensor.value()).all());
    Model<float> c = build_model<float>(cfg, 8);
    bool any_diff = false;
    for (std::size_t i = 0; i < a.params.size(); ++i)
      if ((a.params[i].tensor.value() != c.params[i].tensor.value()).any())
        any_diff = true;
    CHECK(any_diff);
  }

  SUBCASE("factor product mismatch is a config error") {
    ModelConfig cfg = desk_config();
    cfg.out_h = 23;
    CHECK_THROWS_AS(build_model<float>(cfg, 0), ConfigError);
  }

  SUBCASE("L = 0 is rejected") {
    ModelConfig cfg = desk_config();
    cfg.pe.L = 0;
    CHECK_THROWS_AS(build_model<float>(cfg, 0), ConfigError);
  }

  SUBCASE("biases start at zero, weights inside the fan-in bound") {
    Model<float> m = build_model<float>(desk_config(), 3);
    for (const auto& p : m.params) {
      if (p.name.find(".b") != std::string::npos) {
        CHECK((p.tensor.value() == 0.0f).all());
      } else {
        CHECK(p.tensor.value().abs().maxCoeff() <= 1.0f);
      }
    }
  }

  SUBCASE("parameter count formula matches allocation for randomized configs") {
    Rng rng(40);
    for (int trial = 0; trial < 20; ++trial) {
      ModelConfig cfg;
      cfg.pe = {1.0 + rng.uniform(), 1 + static_cast<int>(rng.below(12))};
      cfg.mlp_hidden = 4 + static_cast<int>(rng.below(40));
      cfg.h0 = 2 + static_cast<int>(rng.below(4));
      cfg.w0 = 2 + static_cast<int>(rng.below(4));
      cfg.c0 = 4 + static_cast<int>(rng.below(24));
      const int n_blocks = 1 + static_cast<int>(rng.below(3));
      std::int64_t prod = 1;
      for (int i = 0; i < n_blocks; ++i) {
        const int factor = 1 + static_cast<int>(rng.below(3));
        cfg.blocks.push_back({factor, 2 + static_cast<int>(rng.below(12))});
        prod *= factor;
      }
      cfg.out_h = static_cast<int>(cfg.h0 * prod);
      cfg.out_w = static_cast<int>(cfg.w0 * prod);
      cfg.crop_h = std::max(1, cfg.out_h - static_cast<int>(rng.below(3)));
      cfg.crop_w = std::max(1, cfg.out_w - static_cast<int>(rng.below(3)));
      cfg.u_views = 1 + static_cast<int>(rng.below(5));
      cfg.v_views = 1 + static_cast<int>(rng.below(5));
      Model<float> m = build_model<float>(cfg, trial);
      CHECK(m.parameter_count() == expected_parameter_count(cfg));
    }
  }
}

TEST_CASE("forward pass") {
  ModelConfig cfg = desk_config();
  Model<float> m = build_model<float>(cfg, 5);

  SUBCASE("output shape and range for every grid coordinate") {
    for (int u = 0; u < 3; ++u)
      for (int v = 0; v < 3; ++v) {
        Sai<float> img = m.forward({u, v});
        CHECK(img.height() == 20);
        CHECK(img.width() == 30);
        for (int c = 0; c < 3; ++c) {
          CHECK((img.planes[c] > 0.0f).all());  // open sigmoid range
          CHECK((img.planes[c] < 1.0f).all());
        }
      }
  }

  SUBCASE("decode_view equals forward bitwise and is stable across calls") {
    Sai<float> a = m.forward({1, 2});
    Sai<float> b = m.decode_view({1, 2});
    Sai<float> c = m.decode_view({1, 2});
    for (int ch = 0; ch < 3; ++ch) {
      CHECK((a.planes[ch] == b.planes[ch]).all());
      CHECK((b.planes[ch] == c.planes[ch]).all());
    }
  }

  SUBCASE("fractional coordinates produce an image of the same shape") {
    Sai<float> img = m.decode_view_fractional(0.5, 1.5);
    CHECK(img.height() == 20);
    CHECK(img.width() == 30);
  }

  SUBCASE("gradient reaches every parameter") {
    for (std::uint32_t seed = 0; seed < 10; ++seed) {
      Model<float> model = build_model<float>(desk_config(), seed);
      Rng rng(seed + 100);
      Tensor<float> target = Tensor<float>::zeros({3, 20, 30});
      for (Eigen::Index i = 0; i < target.numel(); ++i)
        target.value()[i] = static_cast<float>(rng.uniform(0.1, 0.9));
      Tape<float> tape;
      model.zero_grads();
      Tensor<float> pred = model.forward_tensor(&tape, 0.0, 2.0);
      Tensor<float> loss = mean_abs(&tape, sub(&tape, pred, target));
      tape.backward(loss);
      for (const auto& p : model.params) {
        INFO("parameter " << p.name << " seed " << seed);
        CHECK((p.tensor.grad() != 0.0f).any());
      }
    }
  }
}
