#pragma once

#include <chrono>
#include <cmath>
#include <fstream>
#include <vector>

#include "lfinr/metrics.hpp"
#include "lfinr/model.hpp"
#include "lfinr/prune.hpp"
#include "lfinr/tensor.hpp"

namespace lfinr {

struct TrainConfig {
  int epochs = 1000;
  double lr = 5e-4;
  double lr_min = 0.0;
  double alpha = 0.7;  // loss balance: alpha*L1 + (1-alpha)*(1-SSIM)
  int batch = 1;
  std::uint32_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int finetune_epochs = 200;

  void validate() const {
    if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
    // lr == 0 is the documented no-op training case
    if (lr < 0.0) throw ConfigError("train: lr must be >= 0");
    if (alpha < 0.0 || alpha > 1.0) throw ConfigError("train: alpha must be in [0, 1]");
    if (batch < 1) throw ConfigError("train: batch must be >= 1");
    if (finetune_epochs < 0) throw ConfigError("train: finetune_epochs must be >= 0");
  }
};

// Cosine annealing from lr down to lr_min over `epochs` epochs.
inline double cosine_lr(int epoch, double lr, double lr_min, int epochs) {
  if (epochs <= 1) return lr;
  const double t = static_cast<double>(epoch) / (epochs - 1);
  return lr_min + 0.5 * (lr - lr_min) * (1.0 + std::cos(3.141592653589793 * t));
}

inline double cosine_lr(int epoch, const TrainConfig& cfg) {
  return cosine_lr(epoch, cfg.lr, cfg.lr_min, cfg.epochs);
}

struct TrainLogEntry {
  int epoch = 0;
  double loss = 0.0;
  double psnr = 0.0;  // mean RGB PSNR of the epoch's predictions
  double lr = 0.0;
  double seconds = 0.0;
};

struct TrainLog {
  std::vector<TrainLogEntry> entries;

  void write_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot create " + path);
    out << "epoch,loss,psnr,lr,seconds\n";
    char buf[160];
    for (const auto& e : entries) {
      std::snprintf(buf, sizeof(buf), "%d,%.9g,%.9g,%.9g,%.3f\n", e.epoch, e.loss, e.psnr,
                    e.lr, e.seconds);
      out << buf;
    }
  }
};

// Differentiable mean SSIM over the three channels, valid windows only;
// same Gaussian window as the metric.
template <typename S>
Tensor<S> ssim_rgb(Tape<S>* tape, const Tensor<S>& pred, const Tensor<S>& gt,
                   const Kernel2d<S>& window, const SsimParams& p = {}) {
  detail::require_same_shape(pred, gt, "ssim_rgb");
  const S c1 = static_cast<S>((p.k1 * p.dynamic_range) * (p.k1 * p.dynamic_range));
  const S c2 = static_cast<S>((p.k2 * p.dynamic_range) * (p.k2 * p.dynamic_range));
  Tensor<S> mu1 = filter2d_valid(tape, pred, window);
  Tensor<S> mu2 = filter2d_valid(tape, gt, window);
  Tensor<S> s11 = sub(tape, filter2d_valid(tape, mul(tape, pred, pred), window),
                      mul(tape, mu1, mu1));
  Tensor<S> s22 = sub(tape, filter2d_valid(tape, mul(tape, gt, gt), window),
                      mul(tape, mu2, mu2));
  Tensor<S> s12 = sub(tape, filter2d_valid(tape, mul(tape, pred, gt), window),
                      mul(tape, mu1, mu2));
  Tensor<S> num = mul(tape, add_scalar(tape, mul_scalar(tape, mul(tape, mu1, mu2), S(2)), c1),
                      add_scalar(tape, mul_scalar(tape, s12, S(2)), c2));
  Tensor<S> den = mul(
      tape, add_scalar(tape, add(tape, mul(tape, mu1, mu1), mul(tape, mu2, mu2)), c1),
      add_scalar(tape, add(tape, s11, s22), c2));
  return mean(tape, divide(tape, num, den));
}

template <typename S>
Kernel2d<S> ssim_window(const SsimParams& p = {}) {
  const auto g1 = gaussian_window_1d(p.window, p.sigma);
  Kernel2d<S> k(p.window, p.window);
  for (int y = 0; y < p.window; ++y)
    for (int x = 0; x < p.window; ++x) k(y, x) = static_cast<S>(g1[y] * g1[x]);
  return k;
}

// alpha * mean|pred-gt| + (1-alpha) * (1 - SSIM_rgb(pred, gt))
template <typename S>
Tensor<S> fusion_loss(Tape<S>* tape, const Tensor<S>& pred, const Tensor<S>& gt, S alpha,
                      const Kernel2d<S>& window) {
  Tensor<S> l1 = mean_abs(tape, sub(tape, pred, gt));
  Tensor<S> s = ssim_rgb(tape, pred, gt, window);
  Tensor<S> dssim = add_scalar(tape, mul_scalar(tape, s, S(-1)), S(1));
  return add(tape, mul_scalar(tape, l1, alpha),
             mul_scalar(tape, dssim, S(1) - alpha));
}

// Standard bias-corrected Adam over the model's parameter list. Optionally
// applies a prune mask: masked-out positions get zero gradient, which with
// fresh moments keeps them at exactly zero through every step.
template <typename S>
class AdamOptimizer {
public:
  AdamOptimizer(Model<S>& model, const TrainConfig& cfg, const PruneMask* mask = nullptr)
      : model_(&model), cfg_(cfg), mask_(mask) {
    m_.reserve(model.params.size());
    v_.reserve(model.params.size());
    for (auto& p : model.params) {
      m_.push_back(Vec<S>::Zero(p.tensor.numel()));
      v_.push_back(Vec<S>::Zero(p.tensor.numel()));
    }
  }

  long steps() const { return t_; }

  void step(double lr) {
    ++t_;
    const S c1 = static_cast<S>(1.0 - std::pow(cfg_.beta1, static_cast<double>(t_)));
    const S c2 = static_cast<S>(1.0 - std::pow(cfg_.beta2, static_cast<double>(t_)));
    const S b1 = static_cast<S>(cfg_.beta1), b2 = static_cast<S>(cfg_.beta2);
    const S eps = static_cast<S>(cfg_.eps);
    const S rate = static_cast<S>(lr);
    for (std::size_t i = 0; i < model_->params.size(); ++i) {
      auto& p = model_->params[i].tensor;
      if (p.grad().size() != p.value().size())
        throw NumericError("adam: gradient shape drifted between steps");
      Vec<S> g = p.grad();
      if (mask_ && mask_->has_mask(i)) {
        const auto& kept = mask_->kept[i];
        for (std::int64_t j = 0; j < g.size(); ++j)
          if (!kept[static_cast<std::size_t>(j)]) g[j] = S(0);
      }
      m_[i] = b1 * m_[i] + (S(1) - b1) * g;
      v_[i] = b2 * v_[i] + (S(1) - b2) * g * g;
      p.value() -= rate * (m_[i] / c1) / ((v_[i] / c2).sqrt() + eps);
    }
  }

private:
  Model<S>* model_;
  TrainConfig cfg_;
  const PruneMask* mask_;
  long t_ = 0;
  std::vector<Vec<S>> m_, v_;
};

namespace detail {

template <typename S>
double rgb_psnr_flat(const Vec<S>& a, const Vec<S>& b) {
  double se = 0.0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    se += d * d;
  }
  const double mse = se / static_cast<double>(a.size());
  if (mse == 0.0) return kPsnrCapDb;
  return std::min(kPsnrCapDb, 10.0 * std::log10(1.0 / mse));
}

// Shared main loop of train and finetune_masked.
template <typename S>
TrainLog run_training(Model<S>& model, const LightField<S>& lf, const TrainConfig& cfg,
                      int epochs, const PruneMask* mask) {
  cfg.validate();
  const ModelConfig& mc = model.config;
  if (lf.u_views != mc.u_views || lf.v_views != mc.v_views ||
      lf.height() != mc.crop_h || lf.width() != mc.crop_w)
    throw ConfigError("train: light field dimensions do not match the model config");

  std::vector<Tensor<S>> gt;
  std::vector<AngularCoord> coords;
  gt.reserve(lf.views.size());
  for (int u = 0; u < lf.u_views; ++u)
    for (int v = 0; v < lf.v_views; ++v) {
      coords.push_back({u, v});
      gt.push_back(Model<S>::sai_to_tensor(lf.view(u, v)));
    }

  const Kernel2d<S> window = ssim_window<S>();
  Rng rng(cfg.seed);
  Tape<S> tape;
  AdamOptimizer<S> adam(model, cfg, mask);
  TrainLog log;
  const auto t0 = std::chrono::steady_clock::now();

  for (int epoch = 0; epoch < epochs; ++epoch) {
    const double lr = cosine_lr(epoch, cfg.lr, cfg.lr_min, epochs);
    rng.shuffle(coords);
    double loss_sum = 0.0, psnr_sum = 0.0;
    int steps = 0;
    try {
      for (std::size_t pos = 0; pos < coords.size(); pos += cfg.batch) {
        const std::size_t end = std::min(coords.size(), pos + cfg.batch);
        tape.reset();
        model.zero_grads();
        Tensor<S> batch_loss;
        for (std::size_t i = pos; i < end; ++i) {
          const AngularCoord& c = coords[i];
          const std::size_t view_idx =
              static_cast<std::size_t>(c.u) * lf.v_views + c.v;
          Tensor<S> pred = model.forward_tensor(&tape, c.u, c.v);
          psnr_sum += rgb_psnr_flat(pred.value(), gt[view_idx].value());
          Tensor<S> l = fusion_loss(&tape, pred, gt[view_idx],
                                    static_cast<S>(cfg.alpha), window);
          batch_loss = batch_loss.valid() ? add(&tape, batch_loss, l) : l;
        }
        if (end - pos > 1)
          batch_loss = mul_scalar(&tape, batch_loss,
                                  S(1) / static_cast<S>(end - pos));
        const double loss_value = static_cast<double>(batch_loss.value()[0]);
        if (!std::isfinite(loss_value))
          throw TrainError("training diverged at epoch " + std::to_string(epoch));
        loss_sum += loss_value;
        ++steps;
        tape.backward(batch_loss);
        adam.step(lr);
      }
    } catch (const NumericError& e) {
      throw TrainError("epoch " + std::to_string(epoch) + ": " + e.what());
    }
    TrainLogEntry entry;
    entry.epoch = epoch;
    entry.loss = loss_sum / steps;
    entry.psnr = psnr_sum / static_cast<double>(coords.size());
    entry.lr = lr;
    entry.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    log.entries.push_back(entry);
  }
  return log;
}

}  // namespace detail

// Overfits the model to the target light field: every epoch visits all U*V
// views in a seed-shuffled order, batch size cfg.batch, Adam with cosine LR.
template <typename S>
TrainLog train(Model<S>& model, const LightField<S>& lf, const TrainConfig& cfg) {
  return detail::run_training<S>(model, lf, cfg, cfg.epochs, nullptr);
}

// Post-pruning fine-tune: same loop, but gradients and updates at masked-out
// positions are forced to zero so pruned weights stay exactly 0.
template <typename S>
TrainLog finetune_masked(Model<S>& model, const LightField<S>& lf, const PruneMask& mask,
                         const TrainConfig& cfg) {
  for (std::size_t id = 0; id < model.params.size(); ++id)
    if (model.params[id].prunable &&
        (!mask.has_mask(id) ||
         static_cast<std::int64_t>(mask.kept[id].size()) != model.params[id].tensor.numel()))
      throw NumericError("finetune_masked: mask does not cover tensor " +
                         model.params[id].name);
  TrainConfig ft = cfg;
  ft.epochs = cfg.finetune_epochs;
  if (ft.epochs == 0) return TrainLog{};
  return detail::run_training<S>(model, lf, ft, ft.epochs, &mask);
}

}  // namespace lfinr
