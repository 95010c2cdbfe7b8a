#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <vector>

#include "lfinr/model.hpp"

namespace lfinr {

// Per-tensor keep bits (1 = weight survives), aligned with Model::params.
// Tensors that are not prunable carry an empty entry.
struct PruneMask {
  std::vector<std::vector<std::uint8_t>> kept;
  double ratio = 0.0;
  double threshold_score = 0.0;  // smallest surviving score, for reporting

  bool has_mask(std::size_t id) const { return id < kept.size() && !kept[id].empty(); }

  std::int64_t zero_count() const {
    std::int64_t n = 0;
    for (const auto& m : kept)
      for (std::uint8_t b : m) n += (b == 0);
    return n;
  }
};

// LAMP scores of one layer, in the layer's flat order. Within the layer the
// weights are ranked ascending by squared magnitude (ties by flat index) and
// each weight's square is divided by the cumulative square of itself plus
// all not-smaller weights. Accumulation runs from the largest weight down,
// in double.
template <typename S>
std::vector<double> lamp_scores(const Vec<S>& weights) {
  const std::int64_t n = weights.size();
  if (n == 0) throw NumericError("lamp_scores: empty layer");
  std::vector<std::int64_t> order(n);
  for (std::int64_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::int64_t a, std::int64_t b) {
    const double wa = static_cast<double>(weights[a]) * weights[a];
    const double wb = static_cast<double>(weights[b]) * weights[b];
    if (wa != wb) return wa < wb;
    return a < b;
  });
  std::vector<double> scores(n);
  double acc = 0.0;
  for (std::int64_t k = n - 1; k >= 0; --k) {
    const std::int64_t i = order[k];
    const double w2 = static_cast<double>(weights[i]) * weights[i];
    acc += w2;
    scores[i] = acc > 0.0 ? w2 / acc : 0.0;
  }
  return scores;
}

// Global pruning: the round(ratio * N) lowest-scoring prunable weights are
// removed, breaking score ties by (tensor id, flat index) so the zero count
// is exact.
template <typename S>
PruneMask prune_global(const Model<S>& model, double ratio) {
  if (ratio < 0.0 || ratio >= 1.0)
    throw ConfigError("prune_global: ratio must be in [0, 1)");
  PruneMask mask;
  mask.ratio = ratio;
  mask.kept.resize(model.params.size());

  struct Entry {
    double score;
    std::uint32_t tensor;
    std::int64_t index;
  };
  std::vector<Entry> entries;
  std::int64_t total = 0;
  for (std::size_t id = 0; id < model.params.size(); ++id) {
    if (!model.params[id].prunable) continue;
    const auto& v = model.params[id].tensor.value();
    mask.kept[id].assign(static_cast<std::size_t>(v.size()), 1);
    const std::vector<double> scores = lamp_scores<S>(v);
    for (std::int64_t i = 0; i < v.size(); ++i)
      entries.push_back({scores[static_cast<std::size_t>(i)],
                         static_cast<std::uint32_t>(id), i});
    total += v.size();
  }
  const std::int64_t k = std::llround(ratio * static_cast<double>(total));
  if (k == 0) {
    mask.threshold_score = 0.0;
    return mask;
  }
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    if (a.score != b.score) return a.score < b.score;
    if (a.tensor != b.tensor) return a.tensor < b.tensor;
    return a.index < b.index;
  });
  for (std::int64_t i = 0; i < k; ++i)
    mask.kept[entries[static_cast<std::size_t>(i)].tensor]
             [static_cast<std::size_t>(entries[static_cast<std::size_t>(i)].index)] = 0;
  mask.threshold_score = k < static_cast<std::int64_t>(entries.size())
                             ? entries[static_cast<std::size_t>(k)].score
                             : std::numeric_limits<double>::infinity();
  return mask;
}

// Forces pruned positions to exactly zero.
template <typename S>
void apply_mask(Model<S>& model, const PruneMask& mask) {
  for (std::size_t id = 0; id < model.params.size(); ++id) {
    if (!mask.has_mask(id)) continue;
    auto& v = model.params[id].tensor.value();
    if (static_cast<std::int64_t>(mask.kept[id].size()) != v.size())
      throw NumericError("apply_mask: mask/tensor shape mismatch");
    for (std::int64_t i = 0; i < v.size(); ++i)
      if (!mask.kept[id][static_cast<std::size_t>(i)]) v[i] = S(0);
  }
}

template <typename S>
std::int64_t prunable_weight_count(const Model<S>& model) {
  std::int64_t n = 0;
  for (const auto& p : model.params)
    if (p.prunable) n += p.tensor.numel();
  return n;
}

}  // namespace lfinr
