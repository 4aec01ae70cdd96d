#include "confidssl/resampler.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace confidssl {

double warm_factor(std::size_t epoch, std::size_t max_epoch) {
  if (max_epoch == 0) throw std::invalid_argument("warm_factor: max_epoch must be >= 1");
  if (epoch > max_epoch)
    throw std::invalid_argument("warm_factor: epoch past max_epoch");
  const double r = 1.0 - static_cast<double>(epoch) / static_cast<double>(max_epoch);
  return std::exp(-5.0 * r * r);
}

double instance_weight(double class_conf, double instance_conf, double warm,
                       double tau) {
  const double base = class_conf > tau ? 1.0 : 2.0;
  const double w = base - warm * class_conf * instance_conf;
  return w > kWeightFloor ? w : kWeightFloor;
}

SampleWeightTable build_distribution(const Vec& weights) {
  if (weights.empty())
    throw std::invalid_argument("build_distribution: empty weight vector");
  double sum = 0.0;
  for (const double w : weights) {
    if (w < 0.0) throw std::invalid_argument("build_distribution: negative weight");
    sum += w;
  }
  if (sum <= 0.0)
    throw std::invalid_argument("build_distribution: all weights are zero");
  SampleWeightTable table;
  table.raw = weights;
  table.dist.resize(weights.size());
  for (std::size_t i = 0; i < weights.size(); ++i) table.dist[i] = weights[i] / sum;
  table.cumulative.resize(weights.size());
  double run = 0.0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    run += table.dist[i];
    table.cumulative[i] = run;
  }
  table.cumulative.back() = 1.0;  // guard the top bin against rounding
  return table;
}

SampleWeightTable uniform_table(std::size_t n) {
  return build_distribution(Vec(n, 1.0));
}

std::vector<std::size_t> resample_indices(const SampleWeightTable& table,
                                          std::size_t n, Rng& rng) {
  if (table.cumulative.empty())
    throw std::invalid_argument("resample_indices: empty table");
  if (n == 0) throw std::invalid_argument("resample_indices: n must be >= 1");
  std::vector<std::size_t> out;
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double u = rng.uniform();
    const auto it =
        std::upper_bound(table.cumulative.begin(), table.cumulative.end(), u);
    std::size_t idx = static_cast<std::size_t>(it - table.cumulative.begin());
    if (idx >= table.cumulative.size()) idx = table.cumulative.size() - 1;
    out.push_back(idx);
  }
  return out;
}

SampleWeightTable compute_weights(const std::vector<InstancePrediction>& preds,
                                  const ClassConfidence& conf, std::size_t epoch,
                                  std::size_t max_epoch, double tau) {
  if (preds.empty()) throw std::invalid_argument("compute_weights: empty prediction list");
  const double warm = warm_factor(epoch, max_epoch);
  Vec raw(preds.size());
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i].cls >= conf.num_classes())
      throw std::invalid_argument("compute_weights: class out of range");
    const auto& pc = conf.p[preds[i].cls];
    // Unobserved classes carry no evidence of learning: low-status branch
    // with the confidence product zeroed.
    const double class_conf = pc.has_value() ? *pc : 0.0;
    raw[i] = instance_weight(class_conf, preds[i].confidence, warm, tau);
  }
  return build_distribution(raw);
}

}  // namespace confidssl
