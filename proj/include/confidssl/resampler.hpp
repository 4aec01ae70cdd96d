#pragma once

#include <cstddef>
#include <vector>

#include "confidssl/pseudo_label.hpp"
#include "confidssl/rng.hpp"
#include "confidssl/types.hpp"

namespace confidssl {

// Raw sampling weights never drop below this, so a distribution always exists.
inline constexpr double kWeightFloor = 1e-3;

// Ramp exp(-5 (1 - e / max_epoch)^2): near zero early, exactly 1 at the end.
double warm_factor(std::size_t epoch, std::size_t max_epoch);

// Raw draw weight for one instance. High-status classes (class_conf > tau)
// get 1 - warm * class_conf * instance_conf, low-status classes get
// 2 - warm * class_conf * instance_conf; crossing tau shifts the weight by
// exactly 1. Result is floored at kWeightFloor.
double instance_weight(double class_conf, double instance_conf, double warm,
                       double tau);

struct SampleWeightTable {
  Vec raw;
  Vec dist;        // raw normalized to sum 1
  Vec cumulative;  // inclusive prefix sums of dist, for inverse-CDF draws
};

// Normalizes nonnegative weights into a categorical distribution.
SampleWeightTable build_distribution(const Vec& weights);

SampleWeightTable uniform_table(std::size_t n);

// n independent draws (with replacement) from the table's distribution.
std::vector<std::size_t> resample_indices(const SampleWeightTable& table,
                                          std::size_t n, Rng& rng);

// Predicted class and its probability for one instance.
struct InstancePrediction {
  std::size_t cls = 0;
  double confidence = 0.0;
};

// Weight table over a whole subset. Classes with no observed confidence are
// treated as low-status with the confidence term zeroed (raw weight 2).
SampleWeightTable compute_weights(const std::vector<InstancePrediction>& preds,
                                  const ClassConfidence& conf, std::size_t epoch,
                                  std::size_t max_epoch, double tau);

}  // namespace confidssl
