#pragma once

#include <cstddef>
#include <optional>
#include <string_view>
#include <vector>

#include "confidssl/types.hpp"

namespace confidssl {

// Running accumulators over predictions on unlabeled data: per predicted
// class, how many instances landed there and the summed max-probabilities.
struct ClassConfidenceStats {
  std::vector<double> sum_conf;
  std::vector<std::size_t> count;

  ClassConfidenceStats() = default;
  explicit ClassConfidenceStats(std::size_t num_classes)
      : sum_conf(num_classes, 0.0), count(num_classes, 0) {}

  std::size_t num_classes() const { return count.size(); }

  void add(const ProbVector& p);
  void merge(const ClassConfidenceStats& other);
};

// Mean max-probability per predicted class. nullopt marks classes that were
// never predicted in the window; observed entries are always >= 1/C.
struct ClassConfidence {
  std::vector<std::optional<double>> p;

  std::size_t num_classes() const { return p.size(); }
};

enum class MappingKind { Concave, Linear, Exponential };

std::string_view to_string(MappingKind kind);
std::optional<MappingKind> mapping_from_string(std::string_view name);

// One pseudo-label acceptance threshold per class.
using ThresholdVector = std::vector<double>;

struct MaskEntry {
  bool keep = false;
  std::size_t label = 0;
  double confidence = 0.0;
};

// Index of the largest entry; ties break to the lowest index.
std::size_t assign_class(const ProbVector& p);

// Folds a batch of predictions into the accumulators. Composable: feeding two
// batches in sequence equals feeding their concatenation.
ClassConfidenceStats update_stats(ClassConfidenceStats stats,
                                  const std::vector<ProbVector>& batch);

ClassConfidence class_confidence(const ClassConfidenceStats& stats);

// Learning-status mapping on [0, 1]:
//   Concave: x / (2 - x), Linear: x, Exponential: exp(-5 (1 - x)^2).
double map_learning_status(double x, MappingKind kind);

// Per-class threshold clamp(M(P_c), 1 - tau, tau); unobserved classes fall
// back to tau. Requires tau in (0.5, 1).
ThresholdVector dynamic_threshold(const ClassConfidence& conf, double tau,
                                  MappingKind kind);

// keep[i] = confidence[i] >= thresholds[assigned class], inclusive.
std::vector<MaskEntry> pseudo_label_mask(const std::vector<ProbVector>& weak_probs,
                                         const ThresholdVector& thresholds);

}  // namespace confidssl
