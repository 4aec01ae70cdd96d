#include "confidssl/pseudo_label.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace confidssl {

void ClassConfidenceStats::add(const ProbVector& p) {
  const std::size_t c = assign_class(p);
  if (c >= count.size())
    throw std::invalid_argument("ClassConfidenceStats::add: class out of range");
  sum_conf[c] += p[c];
  count[c] += 1;
}

void ClassConfidenceStats::merge(const ClassConfidenceStats& other) {
  if (other.num_classes() != num_classes())
    throw std::invalid_argument("ClassConfidenceStats::merge: class count mismatch");
  for (std::size_t c = 0; c < count.size(); ++c) {
    sum_conf[c] += other.sum_conf[c];
    count[c] += other.count[c];
  }
}

std::string_view to_string(MappingKind kind) {
  switch (kind) {
    case MappingKind::Concave: return "concave";
    case MappingKind::Linear: return "linear";
    case MappingKind::Exponential: return "exp";
  }
  return "concave";
}

std::optional<MappingKind> mapping_from_string(std::string_view name) {
  if (name == "concave") return MappingKind::Concave;
  if (name == "linear") return MappingKind::Linear;
  if (name == "exp" || name == "exponential") return MappingKind::Exponential;
  return std::nullopt;
}

std::size_t assign_class(const ProbVector& p) {
  if (p.empty()) throw std::invalid_argument("assign_class: empty probability vector");
  std::size_t best = 0;
  for (std::size_t i = 1; i < p.size(); ++i) {
    if (p[i] > p[best]) best = i;  // strict: ties keep the lowest index
  }
  return best;
}

ClassConfidenceStats update_stats(ClassConfidenceStats stats,
                                  const std::vector<ProbVector>& batch) {
  for (const auto& p : batch) stats.add(p);
  return stats;
}

ClassConfidence class_confidence(const ClassConfidenceStats& stats) {
  ClassConfidence conf;
  conf.p.resize(stats.num_classes());
  for (std::size_t c = 0; c < stats.num_classes(); ++c) {
    if (stats.count[c] > 0)
      conf.p[c] = stats.sum_conf[c] / static_cast<double>(stats.count[c]);
  }
  return conf;
}

double map_learning_status(double x, MappingKind kind) {
  if (!(x >= 0.0 && x <= 1.0))
    throw std::invalid_argument("map_learning_status: x must lie in [0, 1]");
  switch (kind) {
    case MappingKind::Concave: return x / (2.0 - x);
    case MappingKind::Linear: return x;
    case MappingKind::Exponential: return std::exp(-5.0 * (1.0 - x) * (1.0 - x));
  }
  throw std::invalid_argument("map_learning_status: unknown mapping");
}

ThresholdVector dynamic_threshold(const ClassConfidence& conf, double tau,
                                  MappingKind kind) {
  if (!(tau > 0.5 && tau < 1.0))
    throw std::invalid_argument("dynamic_threshold: tau must lie in (0.5, 1)");
  ThresholdVector out(conf.num_classes(), tau);
  for (std::size_t c = 0; c < conf.num_classes(); ++c) {
    if (conf.p[c].has_value())
      out[c] = std::clamp(map_learning_status(*conf.p[c], kind), 1.0 - tau, tau);
  }
  return out;
}

std::vector<MaskEntry> pseudo_label_mask(const std::vector<ProbVector>& weak_probs,
                                         const ThresholdVector& thresholds) {
  std::vector<MaskEntry> mask;
  mask.reserve(weak_probs.size());
  for (const auto& p : weak_probs) {
    MaskEntry e;
    e.label = assign_class(p);
    if (e.label >= thresholds.size())
      throw std::invalid_argument("pseudo_label_mask: class out of threshold range");
    e.confidence = p[e.label];
    e.keep = e.confidence >= thresholds[e.label];
    mask.push_back(e);
  }
  return mask;
}

}  // namespace confidssl
