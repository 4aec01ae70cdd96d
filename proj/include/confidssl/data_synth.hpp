#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "confidssl/rng.hpp"
#include "confidssl/types.hpp"

namespace confidssl {

struct Dataset {
  std::vector<Instance> instances;
  std::size_t d_in = 0;
  std::size_t num_classes = 0;

  std::size_t size() const { return instances.size(); }
};

// Gaussian mixture description: per class a count, a mean vector and an
// isotropic scale.
struct DatasetSpec {
  std::size_t d_in = 0;
  std::vector<std::size_t> class_counts;
  std::vector<Vec> class_means;
  Vec class_scales;

  std::size_t num_classes() const { return class_counts.size(); }
};

void validate(const DatasetSpec& spec);  // throws ConfigError

// Instances in class-major order: all of class 0 first, then class 1, ...
Dataset generate(const DatasetSpec& spec, std::uint64_t seed);

enum class SplitTag { Labeled, Unlabeled, Test };

std::string_view to_string(SplitTag tag);

// Stratified split. Per class: ceil(fraction * count) labeled (at least 1),
// 20% test (at least 1), remainder unlabeled. Tags align with the population.
std::vector<SplitTag> split(const Dataset& population, double labeled_fraction,
                            std::uint64_t seed);

struct SplitDataset {
  Dataset labeled;
  Dataset unlabeled;
  Dataset test;
};

SplitDataset make_splits(const Dataset& population, const std::vector<SplitTag>& tags);

struct AugmentConfig {
  double weak_sigma = 0.1;
  double strong_sigma = 0.5;
  double strong_scale_lo = 0.7;
  double strong_scale_hi = 1.3;
};

void validate(const AugmentConfig& cfg);  // throws ConfigError

// Weak view: x plus isotropic Gaussian jitter.
Vec weak_augment(const Vec& x, const AugmentConfig& cfg, Rng& rng);

// Strong view: one uniform scale from [lo, hi] applied to x, then heavier
// jitter. Draw order: scale first, then one normal per coordinate.
Vec strong_augment(const Vec& x, const AugmentConfig& cfg, Rng& rng);

// CSV layout: header "id,label,split,f0,...,f{d-1}", one row per instance,
// floats as shortest round-trip decimals.
void write_dataset_csv(const std::string& path, const Dataset& population,
                       const std::vector<SplitTag>& tags);

struct LoadedDataset {
  Dataset population;
  std::vector<SplitTag> tags;
};

LoadedDataset load_dataset_csv(const std::string& path);  // throws DataError

// Imbalanced 8-class benchmark with two deliberately hard classes (inflated
// scale, means pulled toward a neighbor): one among the majority classes, one
// among the minority classes.
DatasetSpec default_benchmark_spec();

}  // namespace confidssl
