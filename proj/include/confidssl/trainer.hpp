#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "confidssl/data_synth.hpp"
#include "confidssl/model.hpp"
#include "confidssl/pseudo_label.hpp"
#include "confidssl/resampler.hpp"
#include "confidssl/rng.hpp"
#include "confidssl/types.hpp"

namespace confidssl {

enum class MethodVariant {
  Supervised,           // labeled data only
  PL,                   // pseudo-labels from a weak view, fixed threshold
  FixMatch,             // weak teacher view, strong student view, fixed threshold
  ConfidPL,             // PL + dynamic thresholds + status-balanced resampling
  ConfidMatch,          // FixMatch + dynamic thresholds + resampling
  ConfidThresholdOnly,  // FixMatch + dynamic thresholds
  ConfidResampleOnly,   // FixMatch + resampling
};

std::string_view to_string(MethodVariant m);
std::optional<MethodVariant> method_from_string(std::string_view name);

bool uses_unlabeled(MethodVariant m);
bool uses_strong_augment(MethodVariant m);
bool uses_dynamic_thresholds(MethodVariant m);
bool uses_resampling(MethodVariant m);

struct TrainerConfig {
  MethodVariant method = MethodVariant::ConfidMatch;
  std::uint64_t seed = 1;
  double tau = 0.8;
  double lambda_s = 1.0;
  double lambda_u = 1.0;
  std::size_t batch_labeled = 24;  // labeled instances per step
  std::size_t mu = 4;              // unlabeled-to-labeled batch ratio
  std::size_t epochs = 150;
  double lr_max = 0.05;  // desk-scale default; 0.01 suits the large-batch regime
  double lr_min = 0.0001;
  double momentum = 0.0;  // reserved knob; only 0 is accepted
  MappingKind mapping = MappingKind::Concave;
  std::size_t resample_period = 15;
  bool resample_labeled = true;
  bool resample_unlabeled = true;
  std::size_t hidden = 32;
  AugmentConfig augment;
};

void validate(const TrainerConfig& cfg);  // throws ConfigError

struct MetricsRecord {
  std::size_t epoch = 0;
  double overall_acc = 0.0;
  double mean_class_acc = 0.0;
  std::vector<double> per_class_acc;
  // Mean max-probability per predicted class over this epoch's unlabeled
  // batches; nullopt where the class was never predicted.
  std::vector<std::optional<double>> per_class_p;
  // Thresholds that were in force during this epoch.
  std::vector<double> thresholds;
  // Fraction of processed unlabeled instances that passed their threshold.
  double pseudo_label_ratio = 0.0;
  // Among kept pseudo-labels, fraction matching the hidden true label.
  // Diagnostic only; nullopt when nothing was kept.
  std::optional<double> pseudo_label_precision;
  double loss_s = 0.0;
  double loss_u = 0.0;
};

struct EvalResult {
  double overall_acc = 0.0;
  double mean_class_acc = 0.0;
  std::vector<double> per_class_acc;
};

// Accuracy on raw (unaugmented) features. Every class must appear in test.
EvalResult evaluate(const ModelParams& params, const Dataset& test);

// Pearson correlation between observed per-class confidence and per-class
// test accuracy. nullopt when fewer than two classes were observed or either
// side has zero variance.
std::optional<double> confidence_accuracy_correlation(const MetricsRecord& rec);

// Everything needed to resume a run bit-identically from an epoch boundary.
struct TrainerState {
  std::size_t epoch = 0;
  ModelParams params;
  ClassConfidenceStats stats;
  ThresholdVector thresholds;
  std::vector<std::size_t> labeled_indices;
  SampleWeightTable unlabeled_table;
  std::string rng_state;
  std::vector<MetricsRecord> metrics;
};

class Trainer {
 public:
  Trainer(TrainerConfig cfg, SplitDataset data);
  // Resume from a snapshot taken at an epoch boundary.
  Trainer(TrainerConfig cfg, SplitDataset data, TrainerState state);

  // Runs whole epochs until epoch() == min(stop_epoch, config().epochs).
  void run_to(std::size_t stop_epoch);
  void run_all() { run_to(config_.epochs); }

  std::size_t epoch() const { return state_.epoch; }
  const TrainerConfig& config() const { return config_; }
  const ModelParams& params() const { return state_.params; }
  const std::vector<MetricsRecord>& metrics() const { return state_.metrics; }
  const Dataset& test_set() const { return data_.test; }

  TrainerState snapshot() const;

 private:
  void validate_datasets() const;
  void run_epoch();

  TrainerConfig config_;
  SplitDataset data_;
  Rng rng_;
  LrSchedule schedule_;
  std::size_t num_classes_ = 0;
  TrainerState state_;
};

struct TrainResult {
  std::vector<MetricsRecord> metrics;
  ModelParams params;
};

TrainResult train(const TrainerConfig& cfg, const SplitDataset& data);

}  // namespace confidssl
