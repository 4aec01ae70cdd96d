#include "confidssl/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "confidssl/errors.hpp"

namespace confidssl {

std::string_view to_string(MethodVariant m) {
  switch (m) {
    case MethodVariant::Supervised: return "supervised";
    case MethodVariant::PL: return "pl";
    case MethodVariant::FixMatch: return "fixmatch";
    case MethodVariant::ConfidPL: return "confid_pl";
    case MethodVariant::ConfidMatch: return "confid_match";
    case MethodVariant::ConfidThresholdOnly: return "confid_threshold_only";
    case MethodVariant::ConfidResampleOnly: return "confid_resample_only";
  }
  return "supervised";
}

std::optional<MethodVariant> method_from_string(std::string_view name) {
  if (name == "supervised") return MethodVariant::Supervised;
  if (name == "pl") return MethodVariant::PL;
  if (name == "fixmatch") return MethodVariant::FixMatch;
  if (name == "confid_pl") return MethodVariant::ConfidPL;
  if (name == "confid_match") return MethodVariant::ConfidMatch;
  if (name == "confid_threshold_only") return MethodVariant::ConfidThresholdOnly;
  if (name == "confid_resample_only") return MethodVariant::ConfidResampleOnly;
  return std::nullopt;
}

bool uses_unlabeled(MethodVariant m) { return m != MethodVariant::Supervised; }

bool uses_strong_augment(MethodVariant m) {
  switch (m) {
    case MethodVariant::FixMatch:
    case MethodVariant::ConfidMatch:
    case MethodVariant::ConfidThresholdOnly:
    case MethodVariant::ConfidResampleOnly:
      return true;
    default:
      return false;  // PL variants supervise a second weak view
  }
}

bool uses_dynamic_thresholds(MethodVariant m) {
  return m == MethodVariant::ConfidPL || m == MethodVariant::ConfidMatch ||
         m == MethodVariant::ConfidThresholdOnly;
}

bool uses_resampling(MethodVariant m) {
  return m == MethodVariant::ConfidPL || m == MethodVariant::ConfidMatch ||
         m == MethodVariant::ConfidResampleOnly;
}

void validate(const TrainerConfig& cfg) {
  if (!(cfg.tau > 0.5 && cfg.tau < 1.0))
    throw ConfigError("config: tau must lie in (0.5, 1)");
  if (!(cfg.lambda_s >= 0.0) || !(cfg.lambda_u >= 0.0))
    throw ConfigError("config: loss weights must be nonnegative");
  if (cfg.batch_labeled == 0) throw ConfigError("config: batch_labeled must be >= 1");
  if (cfg.mu == 0) throw ConfigError("config: mu must be >= 1");
  if (!(cfg.lr_min > 0.0 && cfg.lr_min <= cfg.lr_max))
    throw ConfigError("config: need 0 < lr_min <= lr_max");
  if (cfg.momentum != 0.0)
    throw ConfigError("config: momentum is a reserved option; only 0 is supported");
  if (cfg.resample_period == 0)
    throw ConfigError("config: resample_period must be >= 1");
  if (cfg.hidden == 0) throw ConfigError("config: hidden must be >= 1");
  validate(cfg.augment);
}

EvalResult evaluate(const ModelParams& params, const Dataset& test) {
  if (test.instances.empty()) throw ConfigError("evaluate: empty test set");
  if (test.num_classes < 2) throw ConfigError("evaluate: need at least 2 classes");
  std::vector<std::size_t> correct(test.num_classes, 0);
  std::vector<std::size_t> total(test.num_classes, 0);
  for (const auto& inst : test.instances) {
    if (inst.label >= test.num_classes)
      throw ConfigError("evaluate: label out of range in test set");
    total[inst.label] += 1;
    if (assign_class(forward(params, inst.features)) == inst.label)
      correct[inst.label] += 1;
  }
  EvalResult out;
  out.per_class_acc.resize(test.num_classes);
  std::size_t hits = 0;
  double mean = 0.0;
  for (std::size_t c = 0; c < test.num_classes; ++c) {
    if (total[c] == 0)
      throw ConfigError("evaluate: class " + std::to_string(c) + " missing from test set");
    out.per_class_acc[c] =
        static_cast<double>(correct[c]) / static_cast<double>(total[c]);
    hits += correct[c];
    mean += out.per_class_acc[c];
  }
  out.overall_acc = static_cast<double>(hits) / static_cast<double>(test.instances.size());
  out.mean_class_acc = mean / static_cast<double>(test.num_classes);
  return out;
}

std::optional<double> confidence_accuracy_correlation(const MetricsRecord& rec) {
  if (rec.per_class_acc.size() != rec.per_class_p.size())
    throw std::invalid_argument("correlation: record field lengths differ");
  if (rec.per_class_acc.size() < 3)
    throw std::invalid_argument("correlation: need at least 3 classes");
  std::vector<double> xs, ys;
  for (std::size_t c = 0; c < rec.per_class_p.size(); ++c) {
    if (rec.per_class_p[c].has_value()) {
      xs.push_back(*rec.per_class_p[c]);
      ys.push_back(rec.per_class_acc[c]);
    }
  }
  const std::size_t n = xs.size();
  if (n < 2) return std::nullopt;
  const double nd = static_cast<double>(n);
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= nd;
  my /= nd;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = xs[i] - mx;
    const double dy = ys[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx <= 0.0 || syy <= 0.0) return std::nullopt;
  return sxy / std::sqrt(sxx * syy);
}

Trainer::Trainer(TrainerConfig cfg, SplitDataset data)
    : config_(std::move(cfg)), data_(std::move(data)), rng_(config_.seed) {
  validate(config_);
  validate_datasets();
  num_classes_ = data_.labeled.num_classes;
  schedule_ = {config_.lr_max, config_.lr_min,
               config_.epochs == 0 ? 1 : config_.epochs};
  state_.params = init_params(data_.labeled.d_in, config_.hidden, num_classes_, rng_);
  state_.stats = ClassConfidenceStats(num_classes_);
  state_.thresholds.assign(num_classes_, config_.tau);
  state_.labeled_indices.resize(data_.labeled.size());
  std::iota(state_.labeled_indices.begin(), state_.labeled_indices.end(), 0);
  if (uses_unlabeled(config_.method))
    state_.unlabeled_table = uniform_table(data_.unlabeled.size());
  state_.epoch = 0;
}

Trainer::Trainer(TrainerConfig cfg, SplitDataset data, TrainerState state)
    : config_(std::move(cfg)), data_(std::move(data)), rng_(0) {
  validate(config_);
  validate_datasets();
  num_classes_ = data_.labeled.num_classes;
  schedule_ = {config_.lr_max, config_.lr_min,
               config_.epochs == 0 ? 1 : config_.epochs};
  state_ = std::move(state);
  rng_.load_state(state_.rng_state);
  if (state_.params.input_dim() != data_.labeled.d_in ||
      state_.params.num_classes() != num_classes_ ||
      state_.params.hidden_dim() != config_.hidden)
    throw ConfigError("resume: checkpoint model shape does not match config/data");
  if (state_.thresholds.size() != num_classes_ ||
      state_.labeled_indices.size() != data_.labeled.size())
    throw ConfigError("resume: checkpoint state does not match dataset");
  if (uses_unlabeled(config_.method) &&
      state_.unlabeled_table.raw.size() != data_.unlabeled.size())
    throw ConfigError("resume: checkpoint sampling table does not match dataset");
  if (state_.epoch > config_.epochs)
    throw ConfigError("resume: checkpoint epoch past configured end");
}

void Trainer::validate_datasets() const {
  if (data_.labeled.instances.empty()) throw ConfigError("trainer: empty labeled set");
  if (data_.test.instances.empty()) throw ConfigError("trainer: empty test set");
  const std::size_t c = data_.labeled.num_classes;
  const std::size_t d = data_.labeled.d_in;
  if (c < 2) throw ConfigError("trainer: need at least 2 classes");
  if (data_.test.num_classes != c || data_.unlabeled.num_classes != c ||
      data_.test.d_in != d || data_.unlabeled.d_in != d)
    throw ConfigError("trainer: split datasets disagree on shape");
  if (uses_unlabeled(config_.method) && data_.unlabeled.instances.empty())
    throw ConfigError("trainer: method needs a nonempty unlabeled set");
  std::vector<bool> in_labeled(c, false), in_test(c, false);
  for (const auto& inst : data_.labeled.instances) {
    if (inst.label >= c) throw ConfigError("trainer: labeled label out of range");
    in_labeled[inst.label] = true;
  }
  for (const auto& inst : data_.test.instances) {
    if (inst.label >= c) throw ConfigError("trainer: test label out of range");
    in_test[inst.label] = true;
  }
  for (const auto& inst : data_.unlabeled.instances)
    if (inst.label >= c) throw ConfigError("trainer: unlabeled label out of range");
  for (std::size_t k = 0; k < c; ++k) {
    if (!in_labeled[k])
      throw ConfigError("trainer: class " + std::to_string(k) + " missing from labeled set");
    if (!in_test[k])
      throw ConfigError("trainer: class " + std::to_string(k) + " missing from test set");
  }
}

void Trainer::run_to(std::size_t stop_epoch) {
  const std::size_t end = std::min(stop_epoch, config_.epochs);
  while (state_.epoch < end) run_epoch();
}

// One epoch. The generator is consumed in a fixed order (labeled shuffle,
// then per step: labeled weak views, unlabeled draws, per drawn instance a
// weak then a student view; at a resample boundary: labeled snapshot views,
// labeled index redraw, unlabeled snapshot views), which is what makes
// checkpoint resume and rerun byte-identical.
void Trainer::run_epoch() {
  const std::size_t e = state_.epoch;
  const auto& cfg = config_;
  const auto& lab = data_.labeled.instances;
  const auto& unl = data_.unlabeled.instances;
  const std::size_t n_lab = lab.size();
  const std::size_t steps = (n_lab + cfg.batch_labeled - 1) / cfg.batch_labeled;
  const std::size_t mu_b = cfg.mu * cfg.batch_labeled;
  const bool with_unlabeled = uses_unlabeled(cfg.method);

  auto order = state_.labeled_indices;
  rng_.shuffle(order);

  std::size_t kept_total = 0;
  std::size_t kept_correct = 0;
  std::size_t unl_total = 0;
  double sum_ls = 0.0;
  double sum_lu = 0.0;

  for (std::size_t s = 0; s < steps; ++s) {
    const std::size_t lo = s * cfg.batch_labeled;
    const std::size_t hi = std::min(lo + cfg.batch_labeled, n_lab);
    std::vector<Instance> lab_batch;
    lab_batch.reserve(hi - lo);
    for (std::size_t k = lo; k < hi; ++k) {
      const auto& inst = lab[order[k]];
      lab_batch.push_back({weak_augment(inst.features, cfg.augment, rng_), inst.label});
    }

    UnlabeledBatch unl_batch;
    std::vector<std::size_t> unl_idx;
    if (with_unlabeled) {
      unl_idx = resample_indices(state_.unlabeled_table, mu_b, rng_);
      unl_batch.weak_probs.reserve(mu_b);
      unl_batch.student_features.reserve(mu_b);
      for (const auto j : unl_idx) {
        Vec weak = weak_augment(unl[j].features, cfg.augment, rng_);
        Vec student = uses_strong_augment(cfg.method)
                          ? strong_augment(unl[j].features, cfg.augment, rng_)
                          : weak_augment(unl[j].features, cfg.augment, rng_);
        unl_batch.weak_probs.push_back(forward(state_.params, weak));
        unl_batch.student_features.push_back(std::move(student));
      }
    }

    const double lambda_u = with_unlabeled ? cfg.lambda_u : 0.0;
    auto res = gradient(state_.params, lab_batch, unl_batch, state_.thresholds,
                        cfg.lambda_s, lambda_u);

    if (with_unlabeled) {
      state_.stats = update_stats(std::move(state_.stats), unl_batch.weak_probs);
      const auto mask = pseudo_label_mask(unl_batch.weak_probs, state_.thresholds);
      for (std::size_t i = 0; i < mask.size(); ++i) {
        if (!mask[i].keep) continue;
        ++kept_total;
        // Hidden labels feed this diagnostic only; the loss path above never
        // sees them.
        if (mask[i].label == unl[unl_idx[i]].label) ++kept_correct;
      }
      unl_total += mask.size();
    }

    sum_ls += res.loss_s;
    sum_lu += res.loss_u;
    state_.params = sgd_step(state_.params, res.grad, e, schedule_);
  }

  const ClassConfidence conf = class_confidence(state_.stats);
  const EvalResult ev = evaluate(state_.params, data_.test);

  MetricsRecord rec;
  rec.epoch = e;
  rec.overall_acc = ev.overall_acc;
  rec.mean_class_acc = ev.mean_class_acc;
  rec.per_class_acc = ev.per_class_acc;
  rec.per_class_p = conf.p;
  rec.thresholds = state_.thresholds;
  rec.pseudo_label_ratio =
      unl_total > 0 ? static_cast<double>(kept_total) / static_cast<double>(unl_total)
                    : 0.0;
  if (kept_total > 0)
    rec.pseudo_label_precision =
        static_cast<double>(kept_correct) / static_cast<double>(kept_total);
  rec.loss_s = sum_ls / static_cast<double>(steps);
  rec.loss_u = sum_lu / static_cast<double>(steps);
  state_.metrics.push_back(std::move(rec));

  if (uses_dynamic_thresholds(cfg.method))
    state_.thresholds = dynamic_threshold(conf, cfg.tau, cfg.mapping);

  const std::size_t next = e + 1;
  if (uses_resampling(cfg.method) && next < cfg.epochs &&
      next % cfg.resample_period == 0) {
    // Fresh weak-view snapshot of the current model over the full subsets;
    // the new loaders take effect at `next`, so the ramp is evaluated there.
    if (cfg.resample_labeled) {
      std::vector<InstancePrediction> preds;
      preds.reserve(lab.size());
      for (const auto& inst : lab) {
        const auto probs =
            forward(state_.params, weak_augment(inst.features, cfg.augment, rng_));
        // True class for the status lookup, predicted confidence as p_i.
        preds.push_back({inst.label, probs[assign_class(probs)]});
      }
      const auto table = compute_weights(preds, conf, next, cfg.epochs, cfg.tau);
      state_.labeled_indices = resample_indices(table, lab.size(), rng_);
    }
    if (cfg.resample_unlabeled) {
      std::vector<InstancePrediction> preds;
      preds.reserve(unl.size());
      for (const auto& inst : unl) {
        const auto probs =
            forward(state_.params, weak_augment(inst.features, cfg.augment, rng_));
        const auto cls = assign_class(probs);
        preds.push_back({cls, probs[cls]});
      }
      state_.unlabeled_table = compute_weights(preds, conf, next, cfg.epochs, cfg.tau);
    }
  }

  state_.stats = ClassConfidenceStats(num_classes_);
  state_.epoch = next;
}

TrainerState Trainer::snapshot() const {
  TrainerState s = state_;
  s.rng_state = rng_.save_state();
  return s;
}

TrainResult train(const TrainerConfig& cfg, const SplitDataset& data) {
  Trainer t(cfg, data);
  t.run_all();
  return {t.metrics(), t.params()};
}

}  // namespace confidssl
