#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "confidssl/data_synth.hpp"
#include "confidssl/errors.hpp"
#include "confidssl/serialize.hpp"
#include "confidssl/trainer.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace confidssl;

namespace {

// Small three-class mixture that trains in well under a second.
SplitDataset tiny_data(std::uint64_t seed = 5) {
  DatasetSpec spec;
  spec.d_in = 4;
  spec.class_counts = {40, 26, 14};
  spec.class_means = {
      {2.5, 0.0, 0.0, 0.0}, {0.0, 2.5, 0.0, 0.0}, {0.0, 0.0, 2.5, 0.0}};
  spec.class_scales = {1.0, 1.0, 1.0};
  const auto data = generate(spec, seed);
  return make_splits(data, split(data, 0.25, seed + 1));
}

TrainerConfig tiny_config(MethodVariant method, std::uint64_t seed = 1) {
  TrainerConfig cfg;
  cfg.method = method;
  cfg.seed = seed;
  cfg.batch_labeled = 8;
  cfg.mu = 2;
  cfg.epochs = 10;
  cfg.hidden = 8;
  cfg.resample_period = 3;
  return cfg;
}

ModelParams always_class(std::size_t cls, std::size_t d_in, std::size_t hidden,
                         std::size_t classes) {
  ModelParams p;
  p.w1 = Matrix(hidden, d_in);
  p.b1.assign(hidden, 0.0);
  p.w2 = Matrix(classes, hidden);
  p.b2.assign(classes, 0.0);
  p.b2[cls] = 10.0;
  return p;
}

}  // namespace

TEST_CASE("method names round-trip") {
  for (const auto m :
       {MethodVariant::Supervised, MethodVariant::PL, MethodVariant::FixMatch,
        MethodVariant::ConfidPL, MethodVariant::ConfidMatch,
        MethodVariant::ConfidThresholdOnly, MethodVariant::ConfidResampleOnly}) {
    const auto name = to_string(m);
    REQUIRE(method_from_string(name).has_value());
    CHECK(*method_from_string(name) == m);
  }
  CHECK_FALSE(method_from_string("mixmatch").has_value());
}

TEST_CASE("method capability flags") {
  CHECK_FALSE(uses_unlabeled(MethodVariant::Supervised));
  for (const auto m : {MethodVariant::PL, MethodVariant::FixMatch,
                       MethodVariant::ConfidPL, MethodVariant::ConfidMatch,
                       MethodVariant::ConfidThresholdOnly,
                       MethodVariant::ConfidResampleOnly})
    CHECK(uses_unlabeled(m));

  CHECK_FALSE(uses_strong_augment(MethodVariant::PL));
  CHECK_FALSE(uses_strong_augment(MethodVariant::ConfidPL));
  CHECK(uses_strong_augment(MethodVariant::FixMatch));
  CHECK(uses_strong_augment(MethodVariant::ConfidMatch));

  CHECK(uses_dynamic_thresholds(MethodVariant::ConfidPL));
  CHECK(uses_dynamic_thresholds(MethodVariant::ConfidMatch));
  CHECK(uses_dynamic_thresholds(MethodVariant::ConfidThresholdOnly));
  CHECK_FALSE(uses_dynamic_thresholds(MethodVariant::FixMatch));
  CHECK_FALSE(uses_dynamic_thresholds(MethodVariant::ConfidResampleOnly));

  CHECK(uses_resampling(MethodVariant::ConfidPL));
  CHECK(uses_resampling(MethodVariant::ConfidMatch));
  CHECK(uses_resampling(MethodVariant::ConfidResampleOnly));
  CHECK_FALSE(uses_resampling(MethodVariant::FixMatch));
  CHECK_FALSE(uses_resampling(MethodVariant::ConfidThresholdOnly));
}

TEST_CASE("trainer config validation") {
  CHECK_NOTHROW(validate(TrainerConfig{}));
  TrainerConfig cfg;
  cfg.tau = 0.4;
  CHECK_THROWS_AS(validate(cfg), ConfigError);
  cfg = TrainerConfig{};
  cfg.momentum = 0.9;
  CHECK_THROWS_AS(validate(cfg), ConfigError);
  cfg = TrainerConfig{};
  cfg.batch_labeled = 0;
  CHECK_THROWS_AS(validate(cfg), ConfigError);
  cfg = TrainerConfig{};
  cfg.lr_min = 0.0;
  CHECK_THROWS_AS(validate(cfg), ConfigError);
  cfg = TrainerConfig{};
  cfg.resample_period = 0;
  CHECK_THROWS_AS(validate(cfg), ConfigError);
}

TEST_CASE("evaluate scores a constant classifier") {
  Dataset test;
  test.d_in = 2;
  test.num_classes = 2;
  for (int i = 0; i < 8; ++i) test.instances.push_back({{0.1 * i, 1.0}, 0});
  for (int i = 0; i < 2; ++i) test.instances.push_back({{-1.0, 0.2 * i}, 1});

  const auto ev = evaluate(always_class(0, 2, 3, 2), test);
  CHECK(ev.overall_acc == 0.8);
  CHECK(ev.per_class_acc[0] == 1.0);
  CHECK(ev.per_class_acc[1] == 0.0);
  CHECK(ev.mean_class_acc == 0.5);
}

TEST_CASE("evaluate requires every class in the test set") {
  Dataset test;
  test.d_in = 2;
  test.num_classes = 3;
  test.instances.push_back({{0.0, 0.0}, 0});
  test.instances.push_back({{1.0, 1.0}, 2});
  CHECK_THROWS_AS((void)evaluate(always_class(0, 2, 3, 3), test), ConfigError);
}

TEST_CASE("correlation on hand-built records") {
  MetricsRecord rec;
  rec.per_class_p = {0.2, 0.5, 0.9};
  rec.per_class_acc = {0.2, 0.5, 0.9};
  CHECK(*confidence_accuracy_correlation(rec) == doctest::Approx(1.0).epsilon(1e-12));

  rec.per_class_acc = {0.8, 0.5, 0.1};  // affine flip: perfectly anti-correlated
  CHECK(std::abs(*confidence_accuracy_correlation(rec) + 1.0) < 1e-12);

  rec.per_class_acc = {0.5, 0.5, 0.5};  // zero variance on one side
  CHECK_FALSE(confidence_accuracy_correlation(rec).has_value());

  rec.per_class_p = {0.3, std::nullopt, std::nullopt};  // single observed pair
  rec.per_class_acc = {0.1, 0.9, 0.4};
  CHECK_FALSE(confidence_accuracy_correlation(rec).has_value());
}

TEST_CASE("correlation matches the textbook formula on observed pairs") {
  MetricsRecord rec;
  rec.per_class_p = {0.81, std::nullopt, 0.44, 0.67, 0.92};
  rec.per_class_acc = {0.75, 0.10, 0.35, 0.60, 0.88};

  // Independent computation from raw power sums over observed classes.
  const double xs[] = {0.81, 0.44, 0.67, 0.92};
  const double ys[] = {0.75, 0.35, 0.60, 0.88};
  double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  const double n = 4.0;
  for (int i = 0; i < 4; ++i) {
    sx += xs[i];
    sy += ys[i];
    sxx += xs[i] * xs[i];
    syy += ys[i] * ys[i];
    sxy += xs[i] * ys[i];
  }
  const double want = (n * sxy - sx * sy) /
                      std::sqrt((n * sxx - sx * sx) * (n * syy - sy * sy));
  CHECK(*confidence_accuracy_correlation(rec) == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("correlation validates record shape") {
  MetricsRecord rec;
  rec.per_class_p = {0.5, 0.6};
  rec.per_class_acc = {0.5};
  CHECK_THROWS_AS((void)confidence_accuracy_correlation(rec), std::invalid_argument);
  rec.per_class_p = {0.5, 0.6};
  rec.per_class_acc = {0.5, 0.6};
  CHECK_THROWS_AS((void)confidence_accuracy_correlation(rec), std::invalid_argument);
}

TEST_CASE("identical runs produce byte-identical metrics") {
  const auto data = tiny_data();
  const auto cfg = tiny_config(MethodVariant::ConfidMatch);
  const auto a = train(cfg, data);
  const auto b = train(cfg, data);
  CHECK(metrics_to_jsonl(a.metrics) == metrics_to_jsonl(b.metrics));
  CHECK(a.params.w1.data == b.params.w1.data);
  CHECK(a.params.b2 == b.params.b2);

  auto cfg2 = cfg;
  cfg2.seed = 2;
  const auto c = train(cfg2, data);
  CHECK(metrics_to_jsonl(a.metrics) != metrics_to_jsonl(c.metrics));
}

TEST_CASE("supervised training ignores the unlabeled set entirely") {
  const auto base = tiny_data();
  const auto cfg = tiny_config(MethodVariant::Supervised);

  // Same labeled and test sets; unlabeled replaced by garbage of the same shape.
  auto scrambled = base;
  Rng noise(999);
  for (auto& inst : scrambled.unlabeled.instances) {
    for (auto& v : inst.features) v = noise.uniform(-100.0, 100.0);
    inst.label = noise.uniform_index(scrambled.unlabeled.num_classes);
  }

  const auto a = train(cfg, base);
  const auto b = train(cfg, scrambled);
  CHECK(metrics_to_jsonl(a.metrics) == metrics_to_jsonl(b.metrics));
  CHECK(a.params.w1.data == b.params.w1.data);
  CHECK(a.params.w2.data == b.params.w2.data);

  for (const auto& rec : a.metrics) {
    CHECK(rec.pseudo_label_ratio == 0.0);
    CHECK(rec.loss_u == 0.0);
    CHECK_FALSE(rec.pseudo_label_precision.has_value());
    for (const auto& p : rec.per_class_p) CHECK_FALSE(p.has_value());
  }
}

TEST_CASE("zero epochs yields the untouched initialization") {
  const auto data = tiny_data();
  auto cfg = tiny_config(MethodVariant::FixMatch);
  cfg.epochs = 0;
  Trainer t(cfg, data);
  t.run_all();
  CHECK(t.metrics().empty());
  CHECK(t.epoch() == 0);

  Trainer fresh(cfg, data);
  CHECK(t.params().w1.data == fresh.params().w1.data);
}

TEST_CASE("run_to stops at the requested epoch boundary") {
  const auto data = tiny_data();
  const auto cfg = tiny_config(MethodVariant::ConfidMatch);
  Trainer t(cfg, data);
  t.run_to(4);
  CHECK(t.epoch() == 4);
  CHECK(t.metrics().size() == 4);
  t.run_to(2);  // already past: no-op
  CHECK(t.epoch() == 4);
  t.run_to(99);  // clamped to config epochs
  CHECK(t.epoch() == cfg.epochs);
  CHECK(t.metrics().size() == cfg.epochs);
}

TEST_CASE("fixed-threshold methods keep thresholds at tau forever") {
  const auto data = tiny_data();
  for (const auto m : {MethodVariant::PL, MethodVariant::FixMatch,
                       MethodVariant::ConfidResampleOnly}) {
    const auto res = train(tiny_config(m), data);
    for (const auto& rec : res.metrics)
      for (const double th : rec.thresholds) CHECK(th == 0.8);
  }
}

TEST_CASE("dynamic thresholds start at tau and stay inside the band") {
  const auto data = tiny_data();
  const auto cfg = tiny_config(MethodVariant::ConfidMatch);
  const auto res = train(cfg, data);
  REQUIRE(!res.metrics.empty());
  for (const double th : res.metrics.front().thresholds) CHECK(th == cfg.tau);
  bool any_below_tau = false;
  for (const auto& rec : res.metrics) {
    for (const double th : rec.thresholds) {
      CHECK(th >= 1.0 - cfg.tau);
      CHECK(th <= cfg.tau);
      any_below_tau = any_below_tau || th < cfg.tau;
    }
  }
  // On this easy mixture the thresholds actually move off the ceiling.
  CHECK(any_below_tau);
}

TEST_CASE("per-epoch bookkeeping stays internally consistent") {
  const auto data = tiny_data();
  const auto res = train(tiny_config(MethodVariant::ConfidMatch), data);
  for (const auto& rec : res.metrics) {
    CHECK(rec.pseudo_label_ratio >= 0.0);
    CHECK(rec.pseudo_label_ratio <= 1.0);
    CHECK(rec.loss_s >= 0.0);
    CHECK(rec.loss_u >= 0.0);
    double mean = 0.0;
    for (const double a : rec.per_class_acc) mean += a;
    CHECK(rec.mean_class_acc ==
          doctest::Approx(mean / rec.per_class_acc.size()).epsilon(1e-12));
    if (rec.pseudo_label_precision.has_value()) {
      CHECK(*rec.pseudo_label_precision >= 0.0);
      CHECK(*rec.pseudo_label_precision <= 1.0);
      CHECK(rec.pseudo_label_ratio > 0.0);
    }
  }
}

TEST_CASE("a snapshot resumes to the exact uninterrupted trajectory") {
  const auto data = tiny_data();
  const auto cfg = tiny_config(MethodVariant::ConfidMatch);

  Trainer full(cfg, data);
  full.run_all();

  Trainer first(cfg, data);
  first.run_to(4);  // boundary chosen to land between resample fires
  const auto snap = first.snapshot();

  Trainer resumed(cfg, data, snap);
  CHECK(resumed.epoch() == 4);
  resumed.run_all();

  CHECK(metrics_to_jsonl(resumed.metrics()) == metrics_to_jsonl(full.metrics()));
  CHECK(resumed.params().w1.data == full.params().w1.data);
  CHECK(resumed.params().b1 == full.params().b1);
  CHECK(resumed.params().w2.data == full.params().w2.data);
  CHECK(resumed.params().b2 == full.params().b2);
}

TEST_CASE("snapshots survive the checkpoint JSON round-trip bit for bit") {
  const auto data = tiny_data();
  const auto cfg = tiny_config(MethodVariant::ConfidPL);

  Trainer full(cfg, data);
  full.run_all();

  Trainer first(cfg, data);
  first.run_to(6);
  const auto j = checkpoint_to_json(cfg, first.snapshot(), "mem://tiny");
  const auto loaded = checkpoint_from_json(j);
  CHECK(loaded.dataset_path == "mem://tiny");
  CHECK(loaded.state.epoch == 6);

  Trainer resumed(loaded.config, data, loaded.state);
  resumed.run_all();
  CHECK(metrics_to_jsonl(resumed.metrics()) == metrics_to_jsonl(full.metrics()));
  CHECK(resumed.params().w1.data == full.params().w1.data);
  CHECK(resumed.params().b2 == full.params().b2);
}

TEST_CASE("resume validation catches mismatched checkpoints") {
  const auto data = tiny_data();
  const auto cfg = tiny_config(MethodVariant::ConfidMatch);
  Trainer t(cfg, data);
  t.run_to(2);
  const auto snap = t.snapshot();

  auto bad_cfg = cfg;
  bad_cfg.hidden = 16;  // disagrees with the checkpoint model shape
  CHECK_THROWS_AS(Trainer(bad_cfg, data, snap), ConfigError);

  auto bad_cfg2 = cfg;
  bad_cfg2.epochs = 1;  // checkpoint epoch already past the end
  CHECK_THROWS_AS(Trainer(bad_cfg2, data, snap), ConfigError);

  auto bad_snap = snap;
  bad_snap.thresholds.pop_back();
  CHECK_THROWS_AS(Trainer(cfg, data, bad_snap), ConfigError);
}

TEST_CASE("trainer rejects datasets that cannot support the method") {
  const auto cfg = tiny_config(MethodVariant::FixMatch);
  auto data = tiny_data();
  data.unlabeled.instances.clear();
  CHECK_THROWS_AS(Trainer(cfg, data), ConfigError);

  // Supervised training does not need unlabeled data at all.
  CHECK_NOTHROW(Trainer(tiny_config(MethodVariant::Supervised), data));

  auto data2 = tiny_data();
  data2.labeled.instances.erase(
      std::remove_if(data2.labeled.instances.begin(), data2.labeled.instances.end(),
                     [](const Instance& i) { return i.label == 2; }),
      data2.labeled.instances.end());
  CHECK_THROWS_AS(Trainer(cfg, data2), ConfigError);

  auto data3 = tiny_data();
  data3.test.d_in = 3;
  CHECK_THROWS_AS(Trainer(cfg, data3), ConfigError);
}
