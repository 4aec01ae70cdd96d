#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <vector>

#include "confidssl/data_synth.hpp"
#include "confidssl/errors.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace confidssl;

namespace {

DatasetSpec small_spec() {
  DatasetSpec spec;
  spec.d_in = 2;
  spec.class_counts = {3, 2};
  spec.class_means = {{0.0, 0.0}, {5.0, 5.0}};
  spec.class_scales = {1.0, 1.0};
  return spec;
}

std::map<SplitTag, std::size_t> tag_counts(const std::vector<SplitTag>& tags,
                                           const Dataset& data, std::size_t cls) {
  std::map<SplitTag, std::size_t> out;
  for (std::size_t i = 0; i < tags.size(); ++i)
    if (data.instances[i].label == cls) ++out[tags[i]];
  return out;
}

}  // namespace

TEST_CASE("generate lays out classes in order with the requested counts") {
  const auto data = generate(small_spec(), 11);
  REQUIRE(data.size() == 5);
  CHECK(data.d_in == 2);
  CHECK(data.num_classes == 2);
  const std::size_t expect[] = {0, 0, 0, 1, 1};
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(data.instances[i].label == expect[i]);
    CHECK(data.instances[i].features.size() == 2);
  }
}

TEST_CASE("generate is deterministic in the seed") {
  const auto a = generate(small_spec(), 11);
  const auto b = generate(small_spec(), 11);
  const auto c = generate(small_spec(), 12);
  bool all_equal = true;
  bool any_differ = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    all_equal = all_equal && a.instances[i].features == b.instances[i].features;
    any_differ = any_differ || a.instances[i].features != c.instances[i].features;
  }
  CHECK(all_equal);
  CHECK(any_differ);
}

TEST_CASE("well-separated classes are recovered by nearest mean") {
  DatasetSpec spec;
  spec.d_in = 3;
  spec.class_counts = {400, 400, 400};
  spec.class_means = {{0.0, 0.0, 0.0}, {10.0, 0.0, 0.0}, {0.0, 10.0, 0.0}};
  spec.class_scales = {0.5, 0.5, 0.5};
  const auto data = generate(spec, 7);

  std::size_t correct = 0;
  for (const auto& inst : data.instances) {
    std::size_t best = 0;
    double best_d = 1e300;
    for (std::size_t c = 0; c < 3; ++c) {
      double d = 0.0;
      for (std::size_t j = 0; j < 3; ++j) {
        const double diff = inst.features[j] - spec.class_means[c][j];
        d += diff * diff;
      }
      if (d < best_d) {
        best_d = d;
        best = c;
      }
    }
    correct += best == inst.label ? 1 : 0;
  }
  CHECK(static_cast<double>(correct) / data.size() > 0.99);
}

TEST_CASE("generated coordinates match mean and scale empirically") {
  DatasetSpec spec;
  spec.d_in = 1;
  spec.class_counts = {100000, 2};
  spec.class_means = {{2.0}, {50.0}};
  spec.class_scales = {1.7, 1.0};
  const auto data = generate(spec, 3);
  double sum = 0.0;
  double sumsq = 0.0;
  std::size_t n = 0;
  for (const auto& inst : data.instances) {
    if (inst.label != 0) continue;
    sum += inst.features[0];
    sumsq += inst.features[0] * inst.features[0];
    ++n;
  }
  REQUIRE(n == 100000);
  const double mean = sum / n;
  const double sd = std::sqrt(sumsq / n - mean * mean);
  CHECK(mean == doctest::Approx(2.0).epsilon(0.01));
  CHECK(sd == doctest::Approx(1.7).epsilon(0.02));
}

TEST_CASE("spec validation rejects malformed mixtures") {
  auto spec = small_spec();
  spec.class_scales[1] = 0.0;
  CHECK_THROWS_AS(validate(spec), ConfigError);

  spec = small_spec();
  spec.class_means[0] = {1.0};
  CHECK_THROWS_AS(validate(spec), ConfigError);

  spec = small_spec();
  spec.class_counts = {3};
  CHECK_THROWS_AS(validate(spec), ConfigError);

  spec = small_spec();
  spec.class_counts.clear();
  spec.class_means.clear();
  spec.class_scales.clear();
  CHECK_THROWS_AS(validate(spec), ConfigError);

  spec = small_spec();
  spec.d_in = 0;
  CHECK_THROWS_AS(validate(spec), ConfigError);
}

TEST_CASE("split assigns the documented per-class quotas") {
  DatasetSpec spec;
  spec.d_in = 1;
  spec.class_counts = {100, 4};
  spec.class_means = {{0.0}, {1.0}};
  spec.class_scales = {1.0, 1.0};
  const auto data = generate(spec, 5);

  const auto tags = split(data, 0.1, 9);
  REQUIRE(tags.size() == data.size());

  // Class of 100 at 10%: 10 labeled, 20 test, 70 unlabeled.
  auto c0 = tag_counts(tags, data, 0);
  CHECK(c0[SplitTag::Labeled] == 10);
  CHECK(c0[SplitTag::Test] == 20);
  CHECK(c0[SplitTag::Unlabeled] == 70);

  // Class of 4 at 10%: ceil(0.4) = 1 labeled, max(1, floor(0.8)) = 1 test.
  auto c1 = tag_counts(tags, data, 1);
  CHECK(c1[SplitTag::Labeled] == 1);
  CHECK(c1[SplitTag::Test] == 1);
  CHECK(c1[SplitTag::Unlabeled] == 2);
}

TEST_CASE("split at one half labels half of a class of four") {
  DatasetSpec spec;
  spec.d_in = 1;
  spec.class_counts = {4, 10};
  spec.class_means = {{0.0}, {5.0}};
  spec.class_scales = {1.0, 1.0};
  const auto data = generate(spec, 2);
  const auto tags = split(data, 0.5, 1);
  auto c0 = tag_counts(tags, data, 0);
  CHECK(c0[SplitTag::Labeled] == 2);
  CHECK(c0[SplitTag::Test] == 1);
  CHECK(c0[SplitTag::Unlabeled] == 1);
}

TEST_CASE("split is deterministic and covers every instance exactly once") {
  const auto data = generate(small_spec(), 11);
  const auto a = split(data, 0.4, 3);
  const auto b = split(data, 0.4, 3);
  CHECK(a == b);
  const auto c = split(data, 0.4, 4);
  // Same sizes per tag even under a different shuffle.
  for (const auto tag : {SplitTag::Labeled, SplitTag::Unlabeled, SplitTag::Test}) {
    CHECK(std::count(a.begin(), a.end(), tag) == std::count(c.begin(), c.end(), tag));
  }
}

TEST_CASE("split rejects quotas that exceed a class") {
  DatasetSpec spec;
  spec.d_in = 1;
  spec.class_counts = {2, 20};
  spec.class_means = {{0.0}, {5.0}};
  spec.class_scales = {1.0, 1.0};
  const auto data = generate(spec, 2);
  CHECK_THROWS_AS((void)split(data, 0.9, 1), ConfigError);
  CHECK_THROWS_AS((void)split(data, 0.0, 1), ConfigError);
  CHECK_THROWS_AS((void)split(data, 1.5, 1), ConfigError);
}

TEST_CASE("make_splits partitions the population by tag") {
  const auto data = generate(small_spec(), 11);
  const auto tags = split(data, 0.4, 3);
  const auto parts = make_splits(data, tags);
  CHECK(parts.labeled.size() + parts.unlabeled.size() + parts.test.size() ==
        data.size());
  CHECK(parts.labeled.d_in == data.d_in);
  CHECK(parts.test.num_classes == data.num_classes);
  for (const auto& d : {parts.labeled, parts.unlabeled, parts.test})
    for (const auto& inst : d.instances) CHECK(inst.features.size() == data.d_in);
}

TEST_CASE("weak augmentation with zero sigma is the identity") {
  AugmentConfig cfg;
  cfg.weak_sigma = 0.0;
  Rng rng(1);
  const Vec x = {1.5, -2.0, 0.25};
  CHECK(weak_augment(x, cfg, rng) == x);
}

TEST_CASE("strong augmentation with unit scale and zero sigma is the identity") {
  AugmentConfig cfg;
  cfg.strong_sigma = 0.0;
  cfg.strong_scale_lo = 1.0;
  cfg.strong_scale_hi = 1.0;
  Rng rng(1);
  const Vec x = {1.5, -2.0, 0.25};
  CHECK(strong_augment(x, cfg, rng) == x);
}

TEST_CASE("weak augmentation jitter has the configured spread") {
  AugmentConfig cfg;
  cfg.weak_sigma = 0.3;
  Rng rng(17);
  const Vec x = {0.0};
  double sum = 0.0;
  double sumsq = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    const double v = weak_augment(x, cfg, rng)[0];
    sum += v;
    sumsq += v * v;
  }
  const double mean = sum / n;
  const double sd = std::sqrt(sumsq / n - mean * mean);
  CHECK(std::abs(mean) < 0.01);
  CHECK(sd == doctest::Approx(0.3).epsilon(0.02));
}

TEST_CASE("strong augmentation scale stays inside the configured band") {
  AugmentConfig cfg;
  cfg.strong_sigma = 0.0;
  cfg.strong_scale_lo = 0.7;
  cfg.strong_scale_hi = 1.3;
  Rng rng(23);
  const Vec x = {2.0};
  for (int i = 0; i < 1000; ++i) {
    const double v = strong_augment(x, cfg, rng)[0];
    CHECK(v >= 0.7 * 2.0 - 1e-12);
    CHECK(v <= 1.3 * 2.0 + 1e-12);
  }
}

TEST_CASE("augment config validation") {
  AugmentConfig cfg;
  cfg.weak_sigma = -0.1;
  CHECK_THROWS_AS(validate(cfg), ConfigError);
  cfg = AugmentConfig{};
  cfg.strong_sigma = 0.05;  // weaker than the weak view
  CHECK_THROWS_AS(validate(cfg), ConfigError);
  cfg = AugmentConfig{};
  cfg.strong_scale_lo = 1.1;
  CHECK_THROWS_AS(validate(cfg), ConfigError);
  cfg = AugmentConfig{};
  cfg.strong_scale_hi = 0.9;
  CHECK_THROWS_AS(validate(cfg), ConfigError);
  CHECK_NOTHROW(validate(AugmentConfig{}));
}

TEST_CASE("dataset CSV round-trips bit for bit") {
  const auto dir = testutil::make_temp_dir("csv");
  const auto data = generate(small_spec(), 99);
  const auto tags = split(data, 0.4, 1);
  const auto path = dir + "/data.csv";
  write_dataset_csv(path, data, tags);

  const auto loaded = load_dataset_csv(path);
  REQUIRE(loaded.population.size() == data.size());
  CHECK(loaded.population.d_in == data.d_in);
  CHECK(loaded.population.num_classes == data.num_classes);
  CHECK(loaded.tags == tags);
  for (std::size_t i = 0; i < data.size(); ++i) {
    CHECK(loaded.population.instances[i].label == data.instances[i].label);
    CHECK(loaded.population.instances[i].features == data.instances[i].features);
  }

  // Writing the loaded copy reproduces the file byte for byte.
  const auto path2 = dir + "/data2.csv";
  write_dataset_csv(path2, loaded.population, loaded.tags);
  CHECK(testutil::read_file(path) == testutil::read_file(path2));
  std::filesystem::remove_all(dir);
}

TEST_CASE("CSV loader reports malformed input with a line number") {
  const auto dir = testutil::make_temp_dir("badcsv");

  const auto check_throws = [&](const std::string& name, const std::string& text) {
    const auto path = dir + "/" + name;
    testutil::write_file(path, text);
    CHECK_THROWS_AS((void)load_dataset_csv(path), DataError);
  };

  check_throws("missing.csv", "");  // empty file: no header
  check_throws("header.csv", "id,label,tag,f0\n0,0,labeled,1.0\n");
  check_throws("badtag.csv", "id,label,split,f0\n0,0,nonsense,1.0\n");
  check_throws("badnum.csv", "id,label,split,f0\n0,0,labeled,zz\n");
  check_throws("shortrow.csv", "id,label,split,f0,f1\n0,0,labeled,1.0\n");
  check_throws("badlabel.csv", "id,label,split,f0\n0,x,labeled,1.0\n");
  CHECK_THROWS_AS((void)load_dataset_csv(dir + "/does_not_exist.csv"), DataError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("the benchmark spec is a valid imbalanced eight-class mixture") {
  const auto spec = default_benchmark_spec();
  CHECK_NOTHROW(validate(spec));
  CHECK(spec.num_classes() == 8);
  CHECK(spec.d_in == 16);
  std::size_t total = 0;
  bool decreasing = true;
  for (std::size_t c = 0; c < spec.num_classes(); ++c) {
    total += spec.class_counts[c];
    if (c > 0) decreasing = decreasing && spec.class_counts[c] <= spec.class_counts[c - 1];
  }
  CHECK(total == 1275);
  CHECK(decreasing);
  // The head and tail hard classes carry inflated within-class spread.
  CHECK(spec.class_scales[1] > spec.class_scales[0]);
  CHECK(spec.class_scales[6] > spec.class_scales[7]);
}
