#include "confidssl/data_synth.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <system_error>

#include "confidssl/errors.hpp"
#include "confidssl/text.hpp"

namespace confidssl {

namespace {

// Fp-safe integer rounding of fraction * count: nudge before truncation so
// 0.1 * 100 is 10 labeled, not 11.
std::size_t ceil_count(double fraction, std::size_t count) {
  return static_cast<std::size_t>(
      std::ceil(fraction * static_cast<double>(count) - 1e-9));
}

std::size_t floor_count(double fraction, std::size_t count) {
  return static_cast<std::size_t>(
      std::floor(fraction * static_cast<double>(count) + 1e-9));
}

double parse_csv_double(const std::string& field, const std::string& path,
                        std::size_t line) {
  double v = 0.0;
  const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
  if (res.ec != std::errc{} || res.ptr != field.data() + field.size())
    throw DataError(path + ":" + std::to_string(line) + ": bad numeric field '" +
                    field + "'");
  return v;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

void validate(const DatasetSpec& spec) {
  const std::size_t c = spec.num_classes();
  if (c < 2) throw ConfigError("dataset spec: need at least 2 classes (field counts)");
  if (spec.d_in == 0) throw ConfigError("dataset spec: field d_in must be >= 1");
  if (spec.class_means.size() != c)
    throw ConfigError("dataset spec: field means must list one vector per class");
  if (spec.class_scales.size() != c)
    throw ConfigError("dataset spec: field scales must list one value per class");
  for (std::size_t i = 0; i < c; ++i) {
    if (spec.class_counts[i] < 2)
      throw ConfigError("dataset spec: field counts: class " + std::to_string(i) +
                        " needs at least 2 instances");
    if (spec.class_means[i].size() != spec.d_in)
      throw ConfigError("dataset spec: field mean_" + std::to_string(i) +
                        " must have d_in entries");
    if (!(spec.class_scales[i] > 0.0))
      throw ConfigError("dataset spec: field scales: class " + std::to_string(i) +
                        " needs a positive scale");
  }
}

Dataset generate(const DatasetSpec& spec, std::uint64_t seed) {
  validate(spec);
  Rng rng(seed);
  Dataset out;
  out.d_in = spec.d_in;
  out.num_classes = spec.num_classes();
  std::size_t total = 0;
  for (const auto n : spec.class_counts) total += n;
  out.instances.reserve(total);
  for (std::size_t c = 0; c < spec.num_classes(); ++c) {
    for (std::size_t k = 0; k < spec.class_counts[c]; ++k) {
      Instance inst;
      inst.label = c;
      inst.features.resize(spec.d_in);
      for (std::size_t j = 0; j < spec.d_in; ++j)
        inst.features[j] = spec.class_means[c][j] + spec.class_scales[c] * rng.normal();
      out.instances.push_back(std::move(inst));
    }
  }
  return out;
}

std::string_view to_string(SplitTag tag) {
  switch (tag) {
    case SplitTag::Labeled: return "labeled";
    case SplitTag::Unlabeled: return "unlabeled";
    case SplitTag::Test: return "test";
  }
  return "unlabeled";
}

std::vector<SplitTag> split(const Dataset& population, double labeled_fraction,
                            std::uint64_t seed) {
  if (!(labeled_fraction > 0.0 && labeled_fraction < 1.0))
    throw ConfigError("split: labeled_fraction must lie in (0, 1)");
  if (population.instances.empty()) throw ConfigError("split: empty population");

  std::vector<std::vector<std::size_t>> by_class(population.num_classes);
  for (std::size_t i = 0; i < population.instances.size(); ++i) {
    const auto label = population.instances[i].label;
    if (label >= population.num_classes)
      throw ConfigError("split: label out of range in population");
    by_class[label].push_back(i);
  }

  std::vector<SplitTag> tags(population.instances.size(), SplitTag::Unlabeled);
  Rng rng(seed);
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto& idx = by_class[c];
    const std::size_t n = idx.size();
    if (n == 0)
      throw ConfigError("split: class " + std::to_string(c) + " has no instances");
    const std::size_t n_lab = std::max<std::size_t>(1, ceil_count(labeled_fraction, n));
    const std::size_t n_test = std::max<std::size_t>(1, floor_count(0.2, n));
    if (n_lab + n_test > n)
      throw ConfigError("split: class " + std::to_string(c) +
                        " too small for labeled + test minimums");
    rng.shuffle(idx);
    for (std::size_t k = 0; k < n_lab; ++k) tags[idx[k]] = SplitTag::Labeled;
    for (std::size_t k = n_lab; k < n_lab + n_test; ++k) tags[idx[k]] = SplitTag::Test;
  }
  return tags;
}

SplitDataset make_splits(const Dataset& population, const std::vector<SplitTag>& tags) {
  if (tags.size() != population.instances.size())
    throw ConfigError("make_splits: tag list does not match population");
  SplitDataset out;
  for (Dataset* d : {&out.labeled, &out.unlabeled, &out.test}) {
    d->d_in = population.d_in;
    d->num_classes = population.num_classes;
  }
  for (std::size_t i = 0; i < tags.size(); ++i) {
    switch (tags[i]) {
      case SplitTag::Labeled: out.labeled.instances.push_back(population.instances[i]); break;
      case SplitTag::Unlabeled: out.unlabeled.instances.push_back(population.instances[i]); break;
      case SplitTag::Test: out.test.instances.push_back(population.instances[i]); break;
    }
  }
  return out;
}

void validate(const AugmentConfig& cfg) {
  if (!(cfg.weak_sigma > 0.0))
    throw ConfigError("augment: weak_sigma must be positive");
  if (!(cfg.strong_sigma > cfg.weak_sigma))
    throw ConfigError("augment: strong_sigma must exceed weak_sigma");
  if (!(cfg.strong_scale_lo > 0.0 && cfg.strong_scale_lo <= 1.0 &&
        cfg.strong_scale_hi >= 1.0))
    throw ConfigError("augment: scale range must satisfy 0 < lo <= 1 <= hi");
}

Vec weak_augment(const Vec& x, const AugmentConfig& cfg, Rng& rng) {
  Vec out(x.size());
  for (std::size_t j = 0; j < x.size(); ++j)
    out[j] = x[j] + cfg.weak_sigma * rng.normal();
  return out;
}

Vec strong_augment(const Vec& x, const AugmentConfig& cfg, Rng& rng) {
  const double s = rng.uniform(cfg.strong_scale_lo, cfg.strong_scale_hi);
  Vec out(x.size());
  for (std::size_t j = 0; j < x.size(); ++j)
    out[j] = s * x[j] + cfg.strong_sigma * rng.normal();
  return out;
}

void write_dataset_csv(const std::string& path, const Dataset& population,
                       const std::vector<SplitTag>& tags) {
  if (tags.size() != population.instances.size())
    throw ConfigError("write_dataset_csv: tag list does not match population");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("write_dataset_csv: cannot open '" + path + "'");
  os << "id,label,split";
  for (std::size_t j = 0; j < population.d_in; ++j) os << ",f" << j;
  os << "\n";
  for (std::size_t i = 0; i < population.instances.size(); ++i) {
    const auto& inst = population.instances[i];
    os << i << ',' << inst.label << ',' << to_string(tags[i]);
    for (const double v : inst.features) os << ',' << format_double(v);
    os << "\n";
  }
  if (!os) throw DataError("write_dataset_csv: write failed for '" + path + "'");
}

LoadedDataset load_dataset_csv(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("load_dataset_csv: cannot open '" + path + "'");
  std::string line;
  if (!std::getline(is, line)) throw DataError(path + ": empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_csv_line(line);
  if (header.size() < 4 || header[0] != "id" || header[1] != "label" ||
      header[2] != "split")
    throw DataError(path + ": header must start with id,label,split");
  const std::size_t d_in = header.size() - 3;
  for (std::size_t j = 0; j < d_in; ++j) {
    if (header[3 + j] != "f" + std::to_string(j))
      throw DataError(path + ": feature columns must be named f0..f" +
                      std::to_string(d_in - 1));
  }

  LoadedDataset out;
  out.population.d_in = d_in;
  std::size_t line_no = 1;
  std::size_t max_label = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size())
      throw DataError(path + ":" + std::to_string(line_no) + ": expected " +
                      std::to_string(header.size()) + " fields, got " +
                      std::to_string(fields.size()));
    Instance inst;
    const double label_v = parse_csv_double(fields[1], path, line_no);
    if (label_v < 0.0 || label_v != std::floor(label_v))
      throw DataError(path + ":" + std::to_string(line_no) + ": bad label '" +
                      fields[1] + "'");
    inst.label = static_cast<std::size_t>(label_v);
    max_label = std::max(max_label, inst.label);
    SplitTag tag;
    if (fields[2] == "labeled") tag = SplitTag::Labeled;
    else if (fields[2] == "unlabeled") tag = SplitTag::Unlabeled;
    else if (fields[2] == "test") tag = SplitTag::Test;
    else
      throw DataError(path + ":" + std::to_string(line_no) + ": bad split tag '" +
                      fields[2] + "'");
    inst.features.resize(d_in);
    for (std::size_t j = 0; j < d_in; ++j)
      inst.features[j] = parse_csv_double(fields[3 + j], path, line_no);
    out.population.instances.push_back(std::move(inst));
    out.tags.push_back(tag);
  }
  if (out.population.instances.empty()) throw DataError(path + ": no data rows");
  out.population.num_classes = max_label + 1;
  return out;
}

DatasetSpec default_benchmark_spec() {
  DatasetSpec spec;
  spec.d_in = 16;
  spec.class_counts = {400, 280, 200, 140, 100, 70, 50, 35};
  spec.class_scales = {1.0, 1.7, 1.0, 1.0, 1.0, 1.0, 1.7, 1.0};
  spec.class_means.assign(8, Vec(spec.d_in, 0.0));
  for (std::size_t c = 0; c < 8; ++c) spec.class_means[c][c] = 3.2;
  // Hard majority class: pulled toward class 0, inflated scale.
  spec.class_means[1] = Vec(spec.d_in, 0.0);
  spec.class_means[1][0] = 1.2;
  spec.class_means[1][1] = 2.2;
  // Hard minority class: pulled toward class 5, inflated scale.
  spec.class_means[6] = Vec(spec.d_in, 0.0);
  spec.class_means[6][5] = 1.2;
  spec.class_means[6][6] = 2.2;
  return spec;
}

}  // namespace confidssl
