#include "confidssl/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "confidssl/errors.hpp"
#include "confidssl/text.hpp"

namespace confidssl {

namespace {

std::string trim(std::string_view s) {
  const auto* ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(s);
  while (std::getline(is, item, ',')) out.push_back(trim(item));
  return out;
}

double parse_double_field(const std::string& key, const std::string& value) {
  double v = 0.0;
  const auto* end = value.data() + value.size();
  const auto res = std::from_chars(value.data(), end, v);
  if (res.ec != std::errc{} || res.ptr != end)
    throw ConfigError("field '" + key + "': expected a number, got '" + value + "'");
  return v;
}

std::uint64_t parse_u64_field(const std::string& key, const std::string& value) {
  std::uint64_t v = 0;
  const auto* end = value.data() + value.size();
  const auto res = std::from_chars(value.data(), end, v);
  if (res.ec != std::errc{} || res.ptr != end)
    throw ConfigError("field '" + key + "': expected a nonnegative integer, got '" +
                      value + "'");
  return v;
}

std::size_t parse_size_field(const std::string& key, const std::string& value) {
  return static_cast<std::size_t>(parse_u64_field(key, value));
}

bool parse_bool_field(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ConfigError("field '" + key + "': expected true/false, got '" + value + "'");
}

MethodVariant parse_method_field(const std::string& key, const std::string& value) {
  const auto m = method_from_string(value);
  if (!m) throw ConfigError("field '" + key + "': unknown method '" + value + "'");
  return *m;
}

MappingKind parse_mapping_field(const std::string& key, const std::string& value) {
  const auto m = mapping_from_string(value);
  if (!m) throw ConfigError("field '" + key + "': unknown mapping '" + value + "'");
  return *m;
}

}  // namespace

KvMap parse_kv_text(const std::string& text, const std::string& origin) {
  KvMap out;
  std::istringstream is(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string stripped = trim(line);
    if (stripped.empty()) continue;
    const auto eq = stripped.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + ":" + std::to_string(line_no) +
                        ": expected 'key = value'");
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    if (key.empty() || value.empty())
      throw ConfigError(origin + ":" + std::to_string(line_no) +
                        ": expected 'key = value'");
    if (out.count(key))
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": duplicate key '" +
                        key + "'");
    out[key] = value;
  }
  return out;
}

KvMap parse_kv_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open config file '" + path + "'");
  std::ostringstream buf;
  buf << is.rdbuf();
  return parse_kv_text(buf.str(), path);
}

TrainerConfig trainer_config_from_kv(const KvMap& kv, TrainerConfig base) {
  for (const auto& [key, value] : kv) {
    if (key == "method") base.method = parse_method_field(key, value);
    else if (key == "seed") base.seed = parse_u64_field(key, value);
    else if (key == "tau") base.tau = parse_double_field(key, value);
    else if (key == "lambda_s") base.lambda_s = parse_double_field(key, value);
    else if (key == "lambda_u") base.lambda_u = parse_double_field(key, value);
    else if (key == "batch_labeled") base.batch_labeled = parse_size_field(key, value);
    else if (key == "mu") base.mu = parse_size_field(key, value);
    else if (key == "epochs") base.epochs = parse_size_field(key, value);
    else if (key == "lr_max") base.lr_max = parse_double_field(key, value);
    else if (key == "lr_min") base.lr_min = parse_double_field(key, value);
    else if (key == "momentum") base.momentum = parse_double_field(key, value);
    else if (key == "mapping") base.mapping = parse_mapping_field(key, value);
    else if (key == "resample_period") base.resample_period = parse_size_field(key, value);
    else if (key == "resample_labeled") base.resample_labeled = parse_bool_field(key, value);
    else if (key == "resample_unlabeled") base.resample_unlabeled = parse_bool_field(key, value);
    else if (key == "hidden") base.hidden = parse_size_field(key, value);
    else if (key == "weak_sigma") base.augment.weak_sigma = parse_double_field(key, value);
    else if (key == "strong_sigma") base.augment.strong_sigma = parse_double_field(key, value);
    else if (key == "strong_scale_lo") base.augment.strong_scale_lo = parse_double_field(key, value);
    else if (key == "strong_scale_hi") base.augment.strong_scale_hi = parse_double_field(key, value);
    else throw ConfigError("config: unknown key '" + key + "'");
  }
  return base;
}

std::string format_config(const TrainerConfig& cfg) {
  std::ostringstream os;
  os << "method = " << to_string(cfg.method) << "\n";
  os << "seed = " << cfg.seed << "\n";
  os << "tau = " << format_double(cfg.tau) << "\n";
  os << "lambda_s = " << format_double(cfg.lambda_s) << "\n";
  os << "lambda_u = " << format_double(cfg.lambda_u) << "\n";
  os << "batch_labeled = " << cfg.batch_labeled << "\n";
  os << "mu = " << cfg.mu << "\n";
  os << "epochs = " << cfg.epochs << "\n";
  os << "lr_max = " << format_double(cfg.lr_max) << "\n";
  os << "lr_min = " << format_double(cfg.lr_min) << "\n";
  os << "momentum = " << format_double(cfg.momentum) << "\n";
  os << "mapping = " << to_string(cfg.mapping) << "\n";
  os << "resample_period = " << cfg.resample_period << "\n";
  os << "resample_labeled = " << (cfg.resample_labeled ? "true" : "false") << "\n";
  os << "resample_unlabeled = " << (cfg.resample_unlabeled ? "true" : "false") << "\n";
  os << "hidden = " << cfg.hidden << "\n";
  os << "weak_sigma = " << format_double(cfg.augment.weak_sigma) << "\n";
  os << "strong_sigma = " << format_double(cfg.augment.strong_sigma) << "\n";
  os << "strong_scale_lo = " << format_double(cfg.augment.strong_scale_lo) << "\n";
  os << "strong_scale_hi = " << format_double(cfg.augment.strong_scale_hi) << "\n";
  return os.str();
}

GenerateSpec generate_spec_from_kv(const KvMap& kv) {
  GenerateSpec out;
  DatasetSpec& spec = out.dataset;

  const auto find = [&kv](const char* key) -> const std::string* {
    const auto it = kv.find(key);
    return it == kv.end() ? nullptr : &it->second;
  };

  const auto* d_in = find("d_in");
  if (!d_in) throw ConfigError("dataset spec: missing field 'd_in'");
  spec.d_in = parse_size_field("d_in", *d_in);

  const auto* counts = find("counts");
  if (!counts) throw ConfigError("dataset spec: missing field 'counts'");
  for (const auto& item : split_list(*counts))
    spec.class_counts.push_back(parse_size_field("counts", item));
  const std::size_t c = spec.class_counts.size();

  if (const auto* scales = find("scales")) {
    for (const auto& item : split_list(*scales))
      spec.class_scales.push_back(parse_double_field("scales", item));
    if (spec.class_scales.size() == 1) spec.class_scales.assign(c, spec.class_scales[0]);
    if (spec.class_scales.size() != c)
      throw ConfigError("dataset spec: field 'scales' must list 1 or " +
                        std::to_string(c) + " values");
  } else {
    spec.class_scales.assign(c, 1.0);
  }

  double radius = 3.0;
  if (const auto* r = find("mean_radius"))
    radius = parse_double_field("mean_radius", *r);
  spec.class_means.assign(c, Vec(spec.d_in, 0.0));
  std::vector<bool> mean_set(c, false);
  if (spec.d_in >= c) {
    for (std::size_t k = 0; k < c; ++k) {
      spec.class_means[k][k] = radius;
      mean_set[k] = true;
    }
  }
  for (std::size_t k = 0; k < c; ++k) {
    const std::string key = "mean_" + std::to_string(k);
    if (const auto* mean = find(key.c_str())) {
      const auto items = split_list(*mean);
      if (items.size() != spec.d_in)
        throw ConfigError("dataset spec: field '" + key + "' must list d_in values");
      for (std::size_t j = 0; j < spec.d_in; ++j)
        spec.class_means[k][j] = parse_double_field(key, items[j]);
      mean_set[k] = true;
    }
  }
  for (std::size_t k = 0; k < c; ++k) {
    if (!mean_set[k])
      throw ConfigError("dataset spec: class " + std::to_string(k) +
                        " has no mean (more classes than d_in axes; set field 'mean_" +
                        std::to_string(k) + "')");
  }

  if (const auto* frac = find("labeled_fraction"))
    out.labeled_fraction = parse_double_field("labeled_fraction", *frac);

  static const char* known[] = {"d_in", "counts", "scales", "mean_radius",
                                "labeled_fraction"};
  for (const auto& [key, value] : kv) {
    (void)value;
    bool ok = std::find(std::begin(known), std::end(known), key) != std::end(known);
    if (!ok && key.rfind("mean_", 0) == 0) {
      const std::string idx = key.substr(5);
      std::size_t cls = 0;
      const auto* end = idx.data() + idx.size();
      const auto res = std::from_chars(idx.data(), end, cls);
      ok = res.ec == std::errc{} && res.ptr == end && idx == std::to_string(cls) &&
           cls < c;
      if (!ok)
        throw ConfigError("dataset spec: field '" + key +
                          "' does not name a class in [0, " + std::to_string(c) + ")");
    }
    if (!ok) throw ConfigError("dataset spec: unknown field '" + key + "'");
  }

  validate(spec);
  return out;
}

SweepGrid sweep_grid_from_kv(const KvMap& kv) {
  SweepGrid grid;
  KvMap rest = kv;

  if (const auto it = rest.find("data"); it != rest.end()) {
    grid.data_path = it->second;
    rest.erase(it);
  }
  if (rest.count("seed"))
    throw ConfigError("sweep grid: use 'seeds = ...' (a list), not 'seed'");
  if (const auto it = rest.find("seeds"); it != rest.end()) {
    for (const auto& item : split_list(it->second))
      grid.seeds.push_back(parse_u64_field("seeds", item));
    rest.erase(it);
  }
  if (grid.seeds.empty()) throw ConfigError("sweep grid: missing field 'seeds'");

  if (const auto it = rest.find("method"); it != rest.end()) {
    for (const auto& item : split_list(it->second))
      grid.methods.push_back(parse_method_field("method", item));
    rest.erase(it);
  }
  if (const auto it = rest.find("tau"); it != rest.end()) {
    for (const auto& item : split_list(it->second))
      grid.taus.push_back(parse_double_field("tau", item));
    rest.erase(it);
  }
  if (const auto it = rest.find("mapping"); it != rest.end()) {
    for (const auto& item : split_list(it->second))
      grid.mappings.push_back(parse_mapping_field("mapping", item));
    rest.erase(it);
  }

  grid.base = trainer_config_from_kv(rest, TrainerConfig{});
  if (grid.methods.empty()) grid.methods = {grid.base.method};
  if (grid.taus.empty()) grid.taus = {grid.base.tau};
  if (grid.mappings.empty()) grid.mappings = {grid.base.mapping};
  return grid;
}

}  // namespace confidssl
