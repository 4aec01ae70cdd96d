#include "confidssl/serialize.hpp"

#include <fstream>
#include <sstream>

#include "confidssl/errors.hpp"
#include "confidssl/text.hpp"
#include "confidssl/version.hpp"

namespace confidssl {

namespace {

constexpr const char* kCheckpointFormat = "confidssl.checkpoint.v1";

nlohmann::json params_to_json(const ModelParams& p) {
  return nlohmann::json{{"d_in", p.input_dim()},   {"hidden", p.hidden_dim()},
                        {"classes", p.num_classes()}, {"w1", p.w1.data},
                        {"b1", p.b1},              {"w2", p.w2.data},
                        {"b2", p.b2}};
}

ModelParams params_from_json(const nlohmann::json& j) {
  ModelParams p;
  const auto d_in = j.at("d_in").get<std::size_t>();
  const auto hidden = j.at("hidden").get<std::size_t>();
  const auto classes = j.at("classes").get<std::size_t>();
  p.w1 = Matrix(hidden, d_in);
  p.w1.data = j.at("w1").get<Vec>();
  p.b1 = j.at("b1").get<Vec>();
  p.w2 = Matrix(classes, hidden);
  p.w2.data = j.at("w2").get<Vec>();
  p.b2 = j.at("b2").get<Vec>();
  if (p.w1.data.size() != hidden * d_in || p.w2.data.size() != classes * hidden ||
      p.b1.size() != hidden || p.b2.size() != classes)
    throw DataError("checkpoint: parameter array sizes disagree with dims");
  return p;
}

nlohmann::json optional_array(const std::vector<std::optional<double>>& v) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& e : v) {
    if (e.has_value())
      arr.push_back(*e);
    else
      arr.push_back(nullptr);
  }
  return arr;
}

std::vector<std::optional<double>> optional_array_from(const nlohmann::json& arr) {
  std::vector<std::optional<double>> out;
  out.reserve(arr.size());
  for (const auto& e : arr) {
    if (e.is_null())
      out.emplace_back(std::nullopt);
    else
      out.emplace_back(e.get<double>());
  }
  return out;
}

}  // namespace

nlohmann::json to_json(const TrainerConfig& cfg) {
  return nlohmann::json{{"method", std::string(to_string(cfg.method))},
                        {"seed", cfg.seed},
                        {"tau", cfg.tau},
                        {"lambda_s", cfg.lambda_s},
                        {"lambda_u", cfg.lambda_u},
                        {"batch_labeled", cfg.batch_labeled},
                        {"mu", cfg.mu},
                        {"epochs", cfg.epochs},
                        {"lr_max", cfg.lr_max},
                        {"lr_min", cfg.lr_min},
                        {"momentum", cfg.momentum},
                        {"mapping", std::string(to_string(cfg.mapping))},
                        {"resample_period", cfg.resample_period},
                        {"resample_labeled", cfg.resample_labeled},
                        {"resample_unlabeled", cfg.resample_unlabeled},
                        {"hidden", cfg.hidden},
                        {"weak_sigma", cfg.augment.weak_sigma},
                        {"strong_sigma", cfg.augment.strong_sigma},
                        {"strong_scale_lo", cfg.augment.strong_scale_lo},
                        {"strong_scale_hi", cfg.augment.strong_scale_hi}};
}

TrainerConfig trainer_config_from_json(const nlohmann::json& j) {
  TrainerConfig cfg;
  const auto method = method_from_string(j.at("method").get<std::string>());
  if (!method) throw ConfigError("config: unknown method '" +
                                 j.at("method").get<std::string>() + "'");
  cfg.method = *method;
  cfg.seed = j.at("seed").get<std::uint64_t>();
  cfg.tau = j.at("tau").get<double>();
  cfg.lambda_s = j.at("lambda_s").get<double>();
  cfg.lambda_u = j.at("lambda_u").get<double>();
  cfg.batch_labeled = j.at("batch_labeled").get<std::size_t>();
  cfg.mu = j.at("mu").get<std::size_t>();
  cfg.epochs = j.at("epochs").get<std::size_t>();
  cfg.lr_max = j.at("lr_max").get<double>();
  cfg.lr_min = j.at("lr_min").get<double>();
  cfg.momentum = j.at("momentum").get<double>();
  const auto mapping = mapping_from_string(j.at("mapping").get<std::string>());
  if (!mapping) throw ConfigError("config: unknown mapping '" +
                                  j.at("mapping").get<std::string>() + "'");
  cfg.mapping = *mapping;
  cfg.resample_period = j.at("resample_period").get<std::size_t>();
  cfg.resample_labeled = j.at("resample_labeled").get<bool>();
  cfg.resample_unlabeled = j.at("resample_unlabeled").get<bool>();
  cfg.hidden = j.at("hidden").get<std::size_t>();
  cfg.augment.weak_sigma = j.at("weak_sigma").get<double>();
  cfg.augment.strong_sigma = j.at("strong_sigma").get<double>();
  cfg.augment.strong_scale_lo = j.at("strong_scale_lo").get<double>();
  cfg.augment.strong_scale_hi = j.at("strong_scale_hi").get<double>();
  return cfg;
}

nlohmann::json to_json(const MetricsRecord& rec) {
  nlohmann::json j{{"epoch", rec.epoch},
                   {"overall_acc", rec.overall_acc},
                   {"mean_class_acc", rec.mean_class_acc},
                   {"per_class_acc", rec.per_class_acc},
                   {"per_class_p", optional_array(rec.per_class_p)},
                   {"thresholds", rec.thresholds},
                   {"pseudo_label_ratio", rec.pseudo_label_ratio},
                   {"loss_s", rec.loss_s},
                   {"loss_u", rec.loss_u}};
  if (rec.pseudo_label_precision.has_value())
    j["pseudo_label_precision"] = *rec.pseudo_label_precision;
  else
    j["pseudo_label_precision"] = nullptr;
  return j;
}

MetricsRecord metrics_record_from_json(const nlohmann::json& j) {
  MetricsRecord rec;
  rec.epoch = j.at("epoch").get<std::size_t>();
  rec.overall_acc = j.at("overall_acc").get<double>();
  rec.mean_class_acc = j.at("mean_class_acc").get<double>();
  rec.per_class_acc = j.at("per_class_acc").get<std::vector<double>>();
  rec.per_class_p = optional_array_from(j.at("per_class_p"));
  rec.thresholds = j.at("thresholds").get<std::vector<double>>();
  rec.pseudo_label_ratio = j.at("pseudo_label_ratio").get<double>();
  if (!j.at("pseudo_label_precision").is_null())
    rec.pseudo_label_precision = j.at("pseudo_label_precision").get<double>();
  rec.loss_s = j.at("loss_s").get<double>();
  rec.loss_u = j.at("loss_u").get<double>();
  return rec;
}

std::string metrics_to_jsonl(const std::vector<MetricsRecord>& records) {
  std::string out;
  for (const auto& rec : records) {
    out += to_json(rec).dump();
    out += '\n';
  }
  return out;
}

void write_metrics_jsonl(const std::string& path,
                         const std::vector<MetricsRecord>& records) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("write_metrics_jsonl: cannot open '" + path + "'");
  os << metrics_to_jsonl(records);
  if (!os) throw DataError("write_metrics_jsonl: write failed for '" + path + "'");
}

std::vector<MetricsRecord> load_metrics_jsonl(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("load_metrics_jsonl: cannot open '" + path + "'");
  std::vector<MetricsRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      out.push_back(metrics_record_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

std::string summary_csv(const TrainerConfig& cfg, const EvalResult& eval) {
  std::ostringstream os;
  os << "method,seed,overall_acc,mean_acc\n";
  os << to_string(cfg.method) << ',' << cfg.seed << ','
     << format_double(eval.overall_acc) << ',' << format_double(eval.mean_class_acc)
     << "\n";
  return os.str();
}

void write_summary_csv(const std::string& path, const TrainerConfig& cfg,
                       const EvalResult& eval) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("write_summary_csv: cannot open '" + path + "'");
  os << summary_csv(cfg, eval);
  if (!os) throw DataError("write_summary_csv: write failed for '" + path + "'");
}

nlohmann::json checkpoint_to_json(const TrainerConfig& cfg, const TrainerState& state,
                                  const std::string& dataset_path) {
  nlohmann::json metrics = nlohmann::json::array();
  for (const auto& rec : state.metrics) metrics.push_back(to_json(rec));
  nlohmann::json st{{"epoch", state.epoch},
                    {"params", params_to_json(state.params)},
                    {"stats", {{"sum_conf", state.stats.sum_conf},
                               {"count", state.stats.count}}},
                    {"thresholds", state.thresholds},
                    {"labeled_indices", state.labeled_indices},
                    {"unlabeled_table", {{"raw", state.unlabeled_table.raw}}},
                    {"rng", state.rng_state},
                    {"metrics", std::move(metrics)}};
  return nlohmann::json{{"format", kCheckpointFormat},
                        {"tool_version", kVersion},
                        {"config", to_json(cfg)},
                        {"dataset", dataset_path},
                        {"state", std::move(st)}};
}

LoadedCheckpoint checkpoint_from_json(const nlohmann::json& j) {
  if (!j.contains("format") || j.at("format").get<std::string>() != kCheckpointFormat)
    throw DataError("checkpoint: unrecognized format field");
  LoadedCheckpoint out;
  out.config = trainer_config_from_json(j.at("config"));
  out.dataset_path = j.at("dataset").get<std::string>();
  const auto& st = j.at("state");
  out.state.epoch = st.at("epoch").get<std::size_t>();
  out.state.params = params_from_json(st.at("params"));
  out.state.stats.sum_conf = st.at("stats").at("sum_conf").get<Vec>();
  out.state.stats.count = st.at("stats").at("count").get<std::vector<std::size_t>>();
  if (out.state.stats.sum_conf.size() != out.state.stats.count.size())
    throw DataError("checkpoint: stats arrays disagree");
  out.state.thresholds = st.at("thresholds").get<ThresholdVector>();
  out.state.labeled_indices =
      st.at("labeled_indices").get<std::vector<std::size_t>>();
  const Vec raw = st.at("unlabeled_table").at("raw").get<Vec>();
  if (!raw.empty()) out.state.unlabeled_table = build_distribution(raw);
  out.state.rng_state = st.at("rng").get<std::string>();
  for (const auto& rec : st.at("metrics"))
    out.state.metrics.push_back(metrics_record_from_json(rec));
  return out;
}

void write_checkpoint(const std::string& path, const TrainerConfig& cfg,
                      const TrainerState& state, const std::string& dataset_path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("write_checkpoint: cannot open '" + path + "'");
  os << checkpoint_to_json(cfg, state, dataset_path).dump(2) << "\n";
  if (!os) throw DataError("write_checkpoint: write failed for '" + path + "'");
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("load_checkpoint: cannot open '" + path + "'");
  try {
    nlohmann::json j;
    is >> j;
    return checkpoint_from_json(j);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("load_checkpoint: " + path + ": " + e.what());
  }
}

}  // namespace confidssl
