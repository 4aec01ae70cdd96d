#pragma once

#include <string>
#include <vector>

#include "json.hpp"

#include "confidssl/trainer.hpp"

namespace confidssl {

// All doubles round-trip exactly through these (shortest-round-trip decimals),
// so identical runs serialize to identical bytes.

nlohmann::json to_json(const TrainerConfig& cfg);
TrainerConfig trainer_config_from_json(const nlohmann::json& j);

nlohmann::json to_json(const MetricsRecord& rec);
MetricsRecord metrics_record_from_json(const nlohmann::json& j);

// One compact JSON object per line.
std::string metrics_to_jsonl(const std::vector<MetricsRecord>& records);
void write_metrics_jsonl(const std::string& path,
                         const std::vector<MetricsRecord>& records);
std::vector<MetricsRecord> load_metrics_jsonl(const std::string& path);

// Header "method,seed,overall_acc,mean_acc" plus one row.
std::string summary_csv(const TrainerConfig& cfg, const EvalResult& eval);
void write_summary_csv(const std::string& path, const TrainerConfig& cfg,
                       const EvalResult& eval);

struct LoadedCheckpoint {
  TrainerConfig config;
  TrainerState state;
  std::string dataset_path;
};

nlohmann::json checkpoint_to_json(const TrainerConfig& cfg, const TrainerState& state,
                                  const std::string& dataset_path);
LoadedCheckpoint checkpoint_from_json(const nlohmann::json& j);

void write_checkpoint(const std::string& path, const TrainerConfig& cfg,
                      const TrainerState& state, const std::string& dataset_path);
LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace confidssl
