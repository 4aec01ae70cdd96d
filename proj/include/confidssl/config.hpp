#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "confidssl/data_synth.hpp"
#include "confidssl/trainer.hpp"

namespace confidssl {

// Plain "key = value" lines; '#' starts a comment; blank lines are ignored.
using KvMap = std::map<std::string, std::string>;

KvMap parse_kv_text(const std::string& text, const std::string& origin);
KvMap parse_kv_file(const std::string& path);

// Applies recognized trainer keys over `base`. Unknown keys are an error that
// names the key. Purely syntactic; semantic checks live in validate().
TrainerConfig trainer_config_from_kv(const KvMap& kv, TrainerConfig base);

// Full schema in a fixed order; output parses back via parse_kv_text.
std::string format_config(const TrainerConfig& cfg);

// Dataset spec schema: d_in, counts (per class), scales (per class or one
// broadcast value), mean_radius (axis-aligned means), optional per-class
// mean_<c> overrides, labeled_fraction.
struct GenerateSpec {
  DatasetSpec dataset;
  double labeled_fraction = 0.1;
};

GenerateSpec generate_spec_from_kv(const KvMap& kv);

// Sweep grid: trainer keys (single values) plus comma lists for method, tau
// and mapping, a seeds list, and the dataset path.
struct SweepGrid {
  TrainerConfig base;
  std::vector<MethodVariant> methods;
  std::vector<double> taus;
  std::vector<MappingKind> mappings;
  std::vector<std::uint64_t> seeds;
  std::string data_path;
};

SweepGrid sweep_grid_from_kv(const KvMap& kv);

}  // namespace confidssl
