#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

namespace pathnet {

/// Compositional multi-hop task. Each query relation q maps to a fixed
/// tuple of per-hop relations (r_1, ..., r_m). An instance states the gold
/// chain "E_0 <r_1> E_1." ... "E_{m-1} <r_m> E_m." in separate passages and
/// asks (E_0, q, ?). Distractor chains leave the gold chain at a random hop
/// with a wrong relation, so only the full composition identifies E_m.
struct SyntheticConfig {
  int entities = 60;    // entity name pool
  int relations = 6;    // relation phrases per hop position
  int rules = 6;        // query relations
  int hops = 2;
  int instances = 600;
  int candidates = 4;
  int filler_passages = 2;
  std::uint64_t seed = 7;

  void validate() const;
};

struct SyntheticDataset {
  /// Query relation word -> relation words along the chain.
  nlohmann::json rules;
  /// Records in the WikiHop-style layout accepted by parse_dataset.
  std::vector<nlohmann::json> records;
};

/// Every record is checked against extract_paths (default limits with
/// max_hops = hops) and regenerated until its gold chain is found.
SyntheticDataset generate_synthetic(const SyntheticConfig& config);

void to_json(nlohmann::json& j, const SyntheticConfig& c);
void from_json(const nlohmann::json& j, SyntheticConfig& c);

}  // namespace pathnet
