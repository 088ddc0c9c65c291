#pragma once

#include <compare>
#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "pathnet/corpus.hpp"

namespace pathnet {

/// An intermediate entity: its mention in the passage it is reached from and
/// its mention (same entity_key) in the next passage.
struct PathLink {
  MentionSpan source;
  MentionSpan target;

  bool operator==(const PathLink&) const = default;
};

/// Identity of a path for deduplication: endpoint and intermediate keys,
/// candidate index and passage sequence.
struct PathKey {
  std::string head_key;
  std::vector<std::string> intermediate_keys;
  std::string tail_key;
  std::size_t candidate_index = 0;
  std::vector<int> passage_ids;

  auto operator<=>(const PathKey&) const = default;
  bool operator==(const PathKey&) const = default;
};

/// head -> e_1 -> ... -> tail. A one-hop path has no links and a single
/// passage holding both endpoints.
struct Path {
  MentionSpan head;
  std::vector<PathLink> links;
  MentionSpan tail;
  std::vector<int> passage_ids;
  std::size_t candidate_index = 0;

  std::size_t hop_count() const { return passage_ids.size(); }
  PathKey key() const;
  bool operator==(const Path&) const = default;
};

struct ExtractionConfig {
  int max_hops = 2;
  /// Neighbor entities considered per anchor mention.
  int max_neighbors = 32;
  /// Passages considered per entity lookup.
  int max_passages_per_entity = 32;
  int max_paths_per_candidate = 64;

  void validate() const;
};

/// Lazily built map entity_key -> mentions per passage, one per instance.
class MentionIndex {
 public:
  explicit MentionIndex(const QuestionInstance& instance) : instance_(&instance) {}

  /// Mentions of `entity` in every passage, indexed by position in
  /// instance.passages.
  const std::vector<std::vector<MentionSpan>>& lookup(const std::string& entity);
  /// Positions (in instance.passages) of passages mentioning `entity`.
  std::vector<std::size_t> passages_with(const std::string& entity);

 private:
  const QuestionInstance* instance_;
  std::map<std::string, std::vector<std::vector<MentionSpan>>> cache_;
};

/// Entities in the anchor's sentence or the following one, other than the
/// anchor entity itself, deduplicated by key and capped at `max_neighbors`
/// by earliest position.
std::vector<MentionSpan> neighbor_entities(const Passage& passage, const MentionSpan& anchor,
                                           int max_neighbors = 32);

/// Enumerates one-hop paths (head and candidate in one passage) and paths of
/// 2..max_hops hops, where each hop moves from an entity's neighbor in the
/// current passage to another passage mentioning that neighbor. Paths never
/// revisit a passage. Per candidate, paths are ordered by hop count then
/// passage ids and truncated to max_paths_per_candidate.
std::vector<Path> extract_paths(const QuestionInstance& instance, const ExtractionConfig& config);

/// Keeps the first path for each PathKey, preserving order.
std::vector<Path> dedupe_paths(const std::vector<Path>& paths);

void to_json(nlohmann::json& j, const Path& p);
void from_json(const nlohmann::json& j, Path& p);

}  // namespace pathnet
