#include "pathnet/paths.hpp"

#include <algorithm>
#include <set>
#include <unordered_set>

#include "pathnet/error.hpp"

namespace pathnet {

using nlohmann::json;

PathKey Path::key() const {
  PathKey k;
  k.head_key = head.entity_key;
  for (const auto& l : links) k.intermediate_keys.push_back(l.source.entity_key);
  k.tail_key = tail.entity_key;
  k.candidate_index = candidate_index;
  k.passage_ids = passage_ids;
  return k;
}

void ExtractionConfig::validate() const {
  if (max_hops < 1 || max_neighbors < 1 || max_passages_per_entity < 1 ||
      max_paths_per_candidate < 1)
    throw Error("config", "extraction limits must all be positive");
}

const std::vector<std::vector<MentionSpan>>& MentionIndex::lookup(const std::string& entity) {
  auto it = cache_.find(entity);
  if (it != cache_.end()) return it->second;
  std::vector<std::vector<MentionSpan>> per_passage;
  per_passage.reserve(instance_->passages.size());
  for (const auto& p : instance_->passages) per_passage.push_back(find_mentions(p, {entity}));
  return cache_.emplace(entity, std::move(per_passage)).first->second;
}

std::vector<std::size_t> MentionIndex::passages_with(const std::string& entity) {
  std::vector<std::size_t> out;
  const auto& per_passage = lookup(entity);
  for (std::size_t i = 0; i < per_passage.size(); ++i) {
    if (!per_passage[i].empty()) out.push_back(i);
  }
  return out;
}

std::vector<MentionSpan> neighbor_entities(const Passage& passage, const MentionSpan& anchor,
                                           int max_neighbors) {
  if (anchor.token_end >= passage.tokens.size())
    throw Error("paths", "anchor span lies outside the passage");
  const std::size_t sentence = passage.sentence_of(anchor.token_start);

  std::vector<MentionSpan> spans = chunk_spans(passage);
  if (!passage.annotated_entities.empty()) {
    auto annotated = find_mentions(passage, passage.annotated_entities);
    spans.insert(spans.end(), annotated.begin(), annotated.end());
    std::stable_sort(spans.begin(), spans.end(), [](const MentionSpan& a, const MentionSpan& b) {
      return a.token_start != b.token_start ? a.token_start < b.token_start
                                            : a.token_end > b.token_end;
    });
  }
  std::vector<MentionSpan> out;
  std::unordered_set<std::string> seen;
  for (auto& s : spans) {
    const std::size_t sent = passage.sentence_of(s.token_start);
    if (sent != sentence && sent != sentence + 1) continue;
    if (s.entity_key == anchor.entity_key) continue;
    if (!seen.insert(s.entity_key).second) continue;
    out.push_back(std::move(s));
    if (static_cast<int>(out.size()) >= max_neighbors) break;
  }
  return out;
}

namespace {

std::string entity_key_of(const std::string& entity) {
  return normalize_key(join_tokens(tokenize(entity)));
}

template <typename T>
std::vector<T> capped(std::vector<T> v, int cap) {
  if (static_cast<int>(v.size()) > cap) v.resize(static_cast<std::size_t>(cap));
  return v;
}

class Extractor {
 public:
  Extractor(const QuestionInstance& instance, const ExtractionConfig& config)
      : inst_(instance), config_(config), mentions_(instance) {}

  std::vector<Path> run() {
    for (const auto& head : inst_.head_entities) {
      if (entity_key_of(head).empty()) continue;
      const auto& head_mentions = mentions_.lookup(head);
      for (std::size_t p : capped(mentions_.passages_with(head), config_.max_passages_per_entity)) {
        Path partial;
        partial.head = head_mentions[p].front();
        partial.passage_ids = {inst_.passages[p].id};
        emit_tails(partial, p);
        if (config_.max_hops > 1) expand(partial, p, head_mentions[p], {p});
      }
    }
    return finish();
  }

 private:
  // Record paths ending in passage position `p` for every candidate tail it mentions.
  void emit_tails(const Path& partial, std::size_t p) {
    for (std::size_t k = 0; k < inst_.candidates.size(); ++k) {
      for (const auto& tail : inst_.candidate_tails[k]) {
        const auto& tail_mentions = mentions_.lookup(tail)[p];
        if (tail_mentions.empty()) continue;
        Path path = partial;
        path.tail = tail_mentions.front();
        path.candidate_index = k;
        if (keys_.insert(path.key()).second) found_.push_back(std::move(path));
      }
    }
  }

  void expand(const Path& partial, std::size_t p, const std::vector<MentionSpan>& anchors,
              std::vector<std::size_t> visited) {
    const Passage& passage = inst_.passages[p];
    std::vector<MentionSpan> neighbors;
    std::unordered_set<std::string> seen;
    for (const auto& anchor : anchors) {
      for (auto& n : neighbor_entities(passage, anchor, config_.max_neighbors)) {
        if (seen.insert(n.entity_key).second) neighbors.push_back(std::move(n));
      }
    }
    std::stable_sort(neighbors.begin(), neighbors.end(),
                     [](const MentionSpan& a, const MentionSpan& b) {
                       return a.token_start < b.token_start;
                     });

    for (const auto& neighbor : neighbors) {
      const auto& per_passage = mentions_.lookup(neighbor.entity_key);
      std::vector<std::size_t> next;
      for (std::size_t q = 0; q < per_passage.size(); ++q) {
        if (!per_passage[q].empty() &&
            std::find(visited.begin(), visited.end(), q) == visited.end())
          next.push_back(q);
      }
      for (std::size_t q : capped(next, config_.max_passages_per_entity)) {
        Path extended = partial;
        extended.links.push_back({neighbor, per_passage[q].front()});
        extended.passage_ids.push_back(inst_.passages[q].id);
        emit_tails(extended, q);
        if (static_cast<int>(extended.hop_count()) < config_.max_hops) {
          auto v = visited;
          v.push_back(q);
          expand(extended, q, per_passage[q], std::move(v));
        }
      }
    }
  }

  std::vector<Path> finish() {
    std::vector<std::vector<Path>> per_candidate(inst_.candidates.size());
    for (auto& path : found_) per_candidate[path.candidate_index].push_back(std::move(path));
    std::vector<Path> out;
    for (auto& paths : per_candidate) {
      std::stable_sort(paths.begin(), paths.end(), [](const Path& a, const Path& b) {
        if (a.hop_count() != b.hop_count()) return a.hop_count() < b.hop_count();
        return a.passage_ids < b.passage_ids;
      });
      for (auto& p : capped(std::move(paths), config_.max_paths_per_candidate))
        out.push_back(std::move(p));
    }
    return out;
  }

  const QuestionInstance& inst_;
  const ExtractionConfig& config_;
  MentionIndex mentions_;
  std::set<PathKey> keys_;
  std::vector<Path> found_;
};

}  // namespace

std::vector<Path> extract_paths(const QuestionInstance& instance, const ExtractionConfig& config) {
  config.validate();
  if (instance.candidate_tails.size() != instance.candidates.size())
    throw Error("paths", "instance '" + instance.id + "' has no tail entities per candidate");
  return Extractor(instance, config).run();
}

std::vector<Path> dedupe_paths(const std::vector<Path>& paths) {
  std::vector<Path> out;
  std::set<PathKey> seen;
  for (const auto& p : paths) {
    if (seen.insert(p.key()).second) out.push_back(p);
  }
  return out;
}

void to_json(json& j, const Path& p) {
  json links = json::array();
  for (const auto& l : p.links) links.push_back({{"source", l.source}, {"target", l.target}});
  j = json{{"head", p.head},
           {"links", links},
           {"tail", p.tail},
           {"passage_ids", p.passage_ids},
           {"candidate_index", p.candidate_index},
           {"hop_count", p.hop_count()}};
}

void from_json(const json& j, Path& p) {
  j.at("head").get_to(p.head);
  p.links.clear();
  for (const auto& l : j.at("links"))
    p.links.push_back({l.at("source").get<MentionSpan>(), l.at("target").get<MentionSpan>()});
  j.at("tail").get_to(p.tail);
  j.at("passage_ids").get_to(p.passage_ids);
  j.at("candidate_index").get_to(p.candidate_index);
}

}  // namespace pathnet
