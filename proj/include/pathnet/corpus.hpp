#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "pathnet/text.hpp"

namespace pathnet {

struct Passage {
  int id = 0;
  std::vector<Token> tokens;
  std::vector<TokenRange> sentences;
  /// Extra entity strings supplied by the dataset; their matches join the
  /// chunker output in candidate_entities.
  std::vector<std::string> annotated_entities;

  /// Index of the sentence containing token `token_index`.
  std::size_t sentence_of(std::size_t token_index) const;
  std::string text() const { return join_tokens(tokens); }

  bool operator==(const Passage&) const = default;
};

Passage make_passage(int id, std::string_view text);
/// Builds a passage from pre-segmented sentences; the given segmentation wins.
Passage make_passage(int id, const std::vector<std::string>& sentences);

/// Inclusive token span [token_start, token_end] inside one passage.
struct MentionSpan {
  int passage_id = 0;
  std::size_t token_start = 0;
  std::size_t token_end = 0;
  std::string surface;
  std::string entity_key;

  bool operator==(const MentionSpan&) const = default;
};

enum class DatasetFormat { wikihop, openbookqa, synthetic };

DatasetFormat parse_dataset_format(std::string_view name);
std::string to_string(DatasetFormat format);

struct QuestionInstance {
  std::string id;
  std::vector<Token> query_tokens;
  std::vector<std::string> head_entities;
  std::vector<std::vector<Token>> candidates;
  /// Entity strings searched for in passages on behalf of each candidate.
  /// WikiHop-style: the candidate itself. OpenBookQA-style: entities chunked
  /// from the answer choice.
  std::vector<std::vector<std::string>> candidate_tails;
  std::vector<Passage> passages;
  std::optional<std::size_t> answer_index;

  std::string candidate_text(std::size_t k) const { return join_tokens(candidates[k]); }

  bool operator==(const QuestionInstance&) const = default;
};

/// All maximal case-insensitive token-sequence matches of each entity
/// string. Overlapping matches of one entity collapse to the longest (the
/// earliest among equals).
std::vector<MentionSpan> find_mentions(const Passage& passage,
                                       const std::vector<std::string>& entity_strings);

/// Every chunk the heuristic chunker proposes, in position order, without
/// deduplication. Chunks are capitalized runs (lowercase connectors allowed
/// between capitalized words) and maximal runs of lowercase content words
/// capped at four tokens, plus the final token of multi-word content runs.
std::vector<MentionSpan> chunk_spans(const Passage& passage);

/// chunk_spans plus annotated entity matches, deduplicated by entity_key
/// (first occurrence kept).
std::vector<MentionSpan> candidate_entities(const Passage& passage);

/// Loads a dataset file (JSON array or JSON lines). Records with fewer than
/// two candidates are skipped with a warning.
std::vector<QuestionInstance> load_dataset(const std::filesystem::path& path,
                                           DatasetFormat format);
std::vector<QuestionInstance> parse_dataset(const std::string& content, DatasetFormat format,
                                            const std::string& source_name = "<memory>");
QuestionInstance parse_record(const nlohmann::json& record, DatasetFormat format);

void to_json(nlohmann::json& j, const Token& t);
void from_json(const nlohmann::json& j, Token& t);
void to_json(nlohmann::json& j, const Passage& p);
void from_json(const nlohmann::json& j, Passage& p);
void to_json(nlohmann::json& j, const MentionSpan& m);
void from_json(const nlohmann::json& j, MentionSpan& m);
void to_json(nlohmann::json& j, const QuestionInstance& q);
void from_json(const nlohmann::json& j, QuestionInstance& q);

}  // namespace pathnet
