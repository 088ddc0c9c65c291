#include "pathnet/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "pathnet/error.hpp"

namespace pathnet {

using nlohmann::json;

namespace {

// Lowercase words allowed inside a capitalized run ("A Woman and a Man").
bool is_connector(const Token& t) {
  static const std::unordered_set<std::string_view> set = {
      "and", "of", "a", "an", "the", "de", "for", "on", "von", "van", "der", "du", "la", "le", "y"};
  return !is_capitalized(t) && set.count(t.lowercase) > 0;
}

bool is_content(const Token& t) {
  return !is_punctuation(t) && !is_capitalized(t) && !is_stopword(t.lowercase);
}

MentionSpan make_span(const Passage& p, std::size_t start, std::size_t end_inclusive) {
  MentionSpan m;
  m.passage_id = p.id;
  m.token_start = start;
  m.token_end = end_inclusive;
  m.surface = join_tokens(p.tokens, {start, end_inclusive + 1});
  m.entity_key = normalize_key(m.surface);
  return m;
}

std::string record_id(const json& record, std::size_t ordinal) {
  if (record.is_object() && record.contains("id")) {
    const auto& id = record["id"];
    if (id.is_string()) return id.get<std::string>();
    if (id.is_number_integer()) return std::to_string(id.get<long long>());
  }
  return "#" + std::to_string(ordinal);
}

std::string require_string(const json& record, const std::string& id, const char* field) {
  if (!record.contains(field)) throw DatasetError(id, field, "missing");
  if (!record[field].is_string()) throw DatasetError(id, field, "expected a string");
  return record[field].get<std::string>();
}

std::vector<Passage> parse_supports(const json& record, const std::string& id) {
  std::vector<Passage> passages;
  if (!record.contains("supports")) return passages;
  const auto& supports = record["supports"];
  if (!supports.is_array()) throw DatasetError(id, "supports", "expected an array");
  for (std::size_t i = 0; i < supports.size(); ++i) {
    const auto& s = supports[i];
    const int pid = static_cast<int>(i);
    if (s.is_string()) {
      passages.push_back(make_passage(pid, s.get<std::string>()));
    } else if (s.is_array() && std::all_of(s.begin(), s.end(), [](const json& x) {
                 return x.is_string();
               })) {
      passages.push_back(make_passage(pid, s.get<std::vector<std::string>>()));
    } else {
      throw DatasetError(id, "supports[" + std::to_string(i) + "]",
                         "expected a string or an array of sentence strings");
    }
  }
  if (record.contains("mentions")) {
    const auto& mentions = record["mentions"];
    if (!mentions.is_array() || mentions.size() != passages.size())
      throw DatasetError(id, "mentions", "expected one array of strings per support");
    for (std::size_t i = 0; i < mentions.size(); ++i) {
      try {
        passages[i].annotated_entities = mentions[i].get<std::vector<std::string>>();
      } catch (const json::exception&) {
        throw DatasetError(id, "mentions[" + std::to_string(i) + "]", "expected strings");
      }
    }
  }
  return passages;
}

std::string token_key(std::string_view text) { return normalize_key(join_tokens(tokenize(text))); }

std::optional<std::size_t> match_candidate(const std::vector<std::vector<Token>>& candidates,
                                           const std::string& answer) {
  const std::string key = token_key(answer);
  for (std::size_t k = 0; k < candidates.size(); ++k) {
    if (normalize_key(join_tokens(candidates[k])) == key) return k;
  }
  return std::nullopt;
}

std::optional<QuestionInstance> parse_wikihop(const json& record, const std::string& id) {
  QuestionInstance q;
  q.id = id;
  if (!record.contains("query")) throw DatasetError(id, "query", "missing");
  const auto& query = record["query"];
  std::string relation;
  std::string head;
  if (query.is_string()) {
    const auto text = query.get<std::string>();
    const auto space = text.find(' ');
    if (space == std::string::npos) throw DatasetError(id, "query", "expected 'relation head'");
    relation = text.substr(0, space);
    head = text.substr(space + 1);
  } else if (query.is_object()) {
    relation = require_string(query, id, "relation");
    head = require_string(query, id, "head");
  } else {
    throw DatasetError(id, "query", "expected a string or {relation, head}");
  }
  head = normalize_key(head);
  if (head.empty()) throw DatasetError(id, "query", "empty head entity");
  std::replace(relation.begin(), relation.end(), '_', ' ');
  q.query_tokens = tokenize(relation + " " + head);
  q.head_entities = {head};

  if (!record.contains("candidates") || !record["candidates"].is_array())
    throw DatasetError(id, "candidates", "expected an array of strings");
  for (const auto& c : record["candidates"]) {
    if (!c.is_string()) throw DatasetError(id, "candidates", "expected an array of strings");
    auto tokens = tokenize(c.get<std::string>());
    if (tokens.empty()) throw DatasetError(id, "candidates", "empty candidate string");
    q.candidate_tails.push_back({normalize_key(c.get<std::string>())});
    q.candidates.push_back(std::move(tokens));
  }
  if (q.candidates.size() < 2) {
    warn("skipping record '" + id + "': fewer than two candidates");
    return std::nullopt;
  }
  q.passages = parse_supports(record, id);
  if (record.contains("answer") && !record["answer"].is_null()) {
    if (!record["answer"].is_string()) throw DatasetError(id, "answer", "expected a string");
    q.answer_index = match_candidate(q.candidates, record["answer"].get<std::string>());
    if (!q.answer_index) throw DatasetError(id, "answer", "answer is not among the candidates");
  }
  return q;
}

std::vector<std::string> chunk_keys(std::string_view text) {
  const Passage p = make_passage(-1, text);
  std::vector<std::string> keys;
  for (const auto& m : candidate_entities(p)) keys.push_back(m.entity_key);
  return keys;
}

std::optional<QuestionInstance> parse_openbookqa(const json& record, const std::string& id) {
  QuestionInstance q;
  q.id = id;
  if (!record.contains("question")) throw DatasetError(id, "question", "missing");
  const json* choices = record.contains("choices") ? &record["choices"] : nullptr;
  std::string question;
  if (record["question"].is_string()) {
    question = record["question"].get<std::string>();
  } else if (record["question"].is_object()) {
    question = require_string(record["question"], id, "stem");
    if (!choices && record["question"].contains("choices")) choices = &record["question"]["choices"];
  } else {
    throw DatasetError(id, "question", "expected a string");
  }
  q.query_tokens = tokenize(question);
  if (q.query_tokens.empty()) throw DatasetError(id, "question", "empty question");
  q.head_entities = chunk_keys(question);

  if (!choices || !choices->is_array()) throw DatasetError(id, "choices", "expected an array");
  std::vector<std::string> labels;
  for (const auto& c : *choices) {
    std::string text;
    if (c.is_string()) {
      text = c.get<std::string>();
    } else if (c.is_object() && c.contains("text") && c["text"].is_string()) {
      text = c["text"].get<std::string>();
      if (c.contains("label") && c["label"].is_string()) labels.push_back(c["label"]);
    } else {
      throw DatasetError(id, "choices", "expected strings or {label, text} objects");
    }
    auto tokens = tokenize(text);
    if (tokens.empty()) throw DatasetError(id, "choices", "empty choice");
    auto tails = chunk_keys(text);
    if (tails.empty()) tails.push_back(normalize_key(join_tokens(tokens)));
    q.candidate_tails.push_back(std::move(tails));
    q.candidates.push_back(std::move(tokens));
  }
  if (q.candidates.size() < 2) {
    warn("skipping record '" + id + "': fewer than two choices");
    return std::nullopt;
  }
  q.passages = parse_supports(record, id);

  const char* key_field = record.contains("answer_key") ? "answer_key"
                          : record.contains("answerKey") ? "answerKey"
                                                         : nullptr;
  if (key_field && !record[key_field].is_null()) {
    const auto& key = record[key_field];
    std::optional<std::size_t> index;
    if (key.is_number_integer()) {
      index = key.get<std::size_t>();
    } else if (key.is_string()) {
      const auto s = key.get<std::string>();
      auto it = std::find(labels.begin(), labels.end(), s);
      if (it != labels.end()) {
        index = static_cast<std::size_t>(it - labels.begin());
      } else if (s.size() == 1 && std::isupper(static_cast<unsigned char>(s[0]))) {
        index = static_cast<std::size_t>(s[0] - 'A');
      } else {
        index = match_candidate(q.candidates, s);
      }
    }
    if (!index || *index >= q.candidates.size())
      throw DatasetError(id, key_field, "answer key does not name a choice");
    q.answer_index = index;
  }
  return q;
}

}  // namespace

std::size_t Passage::sentence_of(std::size_t token_index) const {
  auto it = std::upper_bound(sentences.begin(), sentences.end(), token_index,
                             [](std::size_t t, const TokenRange& r) { return t < r.end; });
  return static_cast<std::size_t>(it - sentences.begin());
}

Passage make_passage(int id, std::string_view text) {
  Passage p;
  p.id = id;
  p.tokens = tokenize(text);
  p.sentences = segment_sentences(p.tokens);
  return p;
}

Passage make_passage(int id, const std::vector<std::string>& sentences) {
  Passage p;
  p.id = id;
  for (const auto& s : sentences) {
    auto tokens = tokenize(s);
    if (tokens.empty()) continue;
    const std::size_t begin = p.tokens.size();
    // Offsets stay relative to the sentence they came from.
    for (auto& t : tokens) p.tokens.push_back(std::move(t));
    p.sentences.push_back({begin, p.tokens.size()});
  }
  return p;
}

DatasetFormat parse_dataset_format(std::string_view name) {
  if (name == "wikihop") return DatasetFormat::wikihop;
  if (name == "openbookqa" || name == "obqa") return DatasetFormat::openbookqa;
  if (name == "synthetic") return DatasetFormat::synthetic;
  throw Error("usage", "unknown dataset format '" + std::string(name) + "'");
}

std::string to_string(DatasetFormat format) {
  switch (format) {
    case DatasetFormat::wikihop: return "wikihop";
    case DatasetFormat::openbookqa: return "openbookqa";
    case DatasetFormat::synthetic: return "synthetic";
  }
  return "wikihop";
}

std::vector<MentionSpan> find_mentions(const Passage& passage,
                                       const std::vector<std::string>& entity_strings) {
  std::vector<MentionSpan> out;
  const auto& toks = passage.tokens;
  for (const auto& entity : entity_strings) {
    const auto pattern = tokenize(entity);
    if (pattern.empty() || pattern.size() > toks.size()) continue;
    std::size_t i = 0;
    while (i + pattern.size() <= toks.size()) {
      bool hit = true;
      for (std::size_t j = 0; j < pattern.size(); ++j) {
        if (toks[i + j].lowercase != pattern[j].lowercase) {
          hit = false;
          break;
        }
      }
      if (hit) {
        out.push_back(make_span(passage, i, i + pattern.size() - 1));
        i += pattern.size();  // skip overlapping matches of the same entity
      } else {
        ++i;
      }
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const MentionSpan& a, const MentionSpan& b) {
    return a.token_start != b.token_start ? a.token_start < b.token_start
                                          : a.token_end > b.token_end;
  });
  return out;
}

std::vector<MentionSpan> chunk_spans(const Passage& passage) {
  std::vector<MentionSpan> out;
  const auto& toks = passage.tokens;
  for (const auto& sentence : passage.sentences) {
    std::size_t first_word = sentence.begin;
    while (first_word < sentence.end && is_punctuation(toks[first_word])) ++first_word;

    // Capitalized runs.
    std::vector<bool> in_caps(sentence.size(), false);
    std::size_t i = sentence.begin;
    while (i < sentence.end) {
      if (!is_capitalized(toks[i]) || is_punctuation(toks[i])) {
        ++i;
        continue;
      }
      std::size_t end = i + 1;  // exclusive
      while (end < sentence.end) {
        if (is_capitalized(toks[end]) && !is_punctuation(toks[end])) {
          ++end;
          continue;
        }
        std::size_t j = end;
        while (j < sentence.end && j - end < 2 && is_connector(toks[j])) ++j;
        if (j > end && j < sentence.end && is_capitalized(toks[j]) && !is_punctuation(toks[j])) {
          end = j + 1;
          continue;
        }
        break;
      }
      std::size_t begin = i;
      if (begin == first_word) {
        while (begin < end && is_stopword(toks[begin].lowercase)) ++begin;
      }
      if (begin < end) {
        out.push_back(make_span(passage, begin, end - 1));
        for (std::size_t k = begin; k < end; ++k) in_caps[k - sentence.begin] = true;
      }
      i = end;
    }

    // Content-word runs.
    i = sentence.begin;
    while (i < sentence.end) {
      if (in_caps[i - sentence.begin] || !is_content(toks[i])) {
        ++i;
        continue;
      }
      std::size_t end = i;
      while (end < sentence.end && !in_caps[end - sentence.begin] && is_content(toks[end])) ++end;
      const std::size_t begin = end - i > 4 ? end - 4 : i;
      out.push_back(make_span(passage, begin, end - 1));
      if (end - begin > 1) out.push_back(make_span(passage, end - 1, end - 1));
      i = end;
    }
  }
  std::stable_sort(out.begin(), out.end(), [](const MentionSpan& a, const MentionSpan& b) {
    return a.token_start != b.token_start ? a.token_start < b.token_start
                                          : a.token_end > b.token_end;
  });
  return out;
}

std::vector<MentionSpan> candidate_entities(const Passage& passage) {
  auto spans = chunk_spans(passage);
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
    if (seen.insert(s.entity_key).second) out.push_back(std::move(s));
  }
  return out;
}

QuestionInstance parse_record(const json& record, DatasetFormat format) {
  const std::string id = record_id(record, 0);
  if (!record.is_object()) throw DatasetError(id, "<record>", "expected a JSON object");
  auto q = format == DatasetFormat::openbookqa ? parse_openbookqa(record, id)
                                               : parse_wikihop(record, id);
  if (!q) throw DatasetError(id, "candidates", "fewer than two candidates");
  return std::move(*q);
}

std::vector<QuestionInstance> parse_dataset(const std::string& content, DatasetFormat format,
                                            const std::string& source_name) {
  std::vector<json> records;
  const auto first = content.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  if (content[first] == '[') {
    try {
      json arr = json::parse(content);
      for (auto& r : arr) records.push_back(std::move(r));
    } catch (const json::parse_error& e) {
      throw FormatError(source_name, 1, e.what());
    }
  } else {
    std::istringstream in(content);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      try {
        records.push_back(json::parse(line));
      } catch (const json::parse_error& e) {
        throw FormatError(source_name, line_no, e.what());
      }
    }
  }

  std::vector<QuestionInstance> out;
  out.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    const std::string id = record_id(r, i);
    if (!r.is_object()) throw DatasetError(id, "<record>", "expected a JSON object");
    auto q = format == DatasetFormat::openbookqa ? parse_openbookqa(r, id) : parse_wikihop(r, id);
    if (q) out.push_back(std::move(*q));
  }
  return out;
}

std::vector<QuestionInstance> load_dataset(const std::filesystem::path& path,
                                           DatasetFormat format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("io", "cannot open dataset '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_dataset(buf.str(), format, path.string());
}

void to_json(json& j, const Token& t) {
  j = json{{"text", t.text}, {"lowercase", t.lowercase}, {"char_offset", t.char_offset}};
}
void from_json(const json& j, Token& t) {
  j.at("text").get_to(t.text);
  j.at("lowercase").get_to(t.lowercase);
  j.at("char_offset").get_to(t.char_offset);
}

void to_json(json& j, const Passage& p) {
  json sentences = json::array();
  for (const auto& r : p.sentences) sentences.push_back({r.begin, r.end});
  j = json{{"id", p.id},
           {"tokens", p.tokens},
           {"sentences", sentences},
           {"annotated_entities", p.annotated_entities}};
}
void from_json(const json& j, Passage& p) {
  j.at("id").get_to(p.id);
  j.at("tokens").get_to(p.tokens);
  p.sentences.clear();
  for (const auto& r : j.at("sentences")) p.sentences.push_back({r.at(0), r.at(1)});
  p.annotated_entities = j.value("annotated_entities", std::vector<std::string>{});
}

void to_json(json& j, const MentionSpan& m) {
  j = json{{"passage_id", m.passage_id},
           {"token_start", m.token_start},
           {"token_end", m.token_end},
           {"surface", m.surface},
           {"entity_key", m.entity_key}};
}
void from_json(const json& j, MentionSpan& m) {
  j.at("passage_id").get_to(m.passage_id);
  j.at("token_start").get_to(m.token_start);
  j.at("token_end").get_to(m.token_end);
  j.at("surface").get_to(m.surface);
  j.at("entity_key").get_to(m.entity_key);
}

void to_json(json& j, const QuestionInstance& q) {
  j = json{{"id", q.id},
           {"query_tokens", q.query_tokens},
           {"head_entities", q.head_entities},
           {"candidates", q.candidates},
           {"candidate_tails", q.candidate_tails},
           {"passages", q.passages},
           {"answer_index", q.answer_index ? json(*q.answer_index) : json(nullptr)}};
}
void from_json(const json& j, QuestionInstance& q) {
  j.at("id").get_to(q.id);
  j.at("query_tokens").get_to(q.query_tokens);
  j.at("head_entities").get_to(q.head_entities);
  j.at("candidates").get_to(q.candidates);
  j.at("candidate_tails").get_to(q.candidate_tails);
  j.at("passages").get_to(q.passages);
  const auto& a = j.at("answer_index");
  q.answer_index = a.is_null() ? std::nullopt : std::optional<std::size_t>(a.get<std::size_t>());
}

}  // namespace pathnet
