#include "pathnet/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_set>

#include "pathnet/error.hpp"

namespace pathnet {

namespace {

// First words ending in 's' that are not plural nouns.
bool is_non_noun_s(std::string_view w) {
  static const std::unordered_set<std::string_view> set = {
      "this",  "its",    "his",     "hers",    "was",     "has",     "is",       "does",
      "yes",   "thus",   "always",  "perhaps", "sometimes", "unless", "besides", "towards",
      "as",    "us",     "whereas", "various", "less",    "across",  "afterwards", "nevertheless",
      "ours",  "yours",  "theirs",  "goes",    "gets",    "makes",   "takes",    "uses"};
  return set.count(w) > 0;
}

double mass(const std::vector<std::string>& terms, const IdfIndex& index) {
  double m = 0.0;
  for (const auto& t : terms) m += index.idf(t);
  return m;
}

bool less_chain(const SentenceChain& a, const SentenceChain& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.s1_id != b.s1_id) return a.s1_id < b.s1_id;
  return a.s2_id < b.s2_id;
}

}  // namespace

bool is_general_sentence(std::string_view sentence) {
  const auto tokens = tokenize(sentence);
  std::vector<const Token*> words;
  for (const auto& t : tokens) {
    if (!is_punctuation(t)) words.push_back(&t);
  }
  if (words.size() < 3) return false;
  const Token& first = *words.front();
  if (&first != &tokens.front()) return false;  // leading punctuation
  const std::string& w = first.lowercase;
  const bool alpha = std::all_of(w.begin(), w.end(), [](char c) {
    return std::isalpha(static_cast<unsigned char>(c)) != 0;
  });
  if (!alpha || w.size() < 3 || w.back() != 's' || w.ends_with("ss")) return false;
  if (is_stopword(w) || is_non_noun_s(w)) return false;
  for (std::size_t i = 1; i < words.size(); ++i) {
    if (is_capitalized(*words[i])) return false;
  }
  const std::string& last = tokens.back().text;
  if (last == "," || last == ":" || last == ";" || last == "-" || last == "(") return false;
  return true;
}

std::vector<std::string> filter_general_sentences(const std::vector<std::string>& corpus) {
  std::vector<std::string> out;
  for (const auto& s : corpus) {
    if (is_general_sentence(s)) out.push_back(s);
  }
  return out;
}

std::vector<std::string> content_terms(const std::vector<Token>& tokens) {
  std::vector<std::string> out;
  for (const auto& t : tokens) {
    if (!is_punctuation(t) && !is_stopword(t.lowercase)) out.push_back(t.lowercase);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

IdfIndex::IdfIndex(std::vector<std::vector<Token>> sentences) : sentences_(std::move(sentences)) {
  if (sentences_.empty()) throw Error("retrieval", "cannot build an idf index over an empty corpus");
  const std::size_t n = sentences_.size();
  sentence_terms_.resize(n);
  for (std::size_t s = 0; s < n; ++s) {
    for (const auto& term : content_terms(sentences_[s])) {
      auto [it, inserted] = term_ids_.try_emplace(term, static_cast<int>(terms_.size()));
      if (inserted) {
        terms_.push_back(term);
        postings_.emplace_back();
      }
      postings_[static_cast<std::size_t>(it->second)].push_back(s);
      sentence_terms_[s].push_back(it->second);
    }
  }
  const double big_n = static_cast<double>(n);
  unseen_idf_ = std::log(big_n);
  idf_.resize(terms_.size());
  for (std::size_t t = 0; t < terms_.size(); ++t) {
    idf_[t] = std::log(big_n / static_cast<double>(postings_[t].size()));
  }
  sentence_mass_.resize(n);
  for (std::size_t s = 0; s < n; ++s) {
    std::sort(sentence_terms_[s].begin(), sentence_terms_[s].end());
    double m = 0.0;
    for (int t : sentence_terms_[s]) m += idf_[static_cast<std::size_t>(t)];
    sentence_mass_[s] = m;
  }
}

int IdfIndex::term_id(const std::string& term) const {
  auto it = term_ids_.find(term);
  return it == term_ids_.end() ? -1 : it->second;
}

double IdfIndex::idf(const std::string& term) const {
  const int id = term_id(term);
  return id < 0 ? unseen_idf_ : idf_[static_cast<std::size_t>(id)];
}

std::size_t IdfIndex::df(const std::string& term) const {
  const int id = term_id(term);
  return id < 0 ? 0 : postings_[static_cast<std::size_t>(id)].size();
}

const std::vector<std::size_t>& IdfIndex::postings(const std::string& term) const {
  static const std::vector<std::size_t> empty;
  const int id = term_id(term);
  return id < 0 ? empty : postings_[static_cast<std::size_t>(id)];
}

IdfIndex build_idf_index(std::vector<std::vector<Token>> corpus) { return IdfIndex(std::move(corpus)); }

IdfIndex build_idf_index(const std::vector<std::string>& sentences) {
  std::vector<std::vector<Token>> corpus;
  corpus.reserve(sentences.size());
  for (const auto& s : sentences) corpus.push_back(tokenize(s));
  return IdfIndex(std::move(corpus));
}

double idf_overlap_terms(const std::vector<std::string>& x, const std::vector<std::string>& y,
                         const IdfIndex& index) {
  if (x.empty() || y.empty()) return 0.0;
  const double denom = std::min(mass(x, index), mass(y, index));
  if (denom <= 0.0) {
    warn("idf_overlap: zero idf mass, returning 0");
    return 0.0;
  }
  const std::set<std::string> ys(y.begin(), y.end());
  double num = 0.0;
  for (const auto& w : std::set<std::string>(x.begin(), x.end())) {
    if (ys.count(w)) num += index.idf(w);
  }
  return num / denom;
}

double idf_overlap(const std::vector<Token>& x, const std::vector<Token>& y, const IdfIndex& index) {
  return idf_overlap_terms(content_terms(x), content_terms(y), index);
}

namespace {

// Query-side term bag: ids plus per-term idf, including terms unseen in the
// corpus (they add mass but can never be shared with a corpus sentence).
struct TermBag {
  std::vector<int> ids;  // sorted, seen terms only
  double mass = 0.0;
};

TermBag make_bag(const std::vector<Token>& tokens, const IdfIndex& index) {
  TermBag bag;
  for (const auto& t : content_terms(tokens)) {
    bag.mass += index.idf(t);
    const int id = index.term_id(t);
    if (id >= 0) bag.ids.push_back(id);
  }
  std::sort(bag.ids.begin(), bag.ids.end());
  return bag;
}

double shared_mass(const std::vector<int>& a, const std::vector<int>& b, const IdfIndex& index) {
  double s = 0.0;
  auto i = a.begin();
  auto j = b.begin();
  while (i != a.end() && j != b.end()) {
    if (*i < *j) {
      ++i;
    } else if (*j < *i) {
      ++j;
    } else {
      s += index.term_idf(*i);
      ++i;
      ++j;
    }
  }
  return s;
}

double overlap(const std::vector<int>& a, double mass_a, const std::vector<int>& b, double mass_b,
               const IdfIndex& index) {
  const double denom = std::min(mass_a, mass_b);
  if (denom <= 0.0) return 0.0;
  return shared_mass(a, b, index) / denom;
}

}  // namespace

std::vector<SentenceChain> retrieve_chains(const std::vector<Token>& question,
                                           const std::vector<Token>& candidate,
                                           const IdfIndex& index, const RetrievalConfig& config) {
  if (!(config.threshold > 0.0)) throw Error("retrieval", "threshold must be positive");
  const TermBag q = make_bag(question, index);
  const TermBag c = make_bag(candidate, index);
  if (q.ids.empty() || c.ids.empty()) return {};
  const std::size_t n = index.size();

  // Sentences overlapping the candidate, with their s2 -> candidate score.
  std::vector<double> to_candidate(n, -1.0);
  for (int t : c.ids) {
    for (std::size_t s : index.term_postings(t)) {
      if (to_candidate[s] < 0.0)
        to_candidate[s] = overlap(index.sentence_terms(s), index.sentence_mass(s), c.ids, c.mass,
                                  index);
    }
  }

  // First hop.
  std::vector<std::pair<double, std::size_t>> first;
  {
    std::vector<char> seen(n, 0);
    for (int t : q.ids) {
      for (std::size_t s : index.term_postings(t)) {
        if (seen[s]) continue;
        seen[s] = 1;
        const double score = overlap(q.ids, q.mass, index.sentence_terms(s), index.sentence_mass(s),
                                     index);
        if (config.prune_prefix && score < config.threshold) continue;
        if (score > 0.0) first.emplace_back(score, s);
      }
    }
  }
  std::sort(first.begin(), first.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  if (first.size() > config.beam) first.resize(config.beam);

  std::vector<SentenceChain> chains;
  std::vector<std::size_t> stamp(n, static_cast<std::size_t>(-1));
  for (const auto& [q_s1, s1] : first) {
    const auto& s1_terms = index.sentence_terms(s1);
    for (int t : s1_terms) {
      for (std::size_t s2 : index.term_postings(t)) {
        if (s2 == s1 || stamp[s2] == s1 || to_candidate[s2] <= 0.0) continue;
        stamp[s2] = s1;
        const double s1_s2 = overlap(s1_terms, index.sentence_mass(s1), index.sentence_terms(s2),
                                     index.sentence_mass(s2), index);
        const double prefix = q_s1 * s1_s2;
        if (config.prune_prefix && prefix < config.threshold) continue;
        const double score = prefix * to_candidate[s2];
        if (score < config.threshold) continue;
        chains.push_back({s1, s2, score, q_s1, s1_s2, to_candidate[s2]});
      }
    }
  }
  std::sort(chains.begin(), chains.end(), less_chain);
  if (chains.size() > config.top_k) chains.resize(config.top_k);
  return chains;
}

void attach_retrieved_passages(QuestionInstance& instance, const IdfIndex& index,
                               const RetrievalConfig& config, std::size_t fallback_sentences) {
  std::vector<std::size_t> chosen;
  std::unordered_set<std::size_t> seen;
  auto take = [&](std::size_t s) {
    if (seen.insert(s).second) chosen.push_back(s);
  };
  const TermBag q = make_bag(instance.query_tokens, index);
  for (const auto& cand : instance.candidates) {
    const auto chains = retrieve_chains(instance.query_tokens, cand, index, config);
    for (const auto& ch : chains) {
      take(ch.s1_id);
      take(ch.s2_id);
    }
    if (!chains.empty()) continue;
    const TermBag c = make_bag(cand, index);
    std::vector<std::pair<double, std::size_t>> single;
    for (std::size_t s = 0; s < index.size(); ++s) {
      const double score =
          overlap(q.ids, q.mass, index.sentence_terms(s), index.sentence_mass(s), index) *
          overlap(index.sentence_terms(s), index.sentence_mass(s), c.ids, c.mass, index);
      if (score >= config.threshold) single.emplace_back(score, s);
    }
    std::sort(single.begin(), single.end(), [](const auto& a, const auto& b) {
      return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    for (std::size_t i = 0; i < std::min(fallback_sentences, single.size()); ++i)
      take(single[i].second);
  }
  instance.passages.clear();
  for (std::size_t i = 0; i < chosen.size(); ++i) {
    instance.passages.push_back(make_passage(static_cast<int>(i), index.sentence_text(chosen[i])));
  }
}

}  // namespace pathnet
