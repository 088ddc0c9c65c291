#pragma once

#include <cstddef>
#include <string>
#include <unordered_map>
#include <vector>

#include "pathnet/corpus.hpp"
#include "pathnet/text.hpp"

namespace pathnet {

/// Keeps sentences that look like general statements: at least three word
/// tokens, a first word ending in 's' (plural-noun heuristic), no capitalized
/// word after the first, and no dangling non-terminal punctuation at the end.
std::vector<std::string> filter_general_sentences(const std::vector<std::string>& corpus);
bool is_general_sentence(std::string_view sentence);

/// Lowercase content terms of a token list: punctuation and stopwords
/// removed, duplicates dropped, sorted.
std::vector<std::string> content_terms(const std::vector<Token>& tokens);

/// Inverse-document-frequency index over a sentence corpus. Only content
/// terms are indexed; idf(w) = ln(N / df(w)), and ln(N) for unseen terms.
class IdfIndex {
 public:
  explicit IdfIndex(std::vector<std::vector<Token>> sentences);

  std::size_t size() const { return sentences_.size(); }
  double idf(const std::string& term) const;
  std::size_t df(const std::string& term) const;
  /// Sorted, ascending sentence ids containing `term`.
  const std::vector<std::size_t>& postings(const std::string& term) const;
  const std::vector<Token>& sentence(std::size_t id) const { return sentences_.at(id); }
  std::string sentence_text(std::size_t id) const { return join_tokens(sentences_.at(id)); }
  const std::vector<std::string>& vocabulary() const { return terms_; }

  // Term-id level access used by the chain search.
  const std::vector<int>& sentence_terms(std::size_t id) const { return sentence_terms_[id]; }
  double sentence_mass(std::size_t id) const { return sentence_mass_[id]; }
  double term_idf(int term_id) const { return idf_[static_cast<std::size_t>(term_id)]; }
  const std::vector<std::size_t>& term_postings(int term_id) const {
    return postings_[static_cast<std::size_t>(term_id)];
  }
  int term_id(const std::string& term) const;

 private:
  std::vector<std::vector<Token>> sentences_;
  std::vector<std::string> terms_;
  std::unordered_map<std::string, int> term_ids_;
  std::vector<std::vector<std::size_t>> postings_;
  std::vector<double> idf_;
  std::vector<std::vector<int>> sentence_terms_;
  std::vector<double> sentence_mass_;
  double unseen_idf_ = 0.0;
};

/// Throws on an empty corpus.
IdfIndex build_idf_index(std::vector<std::vector<Token>> corpus);
IdfIndex build_idf_index(const std::vector<std::string>& sentences);

/// Sum of idf over shared content terms divided by the smaller of the two
/// idf masses. Returns 0 (with a warning) when that denominator is 0, and 0
/// when either side has no content terms.
double idf_overlap(const std::vector<Token>& x, const std::vector<Token>& y, const IdfIndex& index);
double idf_overlap_terms(const std::vector<std::string>& x, const std::vector<std::string>& y,
                         const IdfIndex& index);

struct SentenceChain {
  std::size_t s1_id = 0;
  std::size_t s2_id = 0;
  double score = 0.0;
  double question_s1 = 0.0;
  double s1_s2 = 0.0;
  double s2_candidate = 0.0;
};

struct RetrievalConfig {
  double threshold = 0.08;
  std::size_t top_k = 100;
  /// Number of first-hop sentences kept per question.
  std::size_t beam = 200;
  /// Apply the threshold to each partial product, not just the final score.
  bool prune_prefix = true;
};

/// Two-hop chains question -> s1 -> s2 -> candidate scored by the product of
/// the three idf overlaps, sorted by descending score with ties broken by
/// ascending (s1, s2). s1 and s2 are distinct sentences.
std::vector<SentenceChain> retrieve_chains(const std::vector<Token>& question,
                                           const std::vector<Token>& candidate,
                                           const IdfIndex& index,
                                           const RetrievalConfig& config = {});

/// Fills an instance without supports with single-sentence passages taken
/// from the retrieved chains of every candidate. When a candidate has no
/// chain, the best single sentences linking question and candidate are used.
void attach_retrieved_passages(QuestionInstance& instance, const IdfIndex& index,
                               const RetrievalConfig& config = {},
                               std::size_t fallback_sentences = 10);

}  // namespace pathnet
