#pragma once

// Independent reference implementations used by the unit and acceptance
// tests. They favor obviousness over speed: exhaustive enumeration and
// plain loops, sharing only the tokenizer, stoplist and mention matcher with
// the library.

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "pathnet/autograd.hpp"
#include "pathnet/corpus.hpp"
#include "pathnet/paths.hpp"
#include "pathnet/retrieval.hpp"
#include "pathnet/text.hpp"

namespace oracle {

using pathnet::MentionSpan;
using pathnet::Passage;
using pathnet::PathKey;
using pathnet::QuestionInstance;

// ---------------------------------------------------------------- paths

// Every entity a passage offers as an intermediate: chunker spans plus
// annotated entity matches.
inline std::vector<MentionSpan> all_spans(const Passage& p) {
  auto spans = pathnet::chunk_spans(p);
  if (!p.annotated_entities.empty()) {
    auto extra = pathnet::find_mentions(p, p.annotated_entities);
    spans.insert(spans.end(), extra.begin(), extra.end());
  }
  return spans;
}

inline std::size_t sentence_index(const Passage& p, std::size_t token) {
  for (std::size_t s = 0; s < p.sentences.size(); ++s)
    if (token >= p.sentences[s].begin && token < p.sentences[s].end) return s;
  return p.sentences.size();
}

// Keys of entities that can follow `anchor_key` in passage `p`: any span in
// the sentence of some anchor mention or the sentence after it.
inline std::set<std::string> neighbor_keys(const Passage& p, const std::string& anchor_key) {
  std::set<std::size_t> anchor_sentences;
  for (const auto& m : pathnet::find_mentions(p, {anchor_key}))
    anchor_sentences.insert(sentence_index(p, m.token_start));
  std::set<std::string> keys;
  for (const auto& s : all_spans(p)) {
    const std::size_t sent = sentence_index(p, s.token_start);
    const bool near = anchor_sentences.count(sent) ||
                      (sent > 0 && anchor_sentences.count(sent - 1));
    if (near && s.entity_key != anchor_key) keys.insert(s.entity_key);
  }
  return keys;
}

inline bool mentions(const Passage& p, const std::string& entity) {
  return !pathnet::find_mentions(p, {entity}).empty();
}

inline std::string first_key(const Passage& p, const std::string& entity) {
  return pathnet::find_mentions(p, {entity}).front().entity_key;
}

// All path keys with up to `max_hops` passages, by trying every sequence of
// distinct passages and every choice of intermediate entity.
inline std::set<PathKey> brute_force_paths(const QuestionInstance& inst, int max_hops) {
  std::set<PathKey> out;
  const std::size_t n = inst.passages.size();
  std::vector<std::size_t> seq;
  std::vector<std::string> inter;

  auto close = [&](const std::string& head_entity) {
    const Passage& last = inst.passages[seq.back()];
    for (std::size_t k = 0; k < inst.candidates.size(); ++k) {
      for (const auto& tail : inst.candidate_tails[k]) {
        if (!mentions(last, tail)) continue;
        PathKey key;
        key.head_key = first_key(inst.passages[seq.front()], head_entity);
        key.intermediate_keys = inter;
        key.tail_key = first_key(last, tail);
        key.candidate_index = k;
        for (std::size_t s : seq) key.passage_ids.push_back(inst.passages[s].id);
        out.insert(key);
      }
    }
  };

  // Extends a sequence whose last passage was entered via `anchor`.
  auto grow = [&](auto&& self, const std::string& head_entity, const std::string& anchor) -> void {
    close(head_entity);
    if (static_cast<int>(seq.size()) >= max_hops) return;
    for (const auto& e : neighbor_keys(inst.passages[seq.back()], anchor)) {
      for (std::size_t q = 0; q < n; ++q) {
        if (std::find(seq.begin(), seq.end(), q) != seq.end()) continue;
        if (!mentions(inst.passages[q], e)) continue;
        seq.push_back(q);
        inter.push_back(e);
        self(self, head_entity, e);
        seq.pop_back();
        inter.pop_back();
      }
    }
  };

  for (const auto& head : inst.head_entities) {
    for (std::size_t p = 0; p < n; ++p) {
      if (!mentions(inst.passages[p], head)) continue;
      seq = {p};
      inter.clear();
      grow(grow, head, first_key(inst.passages[p], head));
    }
  }
  return out;
}

inline std::set<PathKey> keys_of(const std::vector<pathnet::Path>& paths) {
  std::set<PathKey> out;
  for (const auto& p : paths) out.insert(p.key());
  return out;
}

// Random small instance: a handful of capitalized entity names dropped into
// short sentences so that entities recur across passages.
inline QuestionInstance random_instance(std::mt19937_64& rng, int max_passages = 8,
                                        int max_tokens = 40) {
  static const char* names[] = {"Ada", "Bo Lin", "Cato", "Dax", "Eve Moss", "Fay", "Gus", "Hal Ott"};
  static const char* verbs[] = {"met", "joined", "left", "saw", "praised", "sued"};
  static const char* nouns[] = {"river", "album", "label", "city", "club"};
  auto pick = [&](std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); };

  QuestionInstance inst;
  inst.id = "rand";
  const std::size_t head = pick(std::size(names));
  inst.query_tokens = pathnet::tokenize(std::string("rel ") + names[head]);
  inst.head_entities = {names[head]};
  std::set<std::size_t> cands;
  const std::size_t num_cands = 2 + pick(3);
  while (cands.size() < num_cands) cands.insert(pick(std::size(names)));
  for (std::size_t c : cands) {
    inst.candidates.push_back(pathnet::tokenize(names[c]));
    inst.candidate_tails.push_back({names[c]});
  }
  inst.answer_index = 0;
  const int passages = 1 + static_cast<int>(pick(static_cast<std::size_t>(max_passages)));
  for (int p = 0; p < passages; ++p) {
    std::string text;
    int tokens = 0;
    for (;;) {
      std::string sentence;
      switch (pick(3)) {
        case 0:
          sentence = std::string(names[pick(std::size(names))]) + " " + verbs[pick(std::size(verbs))] +
                     " " + names[pick(std::size(names))] + ".";
          break;
        case 1:
          sentence = std::string("The ") + nouns[pick(std::size(nouns))] + " " +
                     verbs[pick(std::size(verbs))] + " " + names[pick(std::size(names))] + ".";
          break;
        default:
          sentence = std::string(names[pick(std::size(names))]) + " and " +
                     names[pick(std::size(names))] + " " + verbs[pick(std::size(verbs))] + " the " +
                     nouns[pick(std::size(nouns))] + ".";
      }
      const int len = static_cast<int>(pathnet::tokenize(sentence).size());
      if (tokens + len > max_tokens) break;
      text += (text.empty() ? "" : " ") + sentence;
      tokens += len;
      if (pick(3) == 0) break;
    }
    inst.passages.push_back(pathnet::make_passage(p, text));
  }
  return inst;
}

// ------------------------------------------------------------ retrieval

struct Chain {
  std::size_t s1, s2;
  double score;
};

// idf computed from scratch: ln(N / df), ln(N) for unseen terms.
class IdfOracle {
 public:
  explicit IdfOracle(const std::vector<std::string>& sentences) {
    for (const auto& s : sentences) terms_.push_back(pathnet::content_terms(pathnet::tokenize(s)));
    for (const auto& ts : terms_)
      for (const auto& t : ts) ++df_[t];
  }
  double idf(const std::string& t) const {
    const double n = static_cast<double>(terms_.size());
    auto it = df_.find(t);
    return it == df_.end() ? std::log(n) : std::log(n / static_cast<double>(it->second));
  }
  double overlap(const std::vector<std::string>& x, const std::vector<std::string>& y) const {
    double mx = 0, my = 0, shared = 0;
    for (const auto& t : x) mx += idf(t);
    for (const auto& t : y) my += idf(t);
    for (const auto& t : x)
      if (std::find(y.begin(), y.end(), t) != y.end()) shared += idf(t);
    const double d = std::min(mx, my);
    return d > 0 ? shared / d : 0.0;
  }
  const std::vector<std::string>& terms(std::size_t s) const { return terms_[s]; }
  std::size_t size() const { return terms_.size(); }

 private:
  std::vector<std::vector<std::string>> terms_;
  std::map<std::string, std::size_t> df_;
};

inline std::vector<Chain> brute_force_chains(const IdfOracle& idf, const std::string& question,
                                             const std::string& candidate, double threshold,
                                             std::size_t top_k) {
  const auto q = pathnet::content_terms(pathnet::tokenize(question));
  const auto c = pathnet::content_terms(pathnet::tokenize(candidate));
  std::vector<Chain> out;
  for (std::size_t a = 0; a < idf.size(); ++a) {
    for (std::size_t b = 0; b < idf.size(); ++b) {
      if (a == b) continue;
      const double s = idf.overlap(q, idf.terms(a)) * idf.overlap(idf.terms(a), idf.terms(b)) *
                       idf.overlap(idf.terms(b), c);
      if (s > 0 && s >= threshold) out.push_back({a, b, s});
    }
  }
  std::sort(out.begin(), out.end(), [](const Chain& x, const Chain& y) {
    if (x.score != y.score) return x.score > y.score;
    return std::make_pair(x.s1, x.s2) < std::make_pair(y.s1, y.s2);
  });
  if (out.size() > top_k) out.resize(top_k);
  return out;
}

// Same chains and scores (within `tol`), in non-increasing score order.
// Chains whose scores differ by rounding noise alone may swap places, and at
// the top_k cut only the score of the last kept chain has to agree.
template <class Got>
bool same_chains(const std::vector<Got>& got, const std::vector<Chain>& want, double tol = 1e-9) {
  if (got.size() != want.size()) return false;
  if (got.empty()) return true;
  const double last = want.back().score;
  std::set<std::pair<std::size_t, std::size_t>> a, b;
  for (std::size_t i = 0; i < got.size(); ++i) {
    if (std::abs(got[i].score - want[i].score) > tol) return false;
    if (i > 0 && got[i].score > got[i - 1].score + 1e-12) return false;
    if (want[i].score > last + 1e-12) {
      a.insert({got[i].s1_id, got[i].s2_id});
      b.insert({want[i].s1, want[i].s2});
    }
  }
  return a == b;
}

// Random toy corpus over a small word pool so sentences overlap often.
inline std::vector<std::string> random_corpus(std::mt19937_64& rng, std::size_t n) {
  static const char* words[] = {"plants", "light", "energy", "water", "roots", "leaves",
                                "heat",   "sun",   "soil",   "grow",  "need",  "absorb",
                                "animals", "food", "oxygen", "rain",  "seeds", "stems"};
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) {
    std::string s;
    const std::size_t len = 3 + rng() % 4;
    for (std::size_t k = 0; k < len; ++k) s += std::string(k ? " " : "") + words[rng() % std::size(words)];
    out.push_back(s + ".");
  }
  return out;
}

// ------------------------------------------------------ dense math

using Vec = std::vector<double>;
using Mat = std::vector<Vec>;  // row-major

inline Mat to_mat(const pathnet::Matrix& m) {
  Mat out(static_cast<std::size_t>(m.rows()), Vec(static_cast<std::size_t>(m.cols())));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) out[i][j] = m(i, j);
  return out;
}

inline Vec vecmat(const Vec& x, const Mat& w) {
  Vec out(w.empty() ? 0 : w[0].size(), 0.0);
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = 0; j < out.size(); ++j) out[j] += x[i] * w[i][j];
  return out;
}

inline double sigm(double v) { return 1.0 / (1.0 + std::exp(-v)); }

inline Vec softmax(const Vec& z) {
  double m = *std::max_element(z.begin(), z.end());
  Vec out(z.size());
  double s = 0;
  for (std::size_t i = 0; i < z.size(); ++i) s += out[i] = std::exp(z[i] - m);
  for (auto& v : out) v /= s;
  return out;
}

// One LSTM step with gates laid out [i | f | g | o].
inline std::pair<Vec, Vec> lstm_step(const Mat& w_ih, const Mat& w_hh, const Vec& b, const Vec& x,
                                     const Vec& h, const Vec& c) {
  const std::size_t n = h.size();
  Vec pre = vecmat(x, w_ih);
  const Vec rec = vecmat(h, w_hh);
  for (std::size_t j = 0; j < 4 * n; ++j) pre[j] += rec[j] + b[j];
  Vec h2(n), c2(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double i = sigm(pre[j]), f = sigm(pre[n + j]), g = std::tanh(pre[2 * n + j]),
                 o = sigm(pre[3 * n + j]);
    c2[j] = f * c[j] + i * g;
    h2[j] = o * std::tanh(c2[j]);
  }
  return {h2, c2};
}

// One GRU step with gates laid out [r | z | n].
inline Vec gru_step(const Mat& w_ih, const Mat& w_hh, const Vec& b_ih, const Vec& b_hh, const Vec& x,
                    const Vec& h) {
  const std::size_t n = h.size();
  Vec gi = vecmat(x, w_ih), gh = vecmat(h, w_hh);
  for (std::size_t j = 0; j < 3 * n; ++j) {
    gi[j] += b_ih[j];
    gh[j] += b_hh[j];
  }
  Vec out(n);
  for (std::size_t j = 0; j < n; ++j) {
    const double r = sigm(gi[j] + gh[j]), z = sigm(gi[n + j] + gh[n + j]);
    const double cand = std::tanh(gi[2 * n + j] + r * gh[2 * n + j]);
    out[j] = (1 - z) * cand + z * h[j];
  }
  return out;
}

}  // namespace oracle
