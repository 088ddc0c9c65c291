#include "pathnet/synthetic.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <random>
#include <set>

#include "pathnet/corpus.hpp"
#include "pathnet/error.hpp"
#include "pathnet/paths.hpp"
#include "pathnet/text.hpp"

namespace pathnet {

using nlohmann::json;

void SyntheticConfig::validate() const {
  if (entities < 1 || relations < 1 || rules < 1 || hops < 1 || instances < 0 || candidates < 2 ||
      filler_passages < 0)
    throw Error("config", "synthetic: entities, relations, rules and hops must be positive, "
                          "candidates at least 2");
  if (rules > relations)
    throw Error("config", "synthetic: rules (" + std::to_string(rules) +
                              ") cannot exceed relations per hop (" + std::to_string(relations) +
                              ")");
  if (relations < candidates)
    throw Error("config", "synthetic: need at least as many relations per hop (" +
                              std::to_string(relations) + ") as candidates (" +
                              std::to_string(candidates) + ")");
  const int per_instance = hops + 1 + (candidates - 1) * hops + 2 * filler_passages;
  if (entities < per_instance)
    throw Error("config", "synthetic: " + std::to_string(entities) +
                              " entities cannot fill an instance needing " +
                              std::to_string(per_instance));
}

void to_json(json& j, const SyntheticConfig& c) {
  j = json{{"entities", c.entities},   {"relations", c.relations},
           {"rules", c.rules},         {"hops", c.hops},
           {"instances", c.instances}, {"candidates", c.candidates},
           {"filler_passages", c.filler_passages}, {"seed", c.seed}};
}

void from_json(const json& j, SyntheticConfig& c) {
  c.entities = j.value("entities", c.entities);
  c.relations = j.value("relations", c.relations);
  c.rules = j.value("rules", c.rules);
  c.hops = j.value("hops", c.hops);
  c.instances = j.value("instances", c.instances);
  c.candidates = j.value("candidates", c.candidates);
  c.filler_passages = j.value("filler_passages", c.filler_passages);
  c.seed = j.value("seed", c.seed);
}

namespace {

using Rng = std::mt19937_64;

std::size_t pick(Rng& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

// Pronounceable made-up words, unique across the whole generator so that no
// two roles share a token.
class Lexicon {
 public:
  explicit Lexicon(Rng& rng) : rng_(rng) {}

  std::string fresh(int syllables) {
    static const char* onsets[] = {"b", "d", "f", "g", "k", "l", "m", "n", "p", "r",
                                   "s", "t", "v", "z", "br", "dr", "gr", "kl", "st", "tr"};
    static const char* vowels[] = {"a", "e", "i", "o", "u"};
    static const char* codas[] = {"", "", "n", "r", "l", "s", "k"};
    for (;;) {
      std::string w;
      for (int s = 0; s < syllables; ++s) {
        w += onsets[pick(rng_, std::size(onsets))];
        w += vowels[pick(rng_, std::size(vowels))];
      }
      w += codas[pick(rng_, std::size(codas))];
      if (is_stopword(w) || !used_.insert(w).second) continue;
      return w;
    }
  }

 private:
  Rng& rng_;
  std::set<std::string> used_;
};

std::string capitalize(std::string w) {
  if (!w.empty()) w[0] = static_cast<char>(w[0] - 'a' + 'A');
  return w;
}

struct Fact {
  std::size_t subject;
  std::size_t relation;  // index into the hop position's word list
  std::size_t position;
  std::size_t object;
};

class Generator {
 public:
  explicit Generator(const SyntheticConfig& config) : cfg_(config), rng_(config.seed), lex_(rng_) {
    for (int i = 0; i < cfg_.entities; ++i)
      names_.push_back(capitalize(lex_.fresh(3)));
    relation_words_.resize(static_cast<std::size_t>(cfg_.hops));
    for (auto& words : relation_words_) {
      for (int r = 0; r < cfg_.relations; ++r) words.push_back(lex_.fresh(2) + "s");
    }
    // Each relation belongs to at most one rule per position, so every hop
    // of a chain has to agree with the query for the chain to be gold.
    std::vector<std::vector<std::size_t>> perms(relation_words_.size());
    for (auto& perm : perms) {
      perm.resize(static_cast<std::size_t>(cfg_.relations));
      std::iota(perm.begin(), perm.end(), std::size_t{0});
      std::shuffle(perm.begin(), perm.end(), rng_);
    }
    for (int q = 0; q < cfg_.rules; ++q) {
      std::vector<std::size_t> tuple;
      for (const auto& perm : perms) tuple.push_back(perm[static_cast<std::size_t>(q)]);
      std::string name;
      for (std::size_t i = 0; i < tuple.size(); ++i) name += (i ? "_" : "") + relation_words_[i][tuple[i]];
      query_words_.push_back(name);
      rule_tuples_.push_back(std::move(tuple));
    }
  }

  json rules() const {
    json out = json::object();
    for (std::size_t q = 0; q < query_words_.size(); ++q) {
      json chain = json::array();
      for (std::size_t i = 0; i < rule_tuples_[q].size(); ++i)
        chain.push_back(relation_words_[i][rule_tuples_[q][i]]);
      out[query_words_[q]] = chain;
    }
    return out;
  }

  json instance(std::size_t ordinal) {
    char id[32];
    std::snprintf(id, sizeof id, "synth-%06zu", ordinal);
    for (int attempt = 0; attempt < 100; ++attempt) {
      json record = draw(id);
      if (gold_path_found(record)) return record;
    }
    throw Error("synthetic", std::string("could not generate a solvable instance for ") + id);
  }

 private:
  json draw(const std::string& id) {
    const auto hops = static_cast<std::size_t>(cfg_.hops);
    std::vector<std::size_t> pool(names_.size());
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    std::shuffle(pool.begin(), pool.end(), rng_);
    std::size_t next_entity = 0;
    auto fresh_entity = [&] { return pool[next_entity++]; };

    const std::size_t rule = pick(rng_, rule_tuples_.size());
    const auto& tuple = rule_tuples_[rule];

    std::vector<Fact> facts;
    std::vector<std::size_t> gold_chain{fresh_entity()};
    for (std::size_t i = 0; i < hops; ++i) {
      gold_chain.push_back(fresh_entity());
      facts.push_back({gold_chain[i], tuple[i], i, gold_chain[i + 1]});
    }
    std::vector<std::size_t> answers{gold_chain.back()};

    // Wrong relations already used at each position, so no relation word
    // repeats across passages at the same hop.
    std::vector<std::set<std::size_t>> used(hops);
    for (std::size_t i = 0; i < hops; ++i) used[i].insert(tuple[i]);
    for (int d = 1; d < cfg_.candidates; ++d) {
      const std::size_t diverge = pick(rng_, hops);
      std::size_t wrong;
      do {
        wrong = pick(rng_, relation_words_[diverge].size());
      } while (used[diverge].count(wrong));
      used[diverge].insert(wrong);
      std::size_t current = gold_chain[diverge];
      for (std::size_t i = diverge; i < hops; ++i) {
        const std::size_t next = fresh_entity();
        facts.push_back({current, i == diverge ? wrong : tuple[i], i, next});
        current = next;
      }
      answers.push_back(current);
    }
    for (int f = 0; f < cfg_.filler_passages; ++f) {
      const std::size_t position = pick(rng_, hops);
      facts.push_back({fresh_entity(), pick(rng_, relation_words_[position].size()), position,
                       fresh_entity()});
    }

    std::vector<std::size_t> order(facts.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng_);
    json supports = json::array();
    for (std::size_t i : order) {
      const Fact& f = facts[i];
      supports.push_back(names_[f.subject] + " " + relation_words_[f.position][f.relation] + " " +
                         names_[f.object] + ".");
    }
    // Position in `supports` of each gold fact, in chain order.
    gold_passages_.clear();
    for (std::size_t h = 0; h < hops; ++h)
      gold_passages_.push_back(static_cast<int>(std::find(order.begin(), order.end(), h) - order.begin()));

    std::shuffle(answers.begin(), answers.end(), rng_);
    json candidates = json::array();
    for (std::size_t a : answers) candidates.push_back(names_[a]);

    return json{{"id", id},
                {"query", query_words_[rule] + " " + names_[gold_chain.front()]},
                {"candidates", candidates},
                {"supports", supports},
                {"answer", names_[gold_chain.back()]}};
  }

  bool gold_path_found(const json& record) const {
    const QuestionInstance inst = parse_record(record, DatasetFormat::synthetic);
    ExtractionConfig extraction;
    extraction.max_hops = cfg_.hops;
    for (const auto& path : extract_paths(inst, extraction)) {
      if (path.candidate_index == inst.answer_index && path.passage_ids == gold_passages_)
        return true;
    }
    return false;
  }

  const SyntheticConfig& cfg_;
  Rng rng_;
  Lexicon lex_;
  std::vector<std::string> names_;
  std::vector<std::vector<std::string>> relation_words_;
  std::vector<std::string> query_words_;
  std::vector<std::vector<std::size_t>> rule_tuples_;
  std::vector<int> gold_passages_;
};

}  // namespace

SyntheticDataset generate_synthetic(const SyntheticConfig& config) {
  config.validate();
  Generator gen(config);
  SyntheticDataset out;
  out.rules = gen.rules();
  out.records.reserve(static_cast<std::size_t>(config.instances));
  for (int i = 0; i < config.instances; ++i)
    out.records.push_back(gen.instance(static_cast<std::size_t>(i)));
  return out;
}

}  // namespace pathnet
