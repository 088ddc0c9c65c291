#include "pathnet/scorer.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "pathnet/error.hpp"

namespace pathnet {

using nlohmann::json;

Composition parse_composition(std::string_view name) {
  if (name == "ffl") return Composition::ffl;
  if (name == "ffl_shared" || name == "ffl-shared") return Composition::ffl_shared;
  if (name == "gru") return Composition::gru;
  if (name == "lstm") return Composition::lstm;
  throw Error("config", "unknown composition method '" + std::string(name) +
                            "' (expected ffl, ffl_shared, gru or lstm)");
}

std::string to_string(Composition c) {
  switch (c) {
    case Composition::ffl: return "ffl";
    case Composition::ffl_shared: return "ffl_shared";
    case Composition::gru: return "gru";
    case Composition::lstm: return "lstm";
  }
  return "ffl";
}

ScoreMode parse_score_mode(std::string_view name) {
  if (name == "full") return ScoreMode::full;
  if (name == "ctx_only" || name == "ctx-only") return ScoreMode::ctx_only;
  if (name == "psg_only" || name == "psg-only") return ScoreMode::psg_only;
  throw Error("config", "unknown scoring mode '" + std::string(name) +
                            "' (expected full, ctx_only or psg_only)");
}

std::string to_string(ScoreMode m) {
  switch (m) {
    case ScoreMode::full: return "full";
    case ScoreMode::ctx_only: return "ctx_only";
    case ScoreMode::psg_only: return "psg_only";
  }
  return "full";
}

void ModelConfig::validate() const {
  if (hidden < 2 || hidden % 2 != 0)
    throw Error("config", "hidden size must be a positive even number, got " +
                              std::to_string(hidden));
  if (embedding_dim < 1) throw Error("config", "embedding_dim must be positive");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw Error("config", "dropout must lie in [0, 1)");
}

void to_json(json& j, const ModelConfig& c) {
  j = json{{"hidden", c.hidden},
           {"embedding_dim", c.embedding_dim},
           {"composition", to_string(c.composition)},
           {"mode", to_string(c.mode)},
           {"separate_candidate_encoder", c.separate_candidate_encoder},
           {"dropout", c.dropout},
           {"dropout_embeddings", c.dropout_embeddings},
           {"dropout_ffl", c.dropout_ffl},
           {"init_seed", c.init_seed}};
}

void from_json(const json& j, ModelConfig& c) {
  c.hidden = j.value("hidden", c.hidden);
  c.embedding_dim = j.value("embedding_dim", c.embedding_dim);
  if (j.contains("composition")) c.composition = parse_composition(j.at("composition").get<std::string>());
  if (j.contains("mode")) c.mode = parse_score_mode(j.at("mode").get<std::string>());
  c.separate_candidate_encoder = j.value("separate_candidate_encoder", c.separate_candidate_encoder);
  c.dropout = j.value("dropout", c.dropout);
  c.dropout_embeddings = j.value("dropout_embeddings", c.dropout_embeddings);
  c.dropout_ffl = j.value("dropout_ffl", c.dropout_ffl);
  c.init_seed = j.value("init_seed", c.init_seed);
}

int WordVectors::id(const std::string& word) {
  const std::string key = ascii_lower(word);
  auto it = index_.find(key);
  if (it != index_.end()) return it->second;
  const int next = static_cast<int>(vectors_.size());
  vectors_.push_back(table_.lookup(key));
  index_.emplace(key, next);
  return next;
}

std::vector<int> WordVectors::ids(const std::vector<Token>& tokens) {
  std::vector<int> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(id(t.lowercase));
  return out;
}

Matrix WordVectors::rows(const std::vector<int>& ids) const {
  Matrix m(static_cast<Eigen::Index>(ids.size()), dim());
  for (std::size_t r = 0; r < ids.size(); ++r) {
    const auto& v = vectors_.at(static_cast<std::size_t>(ids[r]));
    for (int c = 0; c < dim(); ++c) m(static_cast<Eigen::Index>(r), c) = v[static_cast<std::size_t>(c)];
  }
  return m;
}

bool PreparedInstance::gold_reachable() const {
  if (!answer) return false;
  return std::any_of(paths.begin(), paths.end(),
                     [&](const PreparedPath& p) { return p.candidate_index == *answer; });
}

PreparedInstance prepare_instance(const QuestionInstance& instance, const std::vector<Path>& paths,
                                  WordVectors& words) {
  PreparedInstance out;
  out.id = instance.id;
  out.answer = instance.answer_index;
  if (instance.query_tokens.empty())
    throw DatasetError(instance.id, "query", "question has no tokens");
  out.question = words.ids(instance.query_tokens);
  for (std::size_t k = 0; k < instance.candidates.size(); ++k) {
    if (instance.candidates[k].empty())
      throw DatasetError(instance.id, "candidates", "candidate " + std::to_string(k) + " is empty");
    out.candidates.push_back(words.ids(instance.candidates[k]));
  }

  std::map<int, std::size_t> position_of;
  for (std::size_t i = 0; i < instance.passages.size(); ++i)
    position_of.emplace(instance.passages[i].id, i);
  std::map<std::size_t, std::size_t> prepared_passage;  // instance position -> prepared index
  std::map<std::pair<std::size_t, std::string>, std::size_t> mention_set_of;

  auto passage_index = [&](int passage_id) {
    auto it = position_of.find(passage_id);
    if (it == position_of.end())
      throw Error("paths", "instance '" + instance.id + "': path refers to unknown passage " +
                               std::to_string(passage_id));
    auto [slot, inserted] = prepared_passage.emplace(it->second, out.passages.size());
    if (inserted) out.passages.push_back(words.ids(instance.passages[it->second].tokens));
    return std::pair{it->second, slot->second};
  };
  auto mention_set = [&](std::size_t position, std::size_t prepared, const MentionSpan& mention) {
    auto [slot, inserted] =
        mention_set_of.emplace(std::pair{prepared, mention.entity_key}, out.mention_sets.size());
    if (inserted) {
      std::vector<TokenSpan> spans;
      for (const auto& m : find_mentions(instance.passages[position], {mention.entity_key}))
        spans.emplace_back(m.token_start, m.token_end);
      if (spans.empty()) spans.emplace_back(mention.token_start, mention.token_end);
      out.mention_sets.push_back(std::move(spans));
    }
    return slot->second;
  };

  for (const auto& path : paths) {
    if (path.candidate_index >= instance.candidates.size())
      throw Error("paths", "instance '" + instance.id + "': path candidate index out of range");
    if (path.passage_ids.size() != path.links.size() + 1)
      throw Error("paths", "instance '" + instance.id + "': path passages and links disagree");
    PreparedPath prepared;
    prepared.candidate_index = path.candidate_index;
    const std::size_t hops = path.passage_ids.size();
    for (std::size_t i = 0; i < hops; ++i) {
      const auto [position, index] = passage_index(path.passage_ids[i]);
      const MentionSpan& start = i == 0 ? path.head : path.links[i - 1].target;
      const MentionSpan& end = i + 1 == hops ? path.tail : path.links[i].source;
      prepared.hops.push_back(
          {index, mention_set(position, index, start), mention_set(position, index, end)});
    }
    out.paths.push_back(std::move(prepared));
  }
  out.source_paths = paths;
  return out;
}

Tensor CompositionUnit::compose(const std::vector<Tensor>& inputs, const ForwardContext& ctx,
                                bool drop_inputs) const {
  switch (method) {
    case Composition::ffl:
    case Composition::ffl_shared: {
      if (inputs.empty() || inputs.size() > 2)
        throw Error("composition", "feed-forward composition handles one or two hops, got " +
                                       std::to_string(inputs.size()) +
                                       "; use gru or lstm composition for longer paths");
      const Tensor& second = inputs.size() == 2 ? inputs[1] : null_input;
      if (drop_inputs) return pathnet::ffl(ffl, ctx.drop(inputs[0]), ctx.drop(second));
      return pathnet::ffl(ffl, inputs[0], second);
    }
    case Composition::gru:
      return gru_final_state(gru, inputs);
    case Composition::lstm:
      return lstm_final_state(lstm, inputs);
  }
  throw Error("composition", "unknown composition method");
}

std::vector<double> softmax(const std::vector<double>& z) {
  if (z.empty()) return {};
  const double mx = *std::max_element(z.begin(), z.end());
  std::vector<double> out(z.size());
  double total = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    out[i] = std::exp(z[i] - mx);
    total += out[i];
  }
  for (auto& v : out) v /= total;
  return out;
}

std::vector<double> candidate_probabilities(const std::vector<double>& normalized,
                                            const std::vector<std::size_t>& candidate_of,
                                            std::size_t num_candidates) {
  if (normalized.size() != candidate_of.size())
    throw ShapeError("candidate_probabilities: " + std::to_string(normalized.size()) +
                     " scores for " + std::to_string(candidate_of.size()) + " paths");
  std::vector<double> probs(num_candidates, 0.0);
  for (std::size_t j = 0; j < normalized.size(); ++j) {
    if (candidate_of[j] >= num_candidates)
      throw Error("scorer", "path candidate index out of range");
    probs[candidate_of[j]] += normalized[j];
  }
  return probs;
}

std::size_t argmax(const std::vector<double>& values) {
  if (values.empty()) throw Error("scorer", "argmax of an empty list");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

namespace {

double uniform_bound(Eigen::Index fan_in) { return std::sqrt(1.0 / static_cast<double>(fan_in)); }

CompositionUnit make_composition(ParamStore& store, const std::string& prefix,
                                 const std::string& null_name, Composition method,
                                 Eigen::Index input, Eigen::Index hidden, std::mt19937_64& rng) {
  CompositionUnit unit;
  unit.method = method;
  switch (method) {
    case Composition::ffl:
    case Composition::ffl_shared:
      unit.ffl = make_ffl(store, prefix, input, input, hidden, rng);
      unit.null_input = store.uniform(null_name, 1, input, uniform_bound(input), rng);
      break;
    case Composition::gru:
      unit.gru = make_gru(store, prefix, input, hidden, rng);
      break;
    case Composition::lstm:
      unit.lstm = make_lstm(store, prefix, input, hidden, rng);
      break;
  }
  return unit;
}

}  // namespace

PathNetModel::PathNetModel(const ModelConfig& config) : config_(config) {
  config_.validate();
  const Eigen::Index h = config_.hidden;
  const Eigen::Index half = h / 2;
  const Eigen::Index d = config_.embedding_dim;
  std::mt19937_64 rng(config_.init_seed);

  enc_fwd_ = make_lstm(params_, "encoder.fwd", d, half, rng);
  enc_bwd_ = make_lstm(params_, "encoder.bwd", d, half, rng);
  if (config_.separate_candidate_encoder) {
    cand_fwd_ = make_lstm(params_, "cand_encoder.fwd", d, half, rng);
    cand_bwd_ = make_lstm(params_, "cand_encoder.bwd", d, half, rng);
  } else {
    cand_fwd_ = enc_fwd_;
    cand_bwd_ = enc_bwd_;
  }

  rel_head_ = make_ffl(params_, "rel.head", 2 * h, 2 * h, h, rng);
  rel_tail_ = config_.composition == Composition::ffl_shared
                  ? rel_head_
                  : make_ffl(params_, "rel.tail", 2 * h, 2 * h, h, rng);

  const Composition psg_method = config_.composition == Composition::ffl_shared
                                     ? Composition::ffl
                                     : config_.composition;
  comp_ctx_ = make_composition(params_, "comp.ctx", "null.relation", config_.composition, h, h, rng);
  comp_psg_ = make_composition(params_, "comp.psg", "null.passage", psg_method, 2 * h, h, rng);

  w_q_ = params_.uniform("score.w_q", 2 * h, h, uniform_bound(2 * h), rng);
  score_ctx_ = make_ffl(params_, "score.ctx", h, h, h, rng);
  w_ctx_ = params_.uniform("score.w_ctx", 1, h, uniform_bound(h), rng);
  pool_passage_ = params_.uniform("pool.passage", 1, 2 * h, uniform_bound(2 * h), rng);
  pool_candidate_ = params_.uniform("pool.candidate", 1, h, uniform_bound(h), rng);
}

Tensor PathNetModel::embed(const std::vector<int>& ids, const WordVectors& words,
                           const ForwardContext& ctx) const {
  if (words.dim() != config_.embedding_dim)
    throw ShapeError("embedding dimension " + std::to_string(words.dim()) +
                     " does not match the model's " + std::to_string(config_.embedding_dim));
  Tensor x = Tensor::constant(words.rows(ids));
  return config_.dropout_embeddings ? ctx.drop(x) : x;
}

ForwardResult PathNetModel::forward(const PreparedInstance& inst, const WordVectors& words,
                                    const ForwardContext& ctx) const {
  if (inst.paths.empty())
    throw Error("scorer", "instance '" + inst.id + "' has no paths to score");
  const bool use_ctx = config_.mode != ScoreMode::psg_only;
  const bool use_psg = config_.mode != ScoreMode::ctx_only;
  const bool drop_ffl = config_.dropout_ffl;
  auto ffl_in = [&](const FflParams& p, const Tensor& a, const Tensor& b) {
    return drop_ffl ? pathnet::ffl(p, ctx.drop(a), ctx.drop(b)) : pathnet::ffl(p, a, b);
  };

  const Tensor question = encode_sequence(embed(inst.question, words, ctx), enc_fwd_, enc_bwd_);

  std::vector<Tensor> passages(inst.passages.size());
  auto passage_states = [&](std::size_t i) -> const Tensor& {
    if (!passages[i].defined())
      passages[i] = encode_sequence(embed(inst.passages[i], words, ctx), enc_fwd_, enc_bwd_);
    return passages[i];
  };

  const std::size_t num_paths = inst.paths.size();
  std::vector<Tensor> z_ctx_parts, z_psg_parts;

  if (use_ctx) {
    const Tensor q_tilde = aggregate_question(question, w_q_);
    std::vector<Tensor> boundaries(inst.mention_sets.size());
    auto boundary = [&](std::size_t passage, std::size_t set) -> const Tensor& {
      if (!boundaries[set].defined())
        boundaries[set] = boundary_vector(passage_states(passage), inst.mention_sets[set]);
      return boundaries[set];
    };
    std::map<std::tuple<std::size_t, std::size_t, bool>, Tensor> relations;
    for (const auto& path : inst.paths) {
      std::vector<Tensor> rels;
      const std::size_t m = path.hops.size();
      for (std::size_t i = 0; i < m; ++i) {
        const auto& hop = path.hops[i];
        const bool tail_extractor = m > 1 && i + 1 == m;
        auto key = std::tuple{hop.start, hop.end, tail_extractor};
        auto it = relations.find(key);
        if (it == relations.end()) {
          const FflParams& p = tail_extractor ? rel_tail_ : rel_head_;
          it = relations
                   .emplace(key, ffl_in(p, boundary(hop.passage, hop.start),
                                        boundary(hop.passage, hop.end)))
                   .first;
        }
        rels.push_back(it->second);
      }
      const Tensor x_ctx = comp_ctx_.compose(rels, ctx, drop_ffl);
      z_ctx_parts.push_back(dot(ffl_in(score_ctx_, x_ctx, q_tilde), w_ctx_));
    }
  }

  if (use_psg) {
    std::vector<Tensor> pooled(inst.passages.size());
    auto passage_vector = [&](std::size_t i) -> const Tensor& {
      if (!pooled[i].defined()) {
        const Tensor& s = passage_states(i);
        const auto weighted = question_weighted_passage(attention_scores(s, question), question, s);
        pooled[i] = attentive_pool(concat_cols({weighted.sq1, weighted.sq2}), pool_passage_);
      }
      return pooled[i];
    };
    std::vector<Tensor> candidate_vectors(inst.candidates.size());
    for (const auto& path : inst.paths) {
      std::vector<Tensor> hops;
      for (const auto& hop : path.hops) hops.push_back(passage_vector(hop.passage));
      const Tensor x_psg = comp_psg_.compose(hops, ctx, drop_ffl);
      Tensor& c = candidate_vectors[path.candidate_index];
      if (!c.defined()) {
        const Tensor states =
            encode_sequence(embed(inst.candidates[path.candidate_index], words, ctx), cand_fwd_,
                            cand_bwd_);
        c = attentive_pool(states, pool_candidate_);
      }
      z_psg_parts.push_back(dot(c, x_psg));
    }
  }

  ForwardResult out;
  const auto zeros = Tensor::zeros(1, static_cast<Eigen::Index>(num_paths));
  out.z_ctx = use_ctx ? concat_cols(z_ctx_parts) : zeros;
  out.z_psg = use_psg ? concat_cols(z_psg_parts) : zeros;
  if (use_ctx && use_psg) {
    out.z = add(out.z_ctx, out.z_psg);
  } else {
    out.z = use_ctx ? out.z_ctx : out.z_psg;
  }
  return out;
}

Tensor PathNetModel::loss(const PreparedInstance& inst, const WordVectors& words,
                          const ForwardContext& ctx) const {
  if (!inst.answer) throw Error("train", "instance '" + inst.id + "' has no gold answer");
  std::vector<Eigen::Index> gold;
  for (std::size_t j = 0; j < inst.paths.size(); ++j) {
    if (inst.paths[j].candidate_index == *inst.answer) gold.push_back(static_cast<Eigen::Index>(j));
  }
  if (gold.empty())
    throw Error("train", "instance '" + inst.id + "' has no path to its gold candidate");
  const ForwardResult r = forward(inst, words, ctx);
  return sub(logsumexp(r.z), logsumexp(gather(r.z, gold)));
}

InstanceScores PathNetModel::score(const PreparedInstance& inst, const WordVectors& words) const {
  InstanceScores out;
  out.probabilities.assign(inst.candidates.size(), 0.0);
  if (!inst.answerable()) return out;
  NoGradGuard guard;
  const ForwardResult r = forward(inst, words, ForwardContext{});
  std::vector<double> z(inst.paths.size());
  std::vector<std::size_t> candidate_of(inst.paths.size());
  for (std::size_t j = 0; j < z.size(); ++j) {
    z[j] = r.z.value()(0, static_cast<Eigen::Index>(j));
    candidate_of[j] = inst.paths[j].candidate_index;
  }
  const auto normalized = softmax(z);
  for (std::size_t j = 0; j < z.size(); ++j) {
    const auto col = static_cast<Eigen::Index>(j);
    out.paths.push_back({j, candidate_of[j], r.z_ctx.value()(0, col), r.z_psg.value()(0, col),
                         z[j], normalized[j]});
  }
  out.probabilities = candidate_probabilities(normalized, candidate_of, inst.candidates.size());
  out.prediction = argmax(out.probabilities);
  return out;
}

}  // namespace pathnet
