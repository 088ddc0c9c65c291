#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "pathnet/corpus.hpp"
#include "pathnet/embeddings.hpp"
#include "pathnet/encoders.hpp"
#include "pathnet/optim.hpp"
#include "pathnet/paths.hpp"

namespace pathnet {

/// How per-hop vectors are combined into one path vector. `ffl` and
/// `ffl_shared` handle one- and two-hop paths; `ffl_shared` also ties the
/// two relation extractors. The recurrent methods take any length.
enum class Composition { ffl, ffl_shared, gru, lstm };
/// Which score components enter z.
enum class ScoreMode { full, ctx_only, psg_only };

Composition parse_composition(std::string_view name);
std::string to_string(Composition c);
ScoreMode parse_score_mode(std::string_view name);
std::string to_string(ScoreMode m);

struct ModelConfig {
  int hidden = 100;  // H; each LSTM direction has H / 2 units
  int embedding_dim = 300;
  Composition composition = Composition::ffl;
  ScoreMode mode = ScoreMode::full;
  bool separate_candidate_encoder = false;
  double dropout = 0.25;
  bool dropout_embeddings = true;
  bool dropout_ffl = true;
  std::uint64_t init_seed = 1;

  void validate() const;
};

void to_json(nlohmann::json& j, const ModelConfig& c);
/// Missing keys keep their defaults.
void from_json(const nlohmann::json& j, ModelConfig& c);

/// Frozen word vectors addressed by dense ids, filled on first use from an
/// EmbeddingTable. Not thread-safe for id assignment; lookups by id are.
class WordVectors {
 public:
  explicit WordVectors(EmbeddingTable table) : table_(std::move(table)) {}

  int dim() const { return table_.dim(); }
  int id(const std::string& word);
  std::vector<int> ids(const std::vector<Token>& tokens);
  /// Stacked vectors of `ids`, one row each.
  Matrix rows(const std::vector<int>& ids) const;

 private:
  EmbeddingTable table_;
  std::unordered_map<std::string, int> index_;
  std::vector<std::vector<double>> vectors_;
};

/// One hop of a prepared path: a passage (position in
/// PreparedInstance::passages) and the mention sets of the entity entering
/// and leaving it (indices into PreparedInstance::mention_sets).
struct PreparedHop {
  std::size_t passage = 0;
  std::size_t start = 0;
  std::size_t end = 0;
};

struct PreparedPath {
  std::size_t candidate_index = 0;
  std::vector<PreparedHop> hops;
};

/// Everything the scorer needs from an instance, as word ids and spans.
struct PreparedInstance {
  std::string id;
  std::vector<int> question;
  std::vector<std::vector<int>> candidates;
  std::vector<std::vector<int>> passages;
  /// All mention spans of one entity key in one passage.
  std::vector<std::vector<TokenSpan>> mention_sets;
  std::vector<PreparedPath> paths;
  std::vector<Path> source_paths;
  std::optional<std::size_t> answer;

  bool answerable() const { return !paths.empty(); }
  /// True when some path ends at the gold candidate.
  bool gold_reachable() const;
};

PreparedInstance prepare_instance(const QuestionInstance& instance, const std::vector<Path>& paths,
                                  WordVectors& words);

/// Composition unit: FFL over (first, second-or-null) or a recurrent cell.
struct CompositionUnit {
  Composition method = Composition::ffl;
  FflParams ffl;
  GruParams gru;
  LstmParams lstm;
  Tensor null_input;  // second FFL input for one-hop paths

  Tensor compose(const std::vector<Tensor>& inputs, const ForwardContext& ctx,
                 bool drop_inputs) const;
};

/// Differentiable per-path scores of one instance, each 1 x P.
struct ForwardResult {
  Tensor z_ctx;
  Tensor z_psg;
  Tensor z;
};

struct PathScore {
  std::size_t path_index = 0;
  std::size_t candidate_index = 0;
  double z_ctx = 0.0;
  double z_psg = 0.0;
  double z = 0.0;
  double normalized = 0.0;
};

struct InstanceScores {
  std::vector<PathScore> paths;
  std::vector<double> probabilities;  // per candidate; all zero when unanswerable
  std::optional<std::size_t> prediction;
};

/// Max-subtracted softmax over all entries.
std::vector<double> softmax(const std::vector<double>& z);
/// Sum of normalized path scores per candidate.
std::vector<double> candidate_probabilities(const std::vector<double>& normalized,
                                            const std::vector<std::size_t>& candidate_of,
                                            std::size_t num_candidates);
/// Index of the largest value, lowest index on ties.
std::size_t argmax(const std::vector<double>& values);

class PathNetModel {
 public:
  explicit PathNetModel(const ModelConfig& config);
  // Copies would share parameter storage; move instead.
  PathNetModel(const PathNetModel&) = delete;
  PathNetModel& operator=(const PathNetModel&) = delete;
  PathNetModel(PathNetModel&&) = default;
  PathNetModel& operator=(PathNetModel&&) = default;

  const ModelConfig& config() const { return config_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  /// Builds the graph for all paths of `inst` (which must be answerable).
  ForwardResult forward(const PreparedInstance& inst, const WordVectors& words,
                        const ForwardContext& ctx) const;
  /// -log of the summed normalized score of the gold candidate's paths.
  Tensor loss(const PreparedInstance& inst, const WordVectors& words,
              const ForwardContext& ctx) const;
  /// Evaluation-mode scores without recording a graph.
  InstanceScores score(const PreparedInstance& inst, const WordVectors& words) const;

  // Exposed for tests of weight tying and of the individual scoring steps.
  const FflParams& relation_head() const { return rel_head_; }
  const FflParams& relation_tail() const { return rel_tail_; }

 private:
  Tensor embed(const std::vector<int>& ids, const WordVectors& words,
               const ForwardContext& ctx) const;

  ModelConfig config_;
  ParamStore params_;
  LstmParams enc_fwd_, enc_bwd_, cand_fwd_, cand_bwd_;
  FflParams rel_head_, rel_tail_;
  CompositionUnit comp_ctx_, comp_psg_;
  Tensor w_q_;
  FflParams score_ctx_;
  Tensor w_ctx_;
  Tensor pool_passage_, pool_candidate_;
};

}  // namespace pathnet
