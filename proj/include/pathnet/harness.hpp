#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"
#include "pathnet/corpus.hpp"
#include "pathnet/paths.hpp"
#include "pathnet/retrieval.hpp"
#include "pathnet/scorer.hpp"

namespace pathnet {

/// Where word vectors come from. With an empty path every word gets its
/// seeded OOV vector, which is reproducible from `seed` alone.
struct EmbeddingSpec {
  std::string path;
  std::uint64_t seed = 17;
};

struct TrainConfig {
  ModelConfig model;
  ExtractionConfig extraction;
  RetrievalConfig retrieval;
  EmbeddingSpec embeddings;
  double lr = 0.001;
  double clipnorm = 5.0;
  int batch_size = 8;
  int epochs = 30;
  /// Epochs without dev improvement before stopping; 0 disables.
  int patience = 5;
  std::uint64_t seed = 13;
  /// Worker threads for extraction and evaluation; 0 picks the hardware count.
  int threads = 0;
  DatasetFormat format = DatasetFormat::wikihop;
  std::string train_path;
  std::string dev_path;
  /// Sentence corpus (one per line) for datasets that come without passages.
  std::string corpus_path;
  std::string checkpoint_path = "pathnet.ckpt.json";

  void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
/// Missing keys keep their defaults.
void from_json(const nlohmann::json& j, TrainConfig& c);
void to_json(nlohmann::json& j, const ExtractionConfig& c);
void from_json(const nlohmann::json& j, ExtractionConfig& c);
void to_json(nlohmann::json& j, const RetrievalConfig& c);
void from_json(const nlohmann::json& j, RetrievalConfig& c);

/// Lowercase word types of queries, candidates and passages.
std::set<std::string> dataset_vocabulary(const std::vector<QuestionInstance>& data);
EmbeddingTable make_embedding_table(const EmbeddingSpec& spec, int dim,
                                    const std::set<std::string>& vocab);

/// Runs `fn(i)` for i in [0, n) on up to `threads` workers (0 = hardware
/// count). Exceptions are rethrown on the caller's thread.
void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn);

/// Extracts paths for every instance (in parallel) and converts them to
/// scorer inputs.
std::vector<PreparedInstance> prepare_dataset(const std::vector<QuestionInstance>& data,
                                              const ExtractionConfig& extraction,
                                              WordVectors& words, int threads = 0);

/// Loads passages for instances that have none from a sentence corpus via
/// idf chain retrieval.
/// Loads a dataset file and, when `corpus_path` is set, fills passage-less
/// instances from that corpus.
std::vector<QuestionInstance> load_questions(const std::filesystem::path& path, DatasetFormat format,
                                             const std::string& corpus_path = {},
                                             const RetrievalConfig& retrieval = {},
                                             int threads = 0);
/// Word vectors covering the vocabulary of `data`.
WordVectors word_vectors_for(const EmbeddingSpec& spec, int dim,
                             const std::vector<QuestionInstance>& data);

void attach_corpus(std::vector<QuestionInstance>& data, const std::filesystem::path& corpus_path,
                   const RetrievalConfig& config, int threads = 0);
std::vector<std::string> read_lines(const std::filesystem::path& path);

struct Prediction {
  std::string id;
  std::optional<std::size_t> predicted;
  std::optional<std::size_t> gold;
  std::vector<double> probabilities;
  std::size_t paths = 0;
};

struct EvalReport {
  /// correct / total, unanswerable instances counted wrong. Absent when the
  /// dataset has no gold answers.
  std::optional<double> accuracy;
  std::size_t correct = 0;
  std::size_t total = 0;
  std::size_t unanswerable = 0;
  std::vector<Prediction> predictions;
};

void to_json(nlohmann::json& j, const Prediction& p);
void to_json(nlohmann::json& j, const EvalReport& r);

/// Throws on an empty dataset.
EvalReport evaluate(const PathNetModel& model, const WordVectors& words,
                    const std::vector<PreparedInstance>& data, int threads = 0);

struct EpochStats {
  int epoch = 0;
  double mean_loss = 0.0;
  std::size_t trained_instances = 0;
  std::optional<double> dev_accuracy;
  bool improved = false;
  double seconds = 0.0;
};

void to_json(nlohmann::json& j, const EpochStats& s);

struct TrainResult {
  std::vector<EpochStats> history;
  std::optional<double> best_dev_accuracy;
  int best_epoch = 0;
  std::size_t excluded_instances = 0;  // no path to the gold candidate
  bool stopped_early = false;
};

/// Callback invoked after every epoch, e.g. to stream progress as JSONL.
using EpochCallback = std::function<void(const EpochStats&)>;

/// Trains on pre-built inputs and writes the best-dev checkpoint (or the
/// last epoch's when there is no dev set) to config.checkpoint_path.
TrainResult train(const TrainConfig& config, PathNetModel& model, const WordVectors& words,
                  const std::vector<PreparedInstance>& train_set,
                  const std::vector<PreparedInstance>& dev_set, const EpochCallback& on_epoch = {});

/// Loads datasets and embeddings from the paths in `config`, then trains.
TrainResult train(const TrainConfig& config, const EpochCallback& on_epoch = {});

/// Checkpoint metadata needed to rebuild a model and its inputs.
nlohmann::json checkpoint_meta(const TrainConfig& config, int epoch,
                               std::optional<double> dev_accuracy);

struct LoadedModel {
  PathNetModel model;
  ExtractionConfig extraction;
  EmbeddingSpec embeddings;
  nlohmann::json meta;
};

LoadedModel load_model(const std::filesystem::path& checkpoint);

struct Explanation {
  std::string id;
  std::string query;
  bool answerable = false;
  std::vector<std::string> candidates;
  std::vector<double> probabilities;
  std::optional<std::size_t> predicted;
  std::optional<std::size_t> gold;
  struct Entry {
    std::size_t rank = 0;
    Path path;
    PathScore score;
    std::vector<std::string> entity_chain;
    /// Passage text with the path's entity mentions wrapped in [[ ]].
    std::vector<std::string> passages;
  };
  std::vector<Entry> top_paths;
};

/// Top-k paths of one instance by normalized score.
Explanation explain(const PathNetModel& model, const WordVectors& words,
                    const QuestionInstance& instance, const PreparedInstance& prepared,
                    std::size_t k);
void to_json(nlohmann::json& j, const Explanation& e);
/// Human-readable rendering: candidate table, then one block per path with
/// the entity chain and its passages.
std::string format_explanation(const Explanation& e);

/// Finite-difference check of the full loss of one instance. Defaults are a
/// small model (H = 8, 10-dim vectors) and Richardson-extrapolated central
/// differences, which keep roundoff below the tolerance for gradients as
/// small as 1e-11.
struct GradCheckOptions {
  GradCheckOptions();
  ModelConfig model;
  double eps = 4e-3;
  bool richardson = true;
  std::uint64_t embedding_seed = 17;
  std::size_t max_coords_per_param = 0;  // 0 checks every coordinate
  std::uint64_t seed = 0;
};

/// Two candidates, five passages; see gradient_check_paths.
QuestionInstance gradient_check_instance();
/// The three paths of the check: the 1-hop path and one 2-hop path per
/// candidate.
std::vector<Path> gradient_check_paths(const QuestionInstance& instance);
GradCheckReport gradient_check(const QuestionInstance& instance, const std::vector<Path>& paths,
                               const GradCheckOptions& options = {});

}  // namespace pathnet
