#include "pathnet/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include "pathnet/error.hpp"

namespace pathnet {

using nlohmann::json;

void TrainConfig::validate() const {
  model.validate();
  extraction.validate();
  if (!(lr > 0.0)) throw Error("config", "lr must be positive");
  if (!(clipnorm > 0.0)) throw Error("config", "clipnorm must be positive");
  if (batch_size < 1) throw Error("config", "batch_size must be positive");
  if (epochs < 0) throw Error("config", "epochs must not be negative");
  if (patience < 0) throw Error("config", "patience must not be negative");
  if (threads < 0) throw Error("config", "threads must not be negative");
  const bool ffl = model.composition == Composition::ffl ||
                   model.composition == Composition::ffl_shared;
  if (ffl && extraction.max_hops > 2)
    throw Error("config", "feed-forward composition handles at most two hops; use gru or lstm "
                          "composition with max_hops = " + std::to_string(extraction.max_hops));
}

void to_json(json& j, const ExtractionConfig& c) {
  j = json{{"max_hops", c.max_hops},
           {"max_neighbors", c.max_neighbors},
           {"max_passages_per_entity", c.max_passages_per_entity},
           {"max_paths_per_candidate", c.max_paths_per_candidate}};
}

void from_json(const json& j, ExtractionConfig& c) {
  c.max_hops = j.value("max_hops", c.max_hops);
  c.max_neighbors = j.value("max_neighbors", c.max_neighbors);
  c.max_passages_per_entity = j.value("max_passages_per_entity", c.max_passages_per_entity);
  c.max_paths_per_candidate = j.value("max_paths_per_candidate", c.max_paths_per_candidate);
}

void to_json(json& j, const RetrievalConfig& c) {
  j = json{{"threshold", c.threshold},
           {"top_k", c.top_k},
           {"beam", c.beam},
           {"prune_prefix", c.prune_prefix}};
}

void from_json(const json& j, RetrievalConfig& c) {
  c.threshold = j.value("threshold", c.threshold);
  c.top_k = j.value("top_k", c.top_k);
  c.beam = j.value("beam", c.beam);
  c.prune_prefix = j.value("prune_prefix", c.prune_prefix);
}

void to_json(json& j, const TrainConfig& c) {
  j = json{{"model", c.model},
           {"extraction", c.extraction},
           {"retrieval", c.retrieval},
           {"embeddings", {{"path", c.embeddings.path}, {"seed", c.embeddings.seed}}},
           {"lr", c.lr},
           {"clipnorm", c.clipnorm},
           {"batch_size", c.batch_size},
           {"epochs", c.epochs},
           {"patience", c.patience},
           {"seed", c.seed},
           {"threads", c.threads},
           {"format", to_string(c.format)},
           {"train_path", c.train_path},
           {"dev_path", c.dev_path},
           {"corpus_path", c.corpus_path},
           {"checkpoint_path", c.checkpoint_path}};
}

void from_json(const json& j, TrainConfig& c) {
  if (!j.is_object()) throw Error("config", "configuration must be a JSON object");
  if (j.contains("model")) from_json(j.at("model"), c.model);
  if (j.contains("extraction")) from_json(j.at("extraction"), c.extraction);
  if (j.contains("retrieval")) from_json(j.at("retrieval"), c.retrieval);
  if (j.contains("embeddings")) {
    const auto& e = j.at("embeddings");
    c.embeddings.path = e.value("path", c.embeddings.path);
    c.embeddings.seed = e.value("seed", c.embeddings.seed);
  }
  c.lr = j.value("lr", c.lr);
  c.clipnorm = j.value("clipnorm", c.clipnorm);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.epochs = j.value("epochs", c.epochs);
  c.patience = j.value("patience", c.patience);
  c.seed = j.value("seed", c.seed);
  c.threads = j.value("threads", c.threads);
  if (j.contains("format")) c.format = parse_dataset_format(j.at("format").get<std::string>());
  c.train_path = j.value("train_path", c.train_path);
  c.dev_path = j.value("dev_path", c.dev_path);
  c.corpus_path = j.value("corpus_path", c.corpus_path);
  c.checkpoint_path = j.value("checkpoint_path", c.checkpoint_path);
}

std::set<std::string> dataset_vocabulary(const std::vector<QuestionInstance>& data) {
  std::set<std::string> vocab;
  for (const auto& inst : data) {
    for (const auto& t : inst.query_tokens) vocab.insert(t.lowercase);
    for (const auto& c : inst.candidates)
      for (const auto& t : c) vocab.insert(t.lowercase);
    for (const auto& p : inst.passages)
      for (const auto& t : p.tokens) vocab.insert(t.lowercase);
  }
  return vocab;
}

EmbeddingTable make_embedding_table(const EmbeddingSpec& spec, int dim,
                                    const std::set<std::string>& vocab) {
  if (spec.path.empty()) return EmbeddingTable(dim, spec.seed);
  return load_embeddings(spec.path, vocab, spec.seed, dim);
}

void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
  std::size_t workers = threads > 0 ? static_cast<std::size_t>(threads)
                                    : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto work = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(n);
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

std::vector<PreparedInstance> prepare_dataset(const std::vector<QuestionInstance>& data,
                                              const ExtractionConfig& extraction,
                                              WordVectors& words, int threads) {
  std::vector<std::vector<Path>> paths(data.size());
  parallel_for(data.size(), threads,
               [&](std::size_t i) { paths[i] = extract_paths(data[i], extraction); });
  std::vector<PreparedInstance> out;
  out.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i)
    out.push_back(prepare_instance(data[i], paths[i], words));
  return out;
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("io", "cannot open '" + path.string() + "'");
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") != std::string::npos) lines.push_back(line);
  }
  return lines;
}

void attach_corpus(std::vector<QuestionInstance>& data, const std::filesystem::path& corpus_path,
                   const RetrievalConfig& config, int threads) {
  const auto sentences = filter_general_sentences(read_lines(corpus_path));
  if (sentences.empty())
    throw Error("retrieval", "no usable sentences in corpus '" + corpus_path.string() + "'");
  const IdfIndex index = build_idf_index(sentences);
  parallel_for(data.size(), threads, [&](std::size_t i) {
    if (data[i].passages.empty()) attach_retrieved_passages(data[i], index, config);
  });
}

void to_json(json& j, const Prediction& p) {
  j = json{{"id", p.id},
           {"predicted", p.predicted ? json(*p.predicted) : json(nullptr)},
           {"gold", p.gold ? json(*p.gold) : json(nullptr)},
           {"probabilities", p.probabilities},
           {"paths", p.paths}};
}

void to_json(json& j, const EvalReport& r) {
  j = json{{"accuracy", r.accuracy ? json(*r.accuracy) : json(nullptr)},
           {"correct", r.correct},
           {"total", r.total},
           {"unanswerable", r.unanswerable}};
}

EvalReport evaluate(const PathNetModel& model, const WordVectors& words,
                    const std::vector<PreparedInstance>& data, int threads) {
  if (data.empty()) throw Error("evaluate", "empty dataset");
  EvalReport report;
  report.predictions.resize(data.size());
  parallel_for(data.size(), threads, [&](std::size_t i) {
    const auto scores = model.score(data[i], words);
    auto& p = report.predictions[i];
    p.id = data[i].id;
    p.predicted = scores.prediction;
    p.gold = data[i].answer;
    p.probabilities = scores.probabilities;
    p.paths = data[i].paths.size();
  });
  bool has_gold = false;
  for (const auto& p : report.predictions) {
    ++report.total;
    if (!p.predicted) ++report.unanswerable;
    if (p.gold) has_gold = true;
    if (p.gold && p.predicted && *p.gold == *p.predicted) ++report.correct;
  }
  if (has_gold)
    report.accuracy = static_cast<double>(report.correct) / static_cast<double>(report.total);
  return report;
}

void to_json(json& j, const EpochStats& s) {
  j = json{{"epoch", s.epoch},
           {"mean_loss", s.mean_loss},
           {"trained_instances", s.trained_instances},
           {"dev_accuracy", s.dev_accuracy ? json(*s.dev_accuracy) : json(nullptr)},
           {"improved", s.improved},
           {"seconds", s.seconds}};
}

json checkpoint_meta(const TrainConfig& config, int epoch, std::optional<double> dev_accuracy) {
  return json{{"model", config.model},
              {"extraction", config.extraction},
              {"embeddings",
               {{"path", config.embeddings.path},
                {"seed", config.embeddings.seed},
                {"dim", config.model.embedding_dim}}},
              {"format", to_string(config.format)},
              {"epoch", epoch},
              {"dev_accuracy", dev_accuracy ? json(*dev_accuracy) : json(nullptr)}};
}

TrainResult train(const TrainConfig& config, PathNetModel& model, const WordVectors& words,
                  const std::vector<PreparedInstance>& train_set,
                  const std::vector<PreparedInstance>& dev_set, const EpochCallback& on_epoch) {
  config.validate();
  TrainResult result;
  std::vector<std::size_t> usable;
  for (std::size_t i = 0; i < train_set.size(); ++i) {
    if (train_set[i].gold_reachable()) usable.push_back(i);
  }
  result.excluded_instances = train_set.size() - usable.size();
  if (usable.empty())
    throw Error("train", "no training instance has an extracted path to its gold answer");

  ParamStore& params = model.params();
  auto& tensors = params.tensors();
  AdamState adam;
  std::mt19937_64 rng(config.seed);
  const ForwardContext ctx{true, config.model.dropout, &rng};
  bool saved_any = false;
  auto save = [&](int epoch, std::optional<double> acc) {
    save_checkpoint(config.checkpoint_path, params, checkpoint_meta(config, epoch, acc));
    saved_any = true;
  };

  if (config.epochs == 0) {
    save(0, std::nullopt);
    return result;
  }

  double best = -1.0;
  int since_best = 0;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    std::shuffle(usable.begin(), usable.end(), rng);
    double loss_sum = 0.0;
    for (std::size_t begin = 0; begin < usable.size();
         begin += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t end =
          std::min(usable.size(), begin + static_cast<std::size_t>(config.batch_size));
      const double weight = 1.0 / static_cast<double>(end - begin);
      const auto snapshot = params.values();
      params.zero_grad();
      double batch_loss = 0.0;
      for (std::size_t b = begin; b < end; ++b) {
        const Tensor loss = model.loss(train_set[usable[b]], words, ctx);
        batch_loss += loss.item();
        backward(loss, weight);
      }
      if (!std::isfinite(batch_loss)) {
        params.set_values(snapshot);
        if (!saved_any) save(epoch - 1, std::nullopt);
        throw Error("train", "non-finite loss in epoch " + std::to_string(epoch) +
                                 "; the last good parameters are in '" + config.checkpoint_path +
                                 "'");
      }
      clip_global_norm(tensors, config.clipnorm);
      try {
        adam_step(tensors, adam, config.lr);
      } catch (const Error&) {
        params.set_values(snapshot);
        if (!saved_any) save(epoch - 1, std::nullopt);
        throw;
      }
      loss_sum += batch_loss;
    }
    params.zero_grad();

    EpochStats stats;
    stats.epoch = epoch;
    stats.trained_instances = usable.size();
    stats.mean_loss = loss_sum / static_cast<double>(usable.size());
    if (!dev_set.empty()) {
      stats.dev_accuracy = evaluate(model, words, dev_set, config.threads).accuracy;
      const double acc = stats.dev_accuracy.value_or(0.0);
      if (acc > best) {
        best = acc;
        since_best = 0;
        stats.improved = true;
        result.best_dev_accuracy = acc;
        result.best_epoch = epoch;
        save(epoch, acc);
      } else {
        ++since_best;
      }
    } else {
      stats.improved = true;
      result.best_epoch = epoch;
      save(epoch, std::nullopt);
    }
    stats.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    result.history.push_back(stats);
    if (on_epoch) on_epoch(stats);
    if (config.patience > 0 && since_best >= config.patience) {
      result.stopped_early = true;
      break;
    }
  }
  return result;
}

std::vector<QuestionInstance> load_questions(const std::filesystem::path& path, DatasetFormat format,
                                             const std::string& corpus_path,
                                             const RetrievalConfig& retrieval, int threads) {
  auto data = load_dataset(path, format);
  if (!corpus_path.empty()) attach_corpus(data, corpus_path, retrieval, threads);
  return data;
}

WordVectors word_vectors_for(const EmbeddingSpec& spec, int dim,
                             const std::vector<QuestionInstance>& data) {
  return WordVectors(make_embedding_table(spec, dim, dataset_vocabulary(data)));
}

namespace {

std::vector<QuestionInstance> load_split(const TrainConfig& config, const std::string& path) {
  return load_questions(path, config.format, config.corpus_path, config.retrieval, config.threads);
}

}  // namespace

TrainResult train(const TrainConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  if (config.train_path.empty()) throw Error("config", "train_path is required");
  const auto train_data = load_split(config, config.train_path);
  if (train_data.empty()) throw Error("train", "training set '" + config.train_path + "' is empty");
  std::vector<QuestionInstance> dev_data;
  if (!config.dev_path.empty()) dev_data = load_split(config, config.dev_path);

  auto vocab = dataset_vocabulary(train_data);
  vocab.merge(dataset_vocabulary(dev_data));
  WordVectors words(make_embedding_table(config.embeddings, config.model.embedding_dim, vocab));
  const auto train_set = prepare_dataset(train_data, config.extraction, words, config.threads);
  const auto dev_set = prepare_dataset(dev_data, config.extraction, words, config.threads);
  PathNetModel model(config.model);
  return train(config, model, words, train_set, dev_set, on_epoch);
}

LoadedModel load_model(const std::filesystem::path& checkpoint) {
  const json doc = read_checkpoint(checkpoint);
  const json& meta = doc.at("meta");
  ModelConfig model_config;
  if (meta.contains("model")) from_json(meta.at("model"), model_config);
  ExtractionConfig extraction;
  if (meta.contains("extraction")) from_json(meta.at("extraction"), extraction);
  EmbeddingSpec embeddings;
  if (meta.contains("embeddings")) {
    embeddings.path = meta.at("embeddings").value("path", embeddings.path);
    embeddings.seed = meta.at("embeddings").value("seed", embeddings.seed);
  }
  LoadedModel loaded{PathNetModel(model_config), extraction, embeddings, meta};
  load_params(doc, loaded.model.params());
  return loaded;
}

namespace {

std::string marked_passage(const Passage& passage, const std::vector<const MentionSpan*>& marks) {
  std::vector<int> opens(passage.tokens.size(), 0), closes(passage.tokens.size(), 0);
  for (const MentionSpan* m : marks) {
    if (m->token_end >= passage.tokens.size()) continue;
    ++opens[m->token_start];
    ++closes[m->token_end];
  }
  std::string out;
  for (std::size_t i = 0; i < passage.tokens.size(); ++i) {
    if (i > 0) out += ' ';
    for (int k = 0; k < opens[i]; ++k) out += "[[";
    out += passage.tokens[i].text;
    for (int k = 0; k < closes[i]; ++k) out += "]]";
  }
  return out;
}

}  // namespace

Explanation explain(const PathNetModel& model, const WordVectors& words,
                    const QuestionInstance& instance, const PreparedInstance& prepared,
                    std::size_t k) {
  if (k < 1) throw Error("explain", "k must be at least 1");
  Explanation e;
  e.id = instance.id;
  e.query = join_tokens(instance.query_tokens);
  for (std::size_t c = 0; c < instance.candidates.size(); ++c)
    e.candidates.push_back(instance.candidate_text(c));
  e.gold = instance.answer_index;
  const auto scores = model.score(prepared, words);
  e.answerable = prepared.answerable();
  e.probabilities = scores.probabilities;
  e.predicted = scores.prediction;

  std::vector<PathScore> ranked = scores.paths;
  std::stable_sort(ranked.begin(), ranked.end(), [](const PathScore& a, const PathScore& b) {
    return a.normalized > b.normalized;
  });
  if (ranked.size() > k) ranked.resize(k);

  std::map<int, const Passage*> by_id;
  for (const auto& p : instance.passages) by_id.emplace(p.id, &p);
  for (std::size_t r = 0; r < ranked.size(); ++r) {
    Explanation::Entry entry;
    entry.rank = r + 1;
    entry.score = ranked[r];
    entry.path = prepared.source_paths.at(ranked[r].path_index);
    const Path& path = entry.path;
    entry.entity_chain.push_back(path.head.surface);
    for (const auto& link : path.links) entry.entity_chain.push_back(link.source.surface);
    entry.entity_chain.push_back(path.tail.surface);
    const std::size_t hops = path.passage_ids.size();
    for (std::size_t h = 0; h < hops; ++h) {
      std::vector<const MentionSpan*> marks;
      marks.push_back(h == 0 ? &path.head : &path.links[h - 1].target);
      marks.push_back(h + 1 == hops ? &path.tail : &path.links[h].source);
      auto it = by_id.find(path.passage_ids[h]);
      entry.passages.push_back(it == by_id.end() ? std::string()
                                                 : marked_passage(*it->second, marks));
    }
    e.top_paths.push_back(std::move(entry));
  }
  return e;
}

void to_json(json& j, const Explanation& e) {
  json paths = json::array();
  for (const auto& entry : e.top_paths) {
    paths.push_back({{"rank", entry.rank},
                     {"candidate_index", entry.score.candidate_index},
                     {"entity_chain", entry.entity_chain},
                     {"passage_ids", entry.path.passage_ids},
                     {"passages", entry.passages},
                     {"score", entry.score.normalized},
                     {"z", entry.score.z},
                     {"z_ctx", entry.score.z_ctx},
                     {"z_psg", entry.score.z_psg}});
  }
  j = json{{"id", e.id},
           {"query", e.query},
           {"answerable", e.answerable},
           {"candidates", e.candidates},
           {"probabilities", e.probabilities},
           {"predicted", e.predicted ? json(*e.predicted) : json(nullptr)},
           {"gold", e.gold ? json(*e.gold) : json(nullptr)},
           {"paths", paths}};
}

std::string format_explanation(const Explanation& e) {
  std::ostringstream out;
  out.setf(std::ios::fixed);
  out.precision(4);
  out << "instance " << e.id << "\n";
  out << "query: " << e.query << "\n";
  if (!e.answerable) {
    out << "unanswerable: no path reaches any candidate\n";
    return out.str();
  }
  for (std::size_t c = 0; c < e.candidates.size(); ++c) {
    out << "  [" << c << "] " << e.probabilities[c] << "  " << e.candidates[c];
    if (e.predicted && *e.predicted == c) out << "  <- predicted";
    if (e.gold && *e.gold == c) out << "  (gold)";
    out << "\n";
  }
  for (const auto& entry : e.top_paths) {
    out << "Rank-" << entry.rank << " path  score " << entry.score.normalized << "  (z_ctx "
        << entry.score.z_ctx << ", z_psg " << entry.score.z_psg << ")\n";
    out << "  ";
    for (std::size_t i = 0; i < entry.entity_chain.size(); ++i) {
      if (i > 0) out << " -> ";
      out << entry.entity_chain[i];
    }
    out << "\n";
    for (std::size_t h = 0; h < entry.passages.size(); ++h)
      out << "  p" << entry.path.passage_ids[h] << ": " << entry.passages[h] << "\n";
  }
  return out.str();
}

GradCheckOptions::GradCheckOptions() {
  model.hidden = 8;
  model.embedding_dim = 10;
}

QuestionInstance gradient_check_instance() {
  const json record = {
      {"id", "gradcheck"},
      {"query", "hosted_by Alpha Beta"},
      {"candidates", {"Epsilon Zeta", "Iota Kappa"}},
      {"supports",
       {"Alpha Beta borders Gamma Delta.", "Gamma Delta hosts Epsilon Zeta.",
        "Alpha Beta admires Eta Theta.", "Eta Theta hosts Iota Kappa.",
        "Alpha Beta visits Iota Kappa."}},
      {"answer", "Epsilon Zeta"}};
  return parse_record(record, DatasetFormat::wikihop);
}

std::vector<Path> gradient_check_paths(const QuestionInstance& instance) {
  // One 1-hop path and one 2-hop path per candidate's intended chain.
  std::vector<Path> kept;
  for (auto& p : extract_paths(instance, ExtractionConfig{})) {
    if (p.hop_count() == 1 || p.passage_ids == std::vector<int>{0, 1} ||
        p.passage_ids == std::vector<int>{2, 3})
      kept.push_back(std::move(p));
  }
  return kept;
}

GradCheckReport gradient_check(const QuestionInstance& instance, const std::vector<Path>& paths,
                               const GradCheckOptions& options) {
  options.model.validate();
  WordVectors words(EmbeddingTable(options.model.embedding_dim, options.embedding_seed));
  const PreparedInstance prepared = prepare_instance(instance, paths, words);
  if (!prepared.gold_reachable())
    throw Error("grad-check", "instance '" + instance.id + "' has no path to its answer");
  PathNetModel model(options.model);
  return finite_diff_check([&] { return model.loss(prepared, words, ForwardContext{}); },
                           model.params(), options.eps, options.max_coords_per_param,
                           options.seed, options.richardson);
}

}  // namespace pathnet
