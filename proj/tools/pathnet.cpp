// Command-line front end. Every subcommand reads an optional JSON config
// (the TrainConfig layout, plus a "synthetic" section for gen-synthetic),
// applies flag overrides on top, and writes JSONL. Failures print one error
// JSON object on stderr and exit nonzero.

#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "pathnet/error.hpp"
#include "pathnet/harness.hpp"
#include "pathnet/retrieval.hpp"
#include "pathnet/synthetic.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace pathnet;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

// Overrides collected during parsing and applied after the config file is
// read, so flags always win.
template <class Config>
class Overrides {
 public:
  template <class T>
  CLI::Option* add(CLI::App* app, const std::string& name, std::function<void(Config&, T)> set,
                   const std::string& help) {
    return app->add_option_function<T>(
        name, [this, set](const T& v) { fns_.push_back([set, v](Config& c) { set(c, v); }); },
        help);
  }
  void apply(Config& c) const {
    for (const auto& f : fns_) f(c);
  }

 private:
  std::vector<std::function<void(Config&)>> fns_;
};

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("io", "cannot open config '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error("config", "config '" + path + "' is not valid JSON: " + e.what());
  }
}

// JSONL sink: a file, or stdout for "-".
class Output {
 public:
  explicit Output(const std::string& path) {
    if (path.empty() || path == "-") return;
    if (fs::path(path).has_parent_path()) fs::create_directories(fs::path(path).parent_path());
    file_ = std::make_unique<std::ofstream>(path);
    if (!*file_) throw Error("io", "cannot open output '" + path + "'");
  }
  void write(const json& record) {
    stream() << record.dump() << '\n';
    if (!stream()) throw Error("io", "write failed");
  }
  std::ostream& stream() { return file_ ? *file_ : std::cout; }

 private:
  std::unique_ptr<std::ofstream> file_;
};

struct Common {
  std::string config_path;
  std::string out = "-";
};

TrainConfig load_train_config(const Common& common) {
  TrainConfig config;
  if (!common.config_path.empty()) from_json(read_json_file(common.config_path), config);
  return config;
}

void add_common(CLI::App* app, Common& common) {
  app->add_option("--config", common.config_path, "JSON config file");
  app->add_option("--out", common.out, "output JSONL file, - for stdout");
}

void add_data_overrides(CLI::App* app, Overrides<TrainConfig>& o) {
  o.add<std::string>(app, "--format",
                     [](TrainConfig& c, std::string v) { c.format = parse_dataset_format(v); },
                     "dataset format: wikihop, openbookqa or synthetic");
  o.add<std::string>(app, "--corpus", [](TrainConfig& c, std::string v) { c.corpus_path = v; },
                     "sentence corpus for instances without passages");
  o.add<int>(app, "--threads", [](TrainConfig& c, int v) { c.threads = v; },
             "worker threads (0 = all cores)");
  o.add<int>(app, "--max-hops", [](TrainConfig& c, int v) { c.extraction.max_hops = v; },
             "longest path in passages");
  o.add<int>(app, "--max-neighbors", [](TrainConfig& c, int v) { c.extraction.max_neighbors = v; },
             "neighbor entities per anchor mention");
  o.add<int>(app, "--max-paths",
             [](TrainConfig& c, int v) { c.extraction.max_paths_per_candidate = v; },
             "paths kept per candidate");
}

void add_model_overrides(CLI::App* app, Overrides<TrainConfig>& o) {
  o.add<std::string>(app, "--composition",
                     [](TrainConfig& c, std::string v) { c.model.composition = parse_composition(v); },
                     "ffl, ffl_shared, gru or lstm");
  o.add<std::string>(app, "--mode",
                     [](TrainConfig& c, std::string v) { c.model.mode = parse_score_mode(v); },
                     "full, ctx_only or psg_only");
  o.add<int>(app, "--hidden", [](TrainConfig& c, int v) { c.model.hidden = v; }, "H (even)");
  o.add<int>(app, "--embedding-dim", [](TrainConfig& c, int v) { c.model.embedding_dim = v; },
             "word vector size");
  o.add<double>(app, "--dropout", [](TrainConfig& c, double v) { c.model.dropout = v; },
                "dropout probability");
  o.add<std::string>(app, "--embeddings", [](TrainConfig& c, std::string v) { c.embeddings.path = v; },
                     "text embedding file (omit for seeded random vectors)");
  o.add<std::uint64_t>(app, "--embedding-seed",
                       [](TrainConfig& c, std::uint64_t v) { c.embeddings.seed = v; },
                       "seed of out-of-vocabulary vectors");
}

json error_json(const std::string& kind, const std::string& message) {
  return json{{"error", {{"kind", kind}, {"message", message}}}};
}

// extract-paths

json path_record(const QuestionInstance& inst, const Path& p) {
  json r = p;
  r["id"] = inst.id;
  r["candidate"] = inst.candidate_text(p.candidate_index);
  json chain = json::array({p.head.surface});
  for (const auto& l : p.links) chain.push_back(l.source.surface);
  chain.push_back(p.tail.surface);
  r["entity_chain"] = chain;
  return r;
}

void run_extract_paths(const TrainConfig& config, const std::string& data, Output& out) {
  config.extraction.validate();
  const auto instances =
      load_questions(data, config.format, config.corpus_path, config.retrieval, config.threads);
  std::vector<std::vector<Path>> paths(instances.size());
  parallel_for(instances.size(), config.threads,
               [&](std::size_t i) { paths[i] = extract_paths(instances[i], config.extraction); });
  for (std::size_t i = 0; i < instances.size(); ++i) {
    for (const auto& p : paths[i]) out.write(path_record(instances[i], p));
  }
}

// retrieve

void run_retrieve(const TrainConfig& config, const std::string& corpus_path,
                  const std::string& questions, bool filter, Output& out) {
  const auto lines = read_lines(corpus_path);
  std::vector<std::size_t> line_of;
  std::vector<std::string> kept;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (!filter || is_general_sentence(lines[i])) {
      line_of.push_back(i);
      kept.push_back(lines[i]);
    }
  }
  const IdfIndex index = build_idf_index(kept);
  const auto instances = load_dataset(questions, config.format);
  struct Job {
    std::size_t instance, candidate;
  };
  std::vector<Job> jobs;
  for (std::size_t i = 0; i < instances.size(); ++i)
    for (std::size_t c = 0; c < instances[i].candidates.size(); ++c) jobs.push_back({i, c});
  std::vector<std::vector<SentenceChain>> results(jobs.size());
  parallel_for(jobs.size(), config.threads, [&](std::size_t j) {
    const auto& inst = instances[jobs[j].instance];
    results[j] = retrieve_chains(inst.query_tokens, inst.candidates[jobs[j].candidate], index,
                                 config.retrieval);
  });
  for (std::size_t j = 0; j < jobs.size(); ++j) {
    const auto& inst = instances[jobs[j].instance];
    for (std::size_t r = 0; r < results[j].size(); ++r) {
      const SentenceChain& ch = results[j][r];
      out.write({{"id", inst.id},
                 {"candidate_index", jobs[j].candidate},
                 {"candidate", inst.candidate_text(jobs[j].candidate)},
                 {"rank", r + 1},
                 {"s1_id", line_of[ch.s1_id]},
                 {"s2_id", line_of[ch.s2_id]},
                 {"s1", kept[ch.s1_id]},
                 {"s2", kept[ch.s2_id]},
                 {"score", ch.score},
                 {"question_s1", ch.question_s1},
                 {"s1_s2", ch.s1_s2},
                 {"s2_candidate", ch.s2_candidate}});
    }
  }
}

// train

void run_train(const TrainConfig& config, Output& out) {
  const TrainResult result = train(config, [&](const EpochStats& s) {
    json r = s;
    r["type"] = "epoch";
    out.write(r);
    out.stream().flush();
  });
  out.write({{"type", "summary"},
             {"best_dev_accuracy",
              result.best_dev_accuracy ? json(*result.best_dev_accuracy) : json(nullptr)},
             {"best_epoch", result.best_epoch},
             {"epochs_run", result.history.size()},
             {"excluded_instances", result.excluded_instances},
             {"stopped_early", result.stopped_early},
             {"checkpoint", config.checkpoint_path}});
}

// evaluate / explain

struct CheckpointInputs {
  LoadedModel loaded;
  std::vector<QuestionInstance> instances;
};

CheckpointInputs load_for_checkpoint(const std::string& checkpoint, const std::string& data,
                                     TrainConfig config, bool format_given) {
  CheckpointInputs in{load_model(checkpoint), {}};
  const json& meta = in.loaded.meta;
  if (!format_given && meta.contains("format"))
    config.format = parse_dataset_format(meta.at("format").get<std::string>());
  in.instances =
      load_questions(data, config.format, config.corpus_path, config.retrieval, config.threads);
  return in;
}

void run_evaluate(const TrainConfig& config, bool format_given, const std::string& checkpoint,
                  const std::string& data, Output& out) {
  auto in = load_for_checkpoint(checkpoint, data, config, format_given);
  auto& model = in.loaded.model;
  WordVectors words =
      word_vectors_for(in.loaded.embeddings, model.config().embedding_dim, in.instances);
  const auto prepared = prepare_dataset(in.instances, in.loaded.extraction, words, config.threads);
  const EvalReport report = evaluate(model, words, prepared, config.threads);
  for (const auto& p : report.predictions) {
    json r = p;
    r["type"] = "prediction";
    out.write(r);
  }
  out.write({{"type", "summary"},
             {"accuracy", report.accuracy ? json(*report.accuracy) : json(nullptr)},
             {"correct", report.correct},
             {"total", report.total},
             {"unanswerable", report.unanswerable}});
}

void run_explain(const TrainConfig& config, bool format_given, const std::string& checkpoint,
                 const std::string& data, const std::vector<std::string>& ids, std::size_t k,
                 bool text, Output& out) {
  auto in = load_for_checkpoint(checkpoint, data, config, format_given);
  auto& model = in.loaded.model;
  WordVectors words =
      word_vectors_for(in.loaded.embeddings, model.config().embedding_dim, in.instances);
  std::vector<QuestionInstance> chosen;
  if (ids.empty()) {
    chosen = in.instances;
  } else {
    for (const auto& id : ids) {
      auto it = std::find_if(in.instances.begin(), in.instances.end(),
                             [&](const QuestionInstance& q) { return q.id == id; });
      if (it == in.instances.end()) throw Error("explain", "no instance with id '" + id + "'");
      chosen.push_back(*it);
    }
  }
  const auto prepared = prepare_dataset(chosen, in.loaded.extraction, words, config.threads);
  for (std::size_t i = 0; i < chosen.size(); ++i) {
    const Explanation e = explain(model, words, chosen[i], prepared[i], k);
    if (text) {
      out.stream() << format_explanation(e) << '\n';
    } else {
      out.write(e);
    }
  }
}

// gen-synthetic

void write_jsonl(const fs::path& path, const std::vector<json>& records) {
  std::string body;
  for (const auto& r : records) body += r.dump() + '\n';
  write_file_atomic(path, body);
}

void run_gen_synthetic(SyntheticConfig sc, int train_size, int dev_size, const std::string& dir,
                       Output& out) {
  if (train_size < 0 || dev_size < 0 || train_size + dev_size < 1)
    throw Error("config", "train and dev sizes must be non-negative with a positive total");
  sc.instances = train_size + dev_size;
  const SyntheticDataset ds = generate_synthetic(sc);
  fs::create_directories(dir);
  const auto split = ds.records.begin() + train_size;
  write_jsonl(fs::path(dir) / "train.jsonl", {ds.records.begin(), split});
  write_jsonl(fs::path(dir) / "dev.jsonl", {split, ds.records.end()});
  std::vector<json> rules;
  for (const auto& [query, chain] : ds.rules.items()) rules.push_back({{"query", query}, {"chain", chain}});
  write_jsonl(fs::path(dir) / "rules.jsonl", rules);
  out.write({{"type", "summary"},
             {"train", (fs::path(dir) / "train.jsonl").string()},
             {"dev", (fs::path(dir) / "dev.jsonl").string()},
             {"rules", (fs::path(dir) / "rules.jsonl").string()},
             {"train_size", train_size},
             {"dev_size", dev_size},
             {"config", sc}});
}

// grad-check

bool run_grad_check(const TrainConfig& config, GradCheckOptions options,
                    const std::vector<std::string>& compositions, double tolerance,
                    const std::string& data, const std::string& id, Output& out) {
  QuestionInstance instance;
  std::vector<Path> paths;
  if (data.empty()) {
    instance = gradient_check_instance();
    paths = gradient_check_paths(instance);
  } else {
    const auto all = load_questions(data, config.format, config.corpus_path, config.retrieval,
                                    config.threads);
    auto it = std::find_if(all.begin(), all.end(), [&](const QuestionInstance& q) {
      return id.empty() || q.id == id;
    });
    if (it == all.end()) throw Error("grad-check", "no instance with id '" + id + "' in " + data);
    instance = *it;
    paths = extract_paths(instance, config.extraction);
  }
  bool ok = true;
  for (const auto& name : compositions) {
    options.model.composition = parse_composition(name);
    const GradCheckReport r = gradient_check(instance, paths, options);
    const bool passed = r.max_rel_error < tolerance;
    ok = ok && passed;
    out.write({{"composition", name},
               {"instance", instance.id},
               {"paths", paths.size()},
               {"coordinates", r.coordinates},
               {"max_rel_error", r.max_rel_error},
               {"worst_param", r.worst_param},
               {"worst_index", r.worst_index},
               {"worst_analytic", r.worst_analytic},
               {"worst_numeric", r.worst_numeric},
               {"eps", options.eps},
               {"richardson", options.richardson},
               {"tolerance", tolerance},
               {"passed", passed}});
  }
  return ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Path-based multi-hop question answering"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "pathnet 0.1.0");

  Common common;
  Overrides<TrainConfig> o;
  bool warnings = true;
  app.add_flag("!--no-warnings", warnings, "silence warnings on stderr");

  // extract-paths
  auto* extract = app.add_subcommand("extract-paths", "list entity paths per instance");
  std::string data;
  add_common(extract, common);
  extract->add_option("--data", data, "dataset file")->required();
  add_data_overrides(extract, o);

  // retrieve
  auto* retrieve = app.add_subcommand("retrieve", "idf chain retrieval from a sentence corpus");
  std::string corpus, questions;
  bool filter = false;
  add_common(retrieve, common);
  retrieve->add_option("--corpus", corpus, "one sentence per line")->required();
  retrieve->add_option("--questions", questions, "dataset with queries and candidates")->required();
  retrieve->add_flag("--filter", filter, "keep only general-statement sentences");
  o.add<std::string>(retrieve, "--format",
                      [](TrainConfig& c, std::string v) { c.format = parse_dataset_format(v); },
                      "questions format");
  o.add<double>(retrieve, "--threshold", [](TrainConfig& c, double v) { c.retrieval.threshold = v; },
                 "minimum chain score");
  o.add<std::size_t>(retrieve, "--top-k", [](TrainConfig& c, std::size_t v) { c.retrieval.top_k = v; },
                      "chains per candidate");
  o.add<std::size_t>(retrieve, "--beam", [](TrainConfig& c, std::size_t v) { c.retrieval.beam = v; },
                      "first-hop sentences kept");
  o.add<bool>(retrieve, "--prune-prefix",
              [](TrainConfig& c, bool v) { c.retrieval.prune_prefix = v; },
              "apply the threshold to partial products too (true|false)");
  o.add<int>(retrieve, "--threads", [](TrainConfig& c, int v) { c.threads = v; }, "worker threads");

  // train
  auto* train_cmd = app.add_subcommand("train", "train and keep the best-dev checkpoint");
  add_common(train_cmd, common);
  o.add<std::string>(train_cmd, "--train", [](TrainConfig& c, std::string v) { c.train_path = v; },
                     "training set");
  o.add<std::string>(train_cmd, "--dev", [](TrainConfig& c, std::string v) { c.dev_path = v; },
                     "dev set");
  o.add<std::string>(train_cmd, "--checkpoint",
                     [](TrainConfig& c, std::string v) { c.checkpoint_path = v; },
                     "checkpoint to write");
  o.add<int>(train_cmd, "--epochs", [](TrainConfig& c, int v) { c.epochs = v; }, "epoch budget");
  o.add<int>(train_cmd, "--batch-size", [](TrainConfig& c, int v) { c.batch_size = v; },
             "instances per update");
  o.add<double>(train_cmd, "--lr", [](TrainConfig& c, double v) { c.lr = v; }, "Adam step size");
  o.add<double>(train_cmd, "--clipnorm", [](TrainConfig& c, double v) { c.clipnorm = v; },
                "global gradient norm limit");
  o.add<int>(train_cmd, "--patience", [](TrainConfig& c, int v) { c.patience = v; },
             "epochs without dev gain before stopping (0 = never)");
  o.add<std::uint64_t>(train_cmd, "--seed", [](TrainConfig& c, std::uint64_t v) { c.seed = v; },
                       "shuffle and dropout seed");
  o.add<std::uint64_t>(train_cmd, "--init-seed",
                       [](TrainConfig& c, std::uint64_t v) { c.model.init_seed = v; },
                       "parameter initialization seed");
  add_data_overrides(train_cmd, o);
  add_model_overrides(train_cmd, o);

  // evaluate
  auto* eval_cmd = app.add_subcommand("evaluate", "accuracy and per-instance predictions");
  std::string checkpoint;
  add_common(eval_cmd, common);
  eval_cmd->add_option("--checkpoint", checkpoint, "trained checkpoint")->required();
  eval_cmd->add_option("--data", data, "dataset file")->required();
  add_data_overrides(eval_cmd, o);

  // explain
  auto* explain_cmd = app.add_subcommand("explain", "top-scoring paths per instance");
  std::vector<std::string> ids;
  std::size_t k = 2;
  bool text = false;
  add_common(explain_cmd, common);
  explain_cmd->add_option("--checkpoint", checkpoint, "trained checkpoint")->required();
  explain_cmd->add_option("--data", data, "dataset file")->required();
  explain_cmd->add_option("--id", ids, "instance ids (default: all)");
  explain_cmd->add_option("-k,--top", k, "paths per instance")->check(CLI::PositiveNumber);
  explain_cmd->add_flag("--text", text, "human-readable report instead of JSONL");
  add_data_overrides(explain_cmd, o);

  // gen-synthetic
  auto* gen = app.add_subcommand("gen-synthetic", "write a synthetic compositional dataset");
  SyntheticConfig sc;
  int train_size = 500, dev_size = 100;
  std::string out_dir;
  add_common(gen, common);
  gen->add_option("--out-dir", out_dir, "directory for train/dev/rules files")->required();
  auto* sc_entities = gen->add_option("--entities", sc.entities, "entity names");
  auto* sc_relations = gen->add_option("--relations", sc.relations, "relation words per hop");
  auto* sc_rules = gen->add_option("--rules", sc.rules, "query relations");
  auto* sc_hops = gen->add_option("--hops", sc.hops, "hops per gold chain");
  auto* sc_candidates = gen->add_option("--candidates", sc.candidates, "candidates per query");
  auto* sc_filler = gen->add_option("--filler", sc.filler_passages, "unrelated passages");
  auto* sc_seed = gen->add_option("--seed", sc.seed, "generator seed");
  gen->add_option("--train-size", train_size, "training instances");
  gen->add_option("--dev-size", dev_size, "dev instances");

  // grad-check
  auto* gc = app.add_subcommand("grad-check", "finite-difference check of the loss gradient");
  GradCheckOptions gco;
  std::vector<std::string> compositions{"ffl", "ffl_shared", "gru", "lstm"};
  double tolerance = 1e-4;
  bool central_only = false;
  std::string gc_id;
  add_common(gc, common);
  gc->add_option("--composition", compositions, "methods to check")->delimiter(',');
  gc->add_option("--hidden", gco.model.hidden, "H");
  gc->add_option("--embedding-dim", gco.model.embedding_dim, "word vector size");
  gc->add_option("--eps", gco.eps, "finite-difference step");
  gc->add_flag("--central", central_only, "plain central differences, no extrapolation");
  gc->add_option("--tolerance", tolerance, "largest accepted relative error");
  gc->add_option("--data", data, "dataset file (default: built-in toy instance)");
  gc->add_option("--id", gc_id, "instance id within --data (default: first)");
  add_data_overrides(gc, o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << error_json("usage", e.what()).dump() << '\n';
    return kExitUsage;
  }

  set_warnings_enabled(warnings);
  try {
    TrainConfig config = load_train_config(common);
    o.apply(config);
    Output out(common.out);
    const auto given = [](CLI::App* cmd, const char* name) { return cmd->count(name) > 0; };

    if (*extract) {
      run_extract_paths(config, data, out);
    } else if (*retrieve) {
      run_retrieve(config, corpus, questions, filter, out);
    } else if (*train_cmd) {
      run_train(config, out);
    } else if (*eval_cmd) {
      run_evaluate(config, given(eval_cmd, "--format"), checkpoint, data, out);
    } else if (*explain_cmd) {
      run_explain(config, given(explain_cmd, "--format"), checkpoint, data, ids, k, text, out);
    } else if (*gen) {
      SyntheticConfig merged;
      if (!common.config_path.empty()) {
        const json doc = read_json_file(common.config_path);
        if (doc.contains("synthetic")) from_json(doc.at("synthetic"), merged);
      }
      if (sc_entities->count()) merged.entities = sc.entities;
      if (sc_relations->count()) merged.relations = sc.relations;
      if (sc_rules->count()) merged.rules = sc.rules;
      if (sc_hops->count()) merged.hops = sc.hops;
      if (sc_candidates->count()) merged.candidates = sc.candidates;
      if (sc_filler->count()) merged.filler_passages = sc.filler_passages;
      if (sc_seed->count()) merged.seed = sc.seed;
      run_gen_synthetic(merged, train_size, dev_size, out_dir, out);
    } else if (*gc) {
      gco.richardson = !central_only;
      if (!run_grad_check(config, gco, compositions, tolerance, data, gc_id, out)) {
        std::cerr << error_json("grad-check", "relative error above " + std::to_string(tolerance))
                         .dump()
                  << '\n';
        return kExitFailure;
      }
    }
  } catch (const Error& e) {
    std::cerr << error_json(e.kind(), e.what()).dump() << '\n';
    return kExitFailure;
  } catch (const std::exception& e) {
    std::cerr << error_json("internal", e.what()).dump() << '\n';
    return kExitFailure;
  }
  return 0;
}
