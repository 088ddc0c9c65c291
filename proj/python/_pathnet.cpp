// Python bindings. Structured values cross the boundary as JSON text; the
// pure-Python wrapper in pathnet/__init__.py converts them to dicts.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "pathnet/error.hpp"
#include "pathnet/harness.hpp"
#include "pathnet/synthetic.hpp"

namespace py = pybind11;
using nlohmann::json;
using namespace pathnet;

namespace {

std::vector<QuestionInstance> parse_records(const std::string& records, const std::string& format) {
  const json arr = json::parse(records);
  const auto fmt = parse_dataset_format(format);
  std::vector<QuestionInstance> out;
  for (const auto& r : arr) out.push_back(parse_record(r, fmt));
  return out;
}

std::string extract(const std::string& record, const std::string& format, const std::string& config) {
  ExtractionConfig cfg = json::parse(config).get<ExtractionConfig>();
  cfg.validate();
  const auto inst = parse_record(json::parse(record), parse_dataset_format(format));
  py::gil_scoped_release release;
  return json(extract_paths(inst, cfg)).dump();
}

std::string retrieve(const std::vector<std::string>& corpus, const std::string& question,
                     const std::string& candidate, const std::string& config) {
  const RetrievalConfig cfg = json::parse(config).get<RetrievalConfig>();
  py::gil_scoped_release release;
  const auto index = build_idf_index(corpus);
  json out = json::array();
  for (const auto& c : retrieve_chains(tokenize(question), tokenize(candidate), index, cfg)) {
    out.push_back({{"s1_id", c.s1_id},
                   {"s2_id", c.s2_id},
                   {"score", c.score},
                   {"question_s1", c.question_s1},
                   {"s1_s2", c.s1_s2},
                   {"s2_candidate", c.s2_candidate}});
  }
  return out.dump();
}

std::string synthetic(const std::string& config) {
  const SyntheticConfig cfg = json::parse(config).get<SyntheticConfig>();
  py::gil_scoped_release release;
  const auto ds = generate_synthetic(cfg);
  return json{{"rules", ds.rules}, {"records", ds.records}}.dump();
}

std::string train_model(const std::string& config) {
  const TrainConfig cfg = json::parse(config).get<TrainConfig>();
  py::gil_scoped_release release;
  const TrainResult r = train(cfg);
  json history = json::array();
  for (const auto& s : r.history) history.push_back(s);
  return json{{"history", history},
              {"best_dev_accuracy", r.best_dev_accuracy ? json(*r.best_dev_accuracy) : json(nullptr)},
              {"best_epoch", r.best_epoch},
              {"excluded_instances", r.excluded_instances},
              {"stopped_early", r.stopped_early}}
      .dump();
}

struct Loaded {
  LoadedModel model;
  std::vector<QuestionInstance> instances;
  WordVectors words;
  std::vector<PreparedInstance> prepared;
};

Loaded load(const std::string& checkpoint, const std::string& records, const std::string& format) {
  LoadedModel m = load_model(checkpoint);
  std::string fmt = format;
  if (fmt.empty()) fmt = m.meta.value("format", std::string("wikihop"));
  auto instances = parse_records(records, fmt);
  WordVectors words = word_vectors_for(m.embeddings, m.model.config().embedding_dim, instances);
  auto prepared = prepare_dataset(instances, m.extraction, words);
  return {std::move(m), std::move(instances), std::move(words), std::move(prepared)};
}

std::string evaluate_model(const std::string& checkpoint, const std::string& records,
                           const std::string& format) {
  py::gil_scoped_release release;
  const Loaded l = load(checkpoint, records, format);
  return json(evaluate(l.model.model, l.words, l.prepared)).dump();
}

std::string explain_model(const std::string& checkpoint, const std::string& records,
                          const std::string& format, std::size_t k) {
  py::gil_scoped_release release;
  const Loaded l = load(checkpoint, records, format);
  json out = json::array();
  for (std::size_t i = 0; i < l.instances.size(); ++i)
    out.push_back(explain(l.model.model, l.words, l.instances[i], l.prepared[i], k));
  return out.dump();
}

std::string grad_check(const std::string& composition, int hidden, int embedding_dim, double eps) {
  GradCheckOptions opt;
  opt.model.composition = parse_composition(composition);
  opt.model.hidden = hidden;
  opt.model.embedding_dim = embedding_dim;
  opt.eps = eps;
  py::gil_scoped_release release;
  const auto inst = gradient_check_instance();
  const auto r = gradient_check(inst, gradient_check_paths(inst), opt);
  return json{{"max_rel_error", r.max_rel_error},
              {"coordinates", r.coordinates},
              {"worst_param", r.worst_param},
              {"worst_index", r.worst_index},
              {"worst_analytic", r.worst_analytic},
              {"worst_numeric", r.worst_numeric}}
      .dump();
}

}  // namespace

PYBIND11_MODULE(_pathnet, m) {
  m.doc() = "Native core of the pathnet package";
  // Leaked on purpose: the type must outlive interpreter teardown.
  static py::handle error = py::exception<Error>(m, "PathNetError").release();
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::set_error(error, (e.kind() + ": " + e.what()).c_str());
    } catch (const json::exception& e) {
      py::set_error(error, (std::string("json: ") + e.what()).c_str());
    }
  });

  m.def("tokenize", [](const std::string& text) {
    std::vector<std::string> out;
    for (const auto& t : tokenize(text)) out.push_back(t.text);
    return out;
  });
  m.def("extract_paths", &extract, py::arg("record"), py::arg("format"), py::arg("config"));
  m.def("retrieve", &retrieve, py::arg("corpus"), py::arg("question"), py::arg("candidate"),
        py::arg("config"));
  m.def("generate_synthetic", &synthetic, py::arg("config"));
  m.def("train", &train_model, py::arg("config"));
  m.def("evaluate", &evaluate_model, py::arg("checkpoint"), py::arg("records"), py::arg("format"));
  m.def("explain", &explain_model, py::arg("checkpoint"), py::arg("records"), py::arg("format"),
        py::arg("k"));
  m.def("gradient_check", &grad_check, py::arg("composition"), py::arg("hidden"),
        py::arg("embedding_dim"), py::arg("eps"));
  m.def("set_warnings_enabled", &set_warnings_enabled);
}
