#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "pathnet/corpus.hpp"
#include "pathnet/embeddings.hpp"
#include "pathnet/error.hpp"
#include "pathnet/text.hpp"

using namespace pathnet;
namespace fs = std::filesystem;

namespace {

std::vector<std::string> texts(const std::vector<Token>& tokens) {
  std::vector<std::string> out;
  for (const auto& t : tokens) out.push_back(t.text);
  return out;
}

std::vector<std::string> surfaces(const std::vector<MentionSpan>& spans) {
  std::vector<std::string> out;
  for (const auto& s : spans) out.push_back(s.surface);
  return out;
}

bool contains(const std::vector<std::string>& v, const std::string& s) {
  return std::find(v.begin(), v.end(), s) != v.end();
}

fs::path temp_file(const std::string& name, const std::string& content) {
  const fs::path p = fs::temp_directory_path() / ("pathnet_test_" + name);
  std::ofstream(p) << content;
  return p;
}

// Printable ASCII with spaces, punctuation and the odd abbreviation.
std::string random_text(std::mt19937_64& rng) {
  static const char* pieces[] = {"Zoo", "Lake", ".", ",", "U.K.", "-", "based", "Dr.", "smith",
                                 "'s", "(", ")", "42", "e.g.", "!", "?", "  ", "\t", "x"};
  std::string s;
  const std::size_t n = rng() % 12;
  for (std::size_t i = 0; i < n; ++i) {
    s += pieces[rng() % std::size(pieces)];
    if (rng() % 2) s += ' ';
  }
  return s;
}

}  // namespace

TEST_CASE("tokenize splits words and punctuation") {
  CHECK(texts(tokenize("Zoo Lake.")) == std::vector<std::string>{"Zoo", "Lake", "."});
  CHECK(tokenize("").empty());
  CHECK(texts(tokenize("U.K.-based")) == std::vector<std::string>{"U.K.", "-", "based"});
  const auto t = tokenize("Hello World");
  CHECK(t[1].lowercase == "world");
  CHECK(t[1].char_offset == 6);
}

TEST_CASE("tokenize property: tokens are exact substrings covering every non-space byte") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 500; ++trial) {
    const std::string text = random_text(rng);
    std::vector<bool> covered(text.size(), false);
    for (const auto& tok : tokenize(text)) {
      REQUIRE(tok.char_offset + tok.text.size() <= text.size());
      CHECK(text.substr(tok.char_offset, tok.text.size()) == tok.text);
      CHECK(tok.lowercase == ascii_lower(tok.text));
      for (std::size_t i = 0; i < tok.text.size(); ++i) {
        CHECK_FALSE(covered[tok.char_offset + i]);
        covered[tok.char_offset + i] = true;
      }
    }
    for (std::size_t i = 0; i < text.size(); ++i)
      CHECK(covered[i] == !std::isspace(static_cast<unsigned char>(text[i])));
  }
}

TEST_CASE("segment_sentences") {
  const auto ranges = segment_sentences(tokenize("A. B!"));
  REQUIRE(ranges.size() == 2);
  CHECK(ranges[0] == TokenRange{0, 2});
  CHECK(ranges[1] == TokenRange{2, 4});
  const auto one = segment_sentences(tokenize("no terminal punctuation here"));
  REQUIRE(one.size() == 1);
  CHECK(one[0] == TokenRange{0, 4});
  CHECK(segment_sentences({}).empty());
  CHECK(segment_sentences(tokenize("Dr. Smith came. He left.")).size() == 2);
}

TEST_CASE("segment_sentences property: ranges tile the token list") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 300; ++trial) {
    const auto tokens = tokenize(random_text(rng));
    const auto ranges = segment_sentences(tokens);
    std::size_t next = 0;
    for (const auto& r : ranges) {
      CHECK(r.begin == next);
      CHECK(r.end > r.begin);
      next = r.end;
    }
    CHECK(next == tokens.size());
  }
}

TEST_CASE("find_mentions") {
  const Passage p = make_passage(0, "Nearby, Zoo Lake is a popular lake in the park.");
  const auto spans = find_mentions(p, {"zoo lake"});
  REQUIRE(spans.size() == 1);
  CHECK(spans[0].surface == "Zoo Lake");
  CHECK(spans[0].token_start == 2);
  CHECK(spans[0].token_end == 3);
  CHECK(spans[0].entity_key == "zoo lake");
  CHECK(find_mentions(p, {"Moon"}).empty());

  const Passage twice = make_passage(1, "Ada met Bo. Later Ada left.");
  const auto both = find_mentions(twice, {"Ada"});
  REQUIRE(both.size() == 2);
  CHECK(both[0].token_start == 0);
  CHECK(both[1].token_start == 5);
}

TEST_CASE("find_mentions property: spans lie inside the passage and match the entity") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 300; ++trial) {
    const Passage p = make_passage(0, random_text(rng) + " Zoo Lake " + random_text(rng));
    for (const auto& s : find_mentions(p, {"zoo lake", "lake", "x"})) {
      CHECK(s.token_start <= s.token_end);
      CHECK(s.token_end < p.tokens.size());
    }
  }
}

TEST_CASE("candidate_entities") {
  const auto a = surfaces(candidate_entities(make_passage(0, "Belinda Carlisle released the album.")));
  CHECK(contains(a, "Belinda Carlisle"));
  CHECK(contains(a, "album"));
  CHECK(candidate_entities(make_passage(0, "it is what it is.")).empty());
  CHECK(contains(surfaces(candidate_entities(make_passage(0, "the Gap Cycle"))), "Gap Cycle"));
  // Deterministic: same passage, same list.
  const Passage p = make_passage(0, "Belinda Carlisle sang for Chrysalis Records in Los Angeles.");
  CHECK(candidate_entities(p) == candidate_entities(p));
  // Annotated entities join the list.
  Passage q = make_passage(0, "the quick fox jumps");
  q.annotated_entities = {"quick fox"};
  CHECK(contains(surfaces(candidate_entities(q)), "quick fox"));
}

TEST_CASE("parse_record handles the WikiHop-like layout") {
  const nlohmann::json rec = {{"id", "x1"},
                              {"query", "record_label always breaking my heart"},
                              {"candidates", {"chrysalis records", "emi"}},
                              {"supports", {"Always Breaking My Heart is a song.", "EMI exists."}},
                              {"answer", "chrysalis records"}};
  const auto q = parse_record(rec, DatasetFormat::wikihop);
  CHECK(q.head_entities == std::vector<std::string>{"always breaking my heart"});
  CHECK(q.answer_index == std::optional<std::size_t>(0));
  CHECK(q.passages.size() == 2);

  auto no_answer = rec;
  no_answer.erase("answer");
  CHECK_FALSE(parse_record(no_answer, DatasetFormat::wikihop).answer_index.has_value());

  const nlohmann::json obj_query = {{"id", "x2"},
                                    {"query", {{"relation", "record_label"}, {"head", "Ada"}}},
                                    {"candidates", {"a", "b"}},
                                    {"supports", nlohmann::json::array()}};
  CHECK(parse_record(obj_query, DatasetFormat::wikihop).head_entities ==
        std::vector<std::string>{"ada"});
}

TEST_CASE("parse_record handles the OpenBookQA-like layout") {
  const nlohmann::json rec = {{"id", "o1"},
                              {"question", "Which part of plants absorbs water?"},
                              {"choices", {"roots", "flowers", "fruit", "bark"}},
                              {"answer_key", "A"}};
  const auto q = parse_record(rec, DatasetFormat::openbookqa);
  CHECK(q.candidates.size() == 4);
  CHECK(q.answer_index == std::optional<std::size_t>(0));
  CHECK(q.passages.empty());
}

TEST_CASE("parse errors name the record and field") {
  const nlohmann::json bad = {{"id", "broken"}, {"candidates", {"a", "b"}}};
  try {
    parse_record(bad, DatasetFormat::wikihop);
    FAIL("expected DatasetError");
  } catch (const DatasetError& e) {
    CHECK(e.record_id() == "broken");
    CHECK(e.field() == "query");
  }
  CHECK_THROWS_AS(parse_dataset("{\"id\": 1,\n{oops", DatasetFormat::wikihop), FormatError);
}

TEST_CASE("load_dataset accepts JSON arrays and JSON lines") {
  CHECK(load_dataset(temp_file("empty.json", ""), DatasetFormat::wikihop).empty());
  const std::string rec =
      R"({"id":"a","query":"r Ada","candidates":["Bo","Cy"],"supports":["Ada met Bo."],"answer":"Bo"})";
  CHECK(load_dataset(temp_file("arr.json", "[" + rec + "]"), DatasetFormat::wikihop).size() == 1);
  CHECK(load_dataset(temp_file("lines.jsonl", rec + "\n\n" + rec + "\n"), DatasetFormat::synthetic)
            .size() == 2);
  CHECK_THROWS_AS(load_dataset("/nonexistent/file.json", DatasetFormat::wikihop), Error);
}

TEST_CASE("QuestionInstance JSON round trip is the identity") {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 100; ++trial) {
    QuestionInstance q;
    q.id = "q" + std::to_string(trial);
    q.query_tokens = tokenize(random_text(rng));
    q.head_entities = {"zoo lake"};
    for (int c = 0; c < 3; ++c) {
      q.candidates.push_back(tokenize("cand " + std::to_string(c)));
      q.candidate_tails.push_back({"cand " + std::to_string(c)});
    }
    for (int p = 0; p < static_cast<int>(rng() % 4); ++p)
      q.passages.push_back(make_passage(p, random_text(rng)));
    if (trial % 2) q.answer_index = trial % 3;
    const nlohmann::json j = q;
    CHECK(j.get<QuestionInstance>() == q);
  }
}

TEST_CASE("embedding table") {
  const auto path = temp_file("emb.txt", "lake 0.5 -0.25 1\nzoo 1e-3 2 3\n");
  const std::set<std::string> vocab{"lake", "river"};
  const auto table = load_embeddings(path, vocab, 7, 3);
  CHECK(table.lookup("lake") == std::vector<double>{0.5, -0.25, 1.0});
  CHECK(table.pretrained_count() == 1);
  CHECK_FALSE(table.contains("zoo"));  // not in vocab

  const auto again = load_embeddings(path, vocab, 7, 3);
  CHECK(table.lookup("river") == again.lookup("river"));
  for (double v : table.lookup("river")) CHECK(std::abs(v) <= 0.1);
  CHECK(EmbeddingTable(3, 8).oov_vector("river") != table.oov_vector("river"));

  try {
    load_embeddings(temp_file("emb_bad.txt", "lake 1 2 3\nriver 1 2\n"), vocab, 7, 3);
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(e.line() == 2);
  }
}
