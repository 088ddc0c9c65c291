#include "pathnet/embeddings.hpp"

#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <random>

#include "pathnet/error.hpp"
#include "pathnet/text.hpp"

namespace pathnet {

std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::vector<double> EmbeddingTable::oov_vector(const std::string& word) const {
  std::mt19937_64 gen(seed_ * 0x9E3779B97F4A7C15ULL ^ fnv1a64(word));
  std::vector<double> v(static_cast<std::size_t>(dim_));
  for (auto& x : v) {
    const double u = static_cast<double>(gen() >> 11) * 0x1.0p-53;  // [0, 1)
    x = -0.1 + 0.2 * u;
  }
  return v;
}

std::vector<double> EmbeddingTable::lookup(const std::string& word) const {
  auto it = vectors_.find(word);
  if (it != vectors_.end()) return it->second;
  return oov_vector(word);
}

void EmbeddingTable::set(const std::string& word, std::vector<double> vec, bool pretrained) {
  if (static_cast<int>(vec.size()) != dim_)
    throw ShapeError("embedding for '" + word + "' has " + std::to_string(vec.size()) +
                     " values, expected " + std::to_string(dim_));
  auto [it, inserted] = vectors_.insert_or_assign(word, std::move(vec));
  (void)it;
  if (pretrained && inserted) ++pretrained_;
}

EmbeddingTable EmbeddingTable::random(const std::set<std::string>& vocab, int dim,
                                      std::uint64_t seed) {
  EmbeddingTable table(dim, seed);
  for (const auto& w : vocab) table.set(w, table.oov_vector(w), false);
  return table;
}

EmbeddingTable load_embeddings(const std::filesystem::path& path,
                               const std::set<std::string>& vocab, std::uint64_t seed, int dim) {
  std::ifstream in(path);
  if (!in) throw Error("io", "cannot open embedding file '" + path.string() + "'");
  EmbeddingTable table(dim, seed);
  std::string line;
  std::size_t line_no = 0;
  std::vector<double> values;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(' ') == std::string::npos) continue;
    const auto word_end = line.find(' ');
    if (word_end == std::string::npos)
      throw FormatError(path.string(), line_no, "expected a word followed by floats");
    const std::string word = ascii_lower(line.substr(0, word_end));

    values.clear();
    const char* p = line.c_str() + word_end;
    while (true) {
      while (*p == ' ' || *p == '\t') ++p;
      if (*p == '\0') break;
      char* end = nullptr;
      errno = 0;
      const double v = std::strtod(p, &end);
      if (end == p || errno == ERANGE)
        throw FormatError(path.string(), line_no, "unparsable float");
      values.push_back(v);
      p = end;
    }
    if (static_cast<int>(values.size()) != dim)
      throw FormatError(path.string(), line_no,
                        "dimension mismatch: " + std::to_string(values.size()) +
                            " floats, expected " + std::to_string(dim));
    if (vocab.count(word) && !table.contains(word)) table.set(word, values, true);
  }
  for (const auto& w : vocab) {
    if (!table.contains(w)) table.set(w, table.oov_vector(w), false);
  }
  return table;
}

}  // namespace pathnet
