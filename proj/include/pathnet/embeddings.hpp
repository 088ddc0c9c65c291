#pragma once

#include <cstdint>
#include <filesystem>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

namespace pathnet {

/// Frozen word vectors. Words are keyed by their lowercase form. Lookups of
/// words without a stored vector return a vector drawn uniformly from
/// [-0.1, 0.1] by a generator seeded from (seed, word), so the result does
/// not depend on vocabulary order or on which thread asks.
class EmbeddingTable {
 public:
  EmbeddingTable(int dim, std::uint64_t seed) : dim_(dim), seed_(seed) {}

  int dim() const { return dim_; }
  std::uint64_t seed() const { return seed_; }
  std::size_t size() const { return vectors_.size(); }
  bool contains(const std::string& word) const { return vectors_.count(word) > 0; }
  /// Number of entries that came from a pretrained file.
  std::size_t pretrained_count() const { return pretrained_; }

  /// Stored vector, or the seeded OOV vector for unknown words.
  std::vector<double> lookup(const std::string& word) const;

  void set(const std::string& word, std::vector<double> vec, bool pretrained);
  std::vector<double> oov_vector(const std::string& word) const;

  /// Table holding exactly `vocab`, every entry an OOV vector.
  static EmbeddingTable random(const std::set<std::string>& vocab, int dim, std::uint64_t seed);

 private:
  int dim_;
  std::uint64_t seed_;
  std::size_t pretrained_ = 0;
  std::unordered_map<std::string, std::vector<double>> vectors_;
};

/// Reads a whitespace-separated text embedding file (word followed by `dim`
/// floats per line). The table contains exactly `vocab`: in-file words carry
/// the file vector, the rest get OOV vectors. A line with the wrong number
/// of floats raises FormatError with its line number.
EmbeddingTable load_embeddings(const std::filesystem::path& path,
                               const std::set<std::string>& vocab, std::uint64_t seed,
                               int dim = 300);

std::uint64_t fnv1a64(std::string_view s);

}  // namespace pathnet
