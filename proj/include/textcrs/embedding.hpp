#pragma once

#include <iosfwd>
#include <string>
#include <unordered_map>
#include <vector>

namespace textcrs {

// Frozen word-embedding layer. The pad word maps to the all-zero vector and
// is always present; entries keep file load order for deterministic
// tie-breaking in nearest-neighbor queries.
struct EmbeddingTable {
  static constexpr const char* kPadWord = "<pad>";

  int dim = 0;
  std::vector<std::string> words;
  std::vector<std::vector<double>> vectors;
  std::unordered_map<std::string, int> index;
  int pad_id = -1;

  int size() const { return static_cast<int>(words.size()); }
  // Returns -1 for unknown words.
  int lookup(const std::string& word) const {
    auto it = index.find(word);
    return it == index.end() ? -1 : it->second;
  }
  const std::vector<double>& vec(int id) const { return vectors[id]; }
};

// Parses the GloVe text convention: one record per line,
// `word v1 v2 ... vd`, whitespace separated. A synthesized pad entry is
// appended. Throws std::runtime_error naming the offending line on dimension
// mismatches or duplicate words.
EmbeddingTable load_embedding_table(std::istream& in, int expected_dim);
EmbeddingTable load_embedding_file(const std::string& path, int expected_dim);

// Standard cosine similarity; throws std::domain_error on zero vectors.
double cosine_similarity(const std::vector<double>& v1,
                         const std::vector<double>& v2);

struct SynonymEntry {
  std::string word;
  int id = -1;
  double similarity = 0.0;
  int interval = 0;  // staircase interval index in [1, s]
};

// Per word: the s nearest vocabulary words by cosine similarity, descending,
// with staircase interval indices. The word itself implicitly sits at
// interval 0.
struct SynonymTable {
  int radius_s = 0;
  double epsilon_stair = 0.0;  // 5 / s
  const EmbeddingTable* source = nullptr;
  std::unordered_map<std::string, std::vector<SynonymEntry>> entries;
  std::vector<std::string> skipped;  // words with undefined similarity

  const std::vector<SynonymEntry>* find(const std::string& word) const {
    auto it = entries.find(word);
    return it == entries.end() ? nullptr : &it->second;
  }
  const std::vector<SynonymEntry>* find_id(int token_id) const {
    return find(source->words[token_id]);
  }
};

// Staircase interval for a cosine similarity: clamp(round((1 - sim) * s), 1, s).
int similarity_interval(double sim, int s);

// Exact brute-force nearest-neighbor construction. Ties broken by load order.
SynonymTable build_synonym_table(const EmbeddingTable& table, int s);

// JSON persistence: {word: [{"syn":..., "sim":..., "interval":...}]}.
void save_synonym_table(const SynonymTable& table, std::ostream& out);
SynonymTable load_synonym_table(std::istream& in, const EmbeddingTable& table);

// Fixed-length instance: storage rows plus the position map r (row i renders
// at position r[i]). token_ids track row semantics: pad_token marks pad or
// deleted rows, -1 marks non-vocabulary content (inserted vectors).
struct EncodedInstance {
  int n = 0;
  int d = 0;
  int label = 0;  // 0-based class id
  int pad_token = -1;
  std::vector<int> token_ids;
  std::vector<int> position_map;
  std::vector<double> embedding;  // n x d, row-major

  double* row(int i) { return embedding.data() + static_cast<size_t>(i) * d; }
  const double* row(int i) const {
    return embedding.data() + static_cast<size_t>(i) * d;
  }
  // Rendered model input: rendered row p holds the storage row with
  // position_map[i] == p.
  std::vector<double> rendered() const;
  int alive_count() const;
};

// Pads with zero rows to length n (or keeps the first n tokens when longer);
// unknown tokens map to pad. position_map starts as the identity.
EncodedInstance encode_instance(const std::vector<std::string>& tokens, int n,
                                const EmbeddingTable& table, int label);

// Per-dimension arithmetic mean over all non-pad vocabulary vectors.
std::vector<double> compute_ogn_mean(const EmbeddingTable& table);

}  // namespace textcrs
