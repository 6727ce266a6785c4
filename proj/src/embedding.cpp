#include "textcrs/embedding.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace textcrs {

EmbeddingTable load_embedding_table(std::istream& in, int expected_dim) {
  if (expected_dim < 1) {
    throw std::domain_error("load_embedding_table: expected_dim < 1");
  }
  EmbeddingTable table;
  table.dim = expected_dim;
  std::string line;
  long long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    if (word.empty()) continue;
    std::vector<double> v(expected_dim);
    for (int i = 0; i < expected_dim; ++i) {
      if (!(ls >> v[i])) {
        throw std::runtime_error("embedding parse error at line " +
                                 std::to_string(lineno) + ": expected " +
                                 std::to_string(expected_dim) + " values");
      }
    }
    double extra;
    if (ls >> extra) {
      throw std::runtime_error("embedding parse error at line " +
                               std::to_string(lineno) + ": more than " +
                               std::to_string(expected_dim) + " values");
    }
    if (table.index.count(word)) {
      throw std::runtime_error("duplicate word '" + word + "' at line " +
                               std::to_string(lineno));
    }
    table.index.emplace(word, table.size());
    table.words.push_back(word);
    table.vectors.push_back(std::move(v));
  }
  if (table.words.empty()) {
    throw std::runtime_error("embedding file holds no records");
  }
  if (!table.index.count(EmbeddingTable::kPadWord)) {
    table.index.emplace(EmbeddingTable::kPadWord, table.size());
    table.words.push_back(EmbeddingTable::kPadWord);
    table.vectors.emplace_back(expected_dim, 0.0);
  }
  table.pad_id = table.index.at(EmbeddingTable::kPadWord);
  return table;
}

EmbeddingTable load_embedding_file(const std::string& path, int expected_dim) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open embedding file: " + path);
  return load_embedding_table(in, expected_dim);
}

double cosine_similarity(const std::vector<double>& v1,
                         const std::vector<double>& v2) {
  if (v1.size() != v2.size()) {
    throw std::domain_error("cosine_similarity: dimension mismatch");
  }
  double dot = 0.0, n1 = 0.0, n2 = 0.0;
  for (size_t i = 0; i < v1.size(); ++i) {
    dot += v1[i] * v2[i];
    n1 += v1[i] * v1[i];
    n2 += v2[i] * v2[i];
  }
  if (n1 == 0.0 || n2 == 0.0) {
    throw std::domain_error("cosine_similarity: zero vector");
  }
  double c = dot / (std::sqrt(n1) * std::sqrt(n2));
  return std::min(1.0, std::max(-1.0, c));
}

int similarity_interval(double sim, int s) {
  int k = static_cast<int>(std::lround((1.0 - sim) * s));
  return std::min(s, std::max(1, k));
}

SynonymTable build_synonym_table(const EmbeddingTable& table, int s) {
  if (s < 1) throw std::domain_error("build_synonym_table: s < 1");
  // Pad never participates; require s strictly smaller than the usable vocab.
  int usable = table.size() - 1;
  if (usable <= s) {
    throw std::domain_error("build_synonym_table: s must be < vocabulary size");
  }
  SynonymTable syn;
  syn.radius_s = s;
  syn.epsilon_stair = 5.0 / s;
  syn.source = &table;

  struct Scored {
    double sim;
    int id;
  };
  for (int w = 0; w < table.size(); ++w) {
    if (w == table.pad_id) continue;
    const auto& base = table.vec(w);
    bool zero = true;
    for (double x : base) {
      if (x != 0.0) { zero = false; break; }
    }
    if (zero) {
      syn.skipped.push_back(table.words[w]);
      continue;
    }
    std::vector<Scored> scored;
    scored.reserve(table.size());
    for (int v = 0; v < table.size(); ++v) {
      if (v == w || v == table.pad_id) continue;
      bool vzero = true;
      for (double x : table.vec(v)) {
        if (x != 0.0) { vzero = false; break; }
      }
      if (vzero) continue;
      scored.push_back({cosine_similarity(base, table.vec(v)), v});
    }
    // Descending similarity, ties by load order.
    std::stable_sort(scored.begin(), scored.end(),
                     [](const Scored& a, const Scored& b) {
                       if (a.sim != b.sim) return a.sim > b.sim;
                       return a.id < b.id;
                     });
    std::vector<SynonymEntry> list;
    list.reserve(s);
    for (int i = 0; i < s && i < static_cast<int>(scored.size()); ++i) {
      SynonymEntry e;
      e.id = scored[i].id;
      e.word = table.words[e.id];
      e.similarity = scored[i].sim;
      e.interval = similarity_interval(e.similarity, s);
      list.push_back(std::move(e));
    }
    syn.entries.emplace(table.words[w], std::move(list));
  }
  return syn;
}

void save_synonym_table(const SynonymTable& table, std::ostream& out) {
  nlohmann::json root;
  root["s"] = table.radius_s;
  root["epsilon"] = table.epsilon_stair;
  nlohmann::json words = nlohmann::json::object();
  for (const auto& [word, list] : table.entries) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& e : list) {
      arr.push_back({{"syn", e.word}, {"sim", e.similarity}, {"interval", e.interval}});
    }
    words[word] = std::move(arr);
  }
  root["words"] = std::move(words);
  out << root.dump(2) << "\n";
}

SynonymTable load_synonym_table(std::istream& in, const EmbeddingTable& table) {
  nlohmann::json root = nlohmann::json::parse(in);
  SynonymTable syn;
  syn.source = &table;
  syn.radius_s = root.at("s").get<int>();
  syn.epsilon_stair = root.at("epsilon").get<double>();
  for (const auto& [word, arr] : root.at("words").items()) {
    std::vector<SynonymEntry> list;
    for (const auto& item : arr) {
      SynonymEntry e;
      e.word = item.at("syn").get<std::string>();
      e.similarity = item.at("sim").get<double>();
      e.interval = item.at("interval").get<int>();
      e.id = table.lookup(e.word);
      if (e.id < 0) {
        throw std::runtime_error("synonym table word not in embedding table: " +
                                 e.word);
      }
      list.push_back(std::move(e));
    }
    syn.entries.emplace(word, std::move(list));
  }
  return syn;
}

std::vector<double> EncodedInstance::rendered() const {
  std::vector<double> out(static_cast<size_t>(n) * d);
  for (int i = 0; i < n; ++i) {
    const double* src = row(i);
    double* dst = out.data() + static_cast<size_t>(position_map[i]) * d;
    std::copy(src, src + d, dst);
  }
  return out;
}

int EncodedInstance::alive_count() const {
  int count = 0;
  for (int t : token_ids) {
    if (t != pad_token) ++count;
  }
  return count;
}

EncodedInstance encode_instance(const std::vector<std::string>& tokens, int n,
                                const EmbeddingTable& table, int label) {
  if (n < 1) throw std::domain_error("encode_instance: n < 1");
  EncodedInstance inst;
  inst.n = n;
  inst.d = table.dim;
  inst.label = label;
  inst.pad_token = table.pad_id;
  inst.token_ids.assign(n, table.pad_id);
  inst.position_map.resize(n);
  inst.embedding.assign(static_cast<size_t>(n) * table.dim, 0.0);
  int m = std::min<int>(n, static_cast<int>(tokens.size()));
  for (int i = 0; i < m; ++i) {
    int id = table.lookup(tokens[i]);
    if (id < 0) id = table.pad_id;  // unknown tokens map to pad
    inst.token_ids[i] = id;
    const auto& v = table.vec(id);
    std::copy(v.begin(), v.end(), inst.row(i));
  }
  for (int i = 0; i < n; ++i) inst.position_map[i] = i;
  return inst;
}

std::vector<double> compute_ogn_mean(const EmbeddingTable& table) {
  std::vector<double> mean(table.dim, 0.0);
  long long count = 0;
  for (int w = 0; w < table.size(); ++w) {
    if (w == table.pad_id) continue;
    const auto& v = table.vec(w);
    for (int j = 0; j < table.dim; ++j) mean[j] += v[j];
    ++count;
  }
  if (count == 0) throw std::domain_error("compute_ogn_mean: empty vocabulary");
  for (double& x : mean) x /= static_cast<double>(count);
  return mean;
}

}  // namespace textcrs
