#include "textcrs/corpus.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <vector>

#include "textcrs/rng.hpp"

namespace textcrs {

namespace {

void write_text(std::ofstream& out, const std::vector<std::string>& words,
                int label, const std::vector<int>& tokens) {
  out << label << ",";
  for (size_t i = 0; i < tokens.size(); ++i) {
    out << (i ? " " : "") << words[tokens[i]];
  }
  out << "\n";
}

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6f", x);
  return buf;
}

}  // namespace

void generate_corpus(const CorpusSpec& spec, const std::string& out_dir) {
  if (spec.train_size < 1 || spec.test_size < 1) {
    throw std::domain_error("generate_corpus: sizes must be positive");
  }
  if (spec.vocab < 4 * spec.keywords || spec.length < 2 || spec.dim < 3) {
    throw std::domain_error("generate_corpus: vocab/length/dim too small");
  }
  std::filesystem::create_directories(out_dir);

  RngStream root(spec.seed);
  const int npairs = spec.keywords;
  const int nkw = 2 * npairs;  // class-1 keywords, then their class-2 antonyms
  std::vector<std::string> words(spec.vocab);
  std::vector<std::vector<double>> vecs(spec.vocab,
                                        std::vector<double>(spec.dim, 0.0));

  // Class directions share a small common component so the two keyword
  // clusters are opposed but not antipodal.
  std::vector<double> dir_a(spec.dim, 0.0), dir_b(spec.dim, 0.0);
  dir_a[0] = 1.0;
  dir_b[0] = -1.0;
  dir_a[1] = 0.3;
  dir_b[1] = 0.3;

  // Keyword ladder: tail radii increase along the pair index, so same-class
  // keywords populate a broad band of mutual cosine similarities (each
  // keyword's small staircase intervals hold same-class neighbors) while the
  // paired antonym shares the exact tail vector and sits a moderate distance
  // away, close enough to appear in synonym lists.
  RngStream emb = root.fork(1);
  for (int i = 0; i < npairs; ++i) {
    double t = 0.1 + 1.5 * static_cast<double>(i) / npairs;
    std::vector<double> tail(spec.dim);
    double norm = 0.0;
    for (int j = 0; j < spec.dim; ++j) {
      tail[j] = emb.next_gaussian();
      norm += tail[j] * tail[j];
    }
    norm = std::sqrt(norm);
    for (int j = 0; j < spec.dim; ++j) {
      double u = tail[j] / norm * t;
      vecs[i][j] = dir_a[j] + u;          // class-1 keyword
      vecs[npairs + i][j] = dir_b[j] + u;  // its class-2 antonym
    }
    words[i] = "kwa" + std::to_string(i);
    words[npairs + i] = "kwb" + std::to_string(i);
  }
  for (int i = nkw; i < spec.vocab; ++i) {
    words[i] = "w" + std::to_string(i);
    for (int j = 0; j < spec.dim; ++j) vecs[i][j] = emb.next_gaussian();
  }

  {
    std::ofstream out(out_dir + "/embeddings.txt");
    if (!out) throw std::runtime_error("cannot write " + out_dir + "/embeddings.txt");
    for (int i = 0; i < spec.vocab; ++i) {
      out << words[i];
      for (int j = 0; j < spec.dim; ++j) out << ' ' << fmt(vecs[i][j]);
      out << "\n";
    }
  }

  auto emit_split = [&](const std::string& name, int count, uint64_t salt) {
    std::ofstream out(out_dir + "/" + name);
    if (!out) throw std::runtime_error("cannot write " + out_dir + "/" + name);
    RngStream rng = root.fork(salt);
    for (int i = 0; i < count; ++i) {
      RngStream row = rng.fork(static_cast<uint64_t>(i));
      int label = 1 + static_cast<int>(row.next_below(2));
      std::vector<int> tokens(spec.length);
      for (int t = 0; t < spec.length; ++t) {
        double u = row.next_unit();
        if (u < 0.5) {  // own-class keyword
          int k = static_cast<int>(row.next_below(npairs));
          tokens[t] = label == 1 ? k : npairs + k;
        } else if (u < 0.58) {  // opposite-class keyword (noise)
          int k = static_cast<int>(row.next_below(npairs));
          tokens[t] = label == 1 ? npairs + k : k;
        } else {  // neutral filler
          tokens[t] = nkw + static_cast<int>(row.next_below(
                                static_cast<uint64_t>(spec.vocab - nkw)));
        }
      }
      write_text(out, words, label, tokens);
    }
  };
  emit_split("train.csv", spec.train_size, 2);
  emit_split("test.csv", spec.test_size, 3);
}

}  // namespace textcrs
