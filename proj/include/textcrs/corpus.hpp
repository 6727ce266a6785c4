#pragma once

#include <string>

namespace textcrs {

// Deterministic two-class synthetic corpus with planted class keywords.
//
// Vocabulary layout: the first 2*keywords words are class-indicative and come
// in antonym pairs kwA_i / kwB_i sharing a random base vector but pushed
// along opposite class directions, so each keyword's nearest neighbor is its
// opposite-class partner (attackable by construction). The rest are neutral
// filler. Texts draw mostly own-class keywords plus filler; labels 1 and 2.
//
// Writes embeddings.txt (GloVe text format), train.csv and test.csv
// (`label,text`) under out_dir. Byte-identical for identical arguments.
struct CorpusSpec {
  uint64_t seed = 1;
  int train_size = 2000;
  int test_size = 500;
  int vocab = 200;
  int length = 16;
  int dim = 20;
  int keywords = 12;  // antonym pairs per class
};

void generate_corpus(const CorpusSpec& spec, const std::string& out_dir);

}  // namespace textcrs
