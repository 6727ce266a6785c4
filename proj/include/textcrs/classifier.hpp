#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "textcrs/embedding.hpp"
#include "textcrs/noise.hpp"
#include "textcrs/rng.hpp"

namespace textcrs {

// Order-sensitive base classifier over the rendered n x d input: per-position
// gains, mean pooling, one hidden relu layer, linear output.
//   scores = W2^T relu(W1^T (sum_p g_p m_p / n) + b1) + b2
struct PositionGatedClassifier {
  int n = 0, d = 0, hidden = 0, num_classes = 0;
  std::vector<double> gains;  // n
  std::vector<double> w1;     // d x hidden, row-major
  std::vector<double> b1;     // hidden
  std::vector<double> w2;     // hidden x num_classes, row-major
  std::vector<double> b2;     // num_classes

  static PositionGatedClassifier init(int n, int d, int num_classes, int hidden,
                                      RngStream& rng);

  std::vector<double> forward_rendered(const double* rendered) const;
  std::vector<double> forward(const EncodedInstance& inst) const;
  // argmax with ties to the lowest class id.
  int predict_rendered(const double* rendered) const;
  int predict(const EncodedInstance& inst) const;

  void save(std::ostream& out) const;
  void save_file(const std::string& path) const;
  static PositionGatedClassifier load(std::istream& in);
  static PositionGatedClassifier load_file(const std::string& path);
};

int argmax_lowest(const std::vector<double>& scores);

struct Dataset {
  int num_classes = 0;
  std::vector<EncodedInstance> items;
};

// CSV with columns `label,text`; labels 1..C, text whitespace-tokenized.
Dataset load_dataset_csv(std::istream& in, const EmbeddingTable& table, int n);
Dataset load_dataset_file(const std::string& path, const EmbeddingTable& table,
                          int n);

struct TrainOptions {
  int epochs = 50;
  double lr = 0.05;
  int batch = 32;
  int hidden = 32;
  uint64_t seed = 1;
};

struct TrainResult {
  PositionGatedClassifier model;
  std::vector<double> epoch_loss;
};

// Mini-batch SGD on softmax cross-entropy; every epoch draws fresh mechanism
// noise per example. Deterministic given the seed. Throws on NaN loss.
TrainResult train_smoothed(const Dataset& data, const NoiseModel& noise,
                           const TrainOptions& opts);

}  // namespace textcrs
