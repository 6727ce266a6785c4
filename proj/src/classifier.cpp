#include "textcrs/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace textcrs {

int argmax_lowest(const std::vector<double>& scores) {
  int best = 0;
  for (int c = 1; c < static_cast<int>(scores.size()); ++c) {
    if (scores[c] > scores[best]) best = c;
  }
  return best;
}

PositionGatedClassifier PositionGatedClassifier::init(int n, int d,
                                                      int num_classes,
                                                      int hidden,
                                                      RngStream& rng) {
  PositionGatedClassifier m;
  m.n = n;
  m.d = d;
  m.hidden = hidden;
  m.num_classes = num_classes;
  m.gains.resize(n);
  for (double& g : m.gains) g = 0.5 + rng.next_unit();  // unequal by default
  double scale1 = 1.0 / std::sqrt(static_cast<double>(d));
  double scale2 = 1.0 / std::sqrt(static_cast<double>(hidden));
  m.w1.resize(static_cast<size_t>(d) * hidden);
  for (double& w : m.w1) w = scale1 * rng.next_gaussian();
  m.b1.assign(hidden, 0.0);
  m.w2.resize(static_cast<size_t>(hidden) * num_classes);
  for (double& w : m.w2) w = scale2 * rng.next_gaussian();
  m.b2.assign(num_classes, 0.0);
  return m;
}

std::vector<double> PositionGatedClassifier::forward_rendered(
    const double* rendered) const {
  std::vector<double> pooled(d, 0.0);
  for (int p = 0; p < n; ++p) {
    const double* row = rendered + static_cast<size_t>(p) * d;
    double g = gains[p];
    for (int j = 0; j < d; ++j) pooled[j] += g * row[j];
  }
  for (double& x : pooled) x /= static_cast<double>(n);
  std::vector<double> h(hidden);
  for (int k = 0; k < hidden; ++k) {
    double z = b1[k];
    for (int j = 0; j < d; ++j) z += w1[static_cast<size_t>(j) * hidden + k] * pooled[j];
    h[k] = z > 0.0 ? z : 0.0;
  }
  std::vector<double> scores(num_classes);
  for (int c = 0; c < num_classes; ++c) {
    double z = b2[c];
    for (int k = 0; k < hidden; ++k) {
      z += w2[static_cast<size_t>(k) * num_classes + c] * h[k];
    }
    scores[c] = z;
  }
  return scores;
}

std::vector<double> PositionGatedClassifier::forward(
    const EncodedInstance& inst) const {
  if (inst.n != n || inst.d != d) {
    throw std::domain_error("forward: instance dimensions do not match model");
  }
  return forward_rendered(inst.rendered().data());
}

int PositionGatedClassifier::predict_rendered(const double* rendered) const {
  return argmax_lowest(forward_rendered(rendered));
}

int PositionGatedClassifier::predict(const EncodedInstance& inst) const {
  return argmax_lowest(forward(inst));
}

namespace {
constexpr int kModelVersion = 1;
}

void PositionGatedClassifier::save(std::ostream& out) const {
  nlohmann::json j;
  j["version"] = kModelVersion;
  j["n"] = n;
  j["d"] = d;
  j["hidden"] = hidden;
  j["classes"] = num_classes;
  j["gains"] = gains;
  j["w1"] = w1;
  j["b1"] = b1;
  j["w2"] = w2;
  j["b2"] = b2;
  out << j.dump() << "\n";
}

void PositionGatedClassifier::save_file(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write model file: " + path);
  save(out);
}

PositionGatedClassifier PositionGatedClassifier::load(std::istream& in) {
  nlohmann::json j = nlohmann::json::parse(in);
  if (j.at("version").get<int>() != kModelVersion) {
    throw std::runtime_error("unsupported model version");
  }
  PositionGatedClassifier m;
  m.n = j.at("n").get<int>();
  m.d = j.at("d").get<int>();
  m.hidden = j.at("hidden").get<int>();
  m.num_classes = j.at("classes").get<int>();
  m.gains = j.at("gains").get<std::vector<double>>();
  m.w1 = j.at("w1").get<std::vector<double>>();
  m.b1 = j.at("b1").get<std::vector<double>>();
  m.w2 = j.at("w2").get<std::vector<double>>();
  m.b2 = j.at("b2").get<std::vector<double>>();
  if (static_cast<int>(m.gains.size()) != m.n ||
      m.w1.size() != static_cast<size_t>(m.d) * m.hidden ||
      static_cast<int>(m.b1.size()) != m.hidden ||
      m.w2.size() != static_cast<size_t>(m.hidden) * m.num_classes ||
      static_cast<int>(m.b2.size()) != m.num_classes) {
    throw std::runtime_error("model file dimensions are inconsistent");
  }
  return m;
}

PositionGatedClassifier PositionGatedClassifier::load_file(
    const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open model file: " + path);
  return load(in);
}

Dataset load_dataset_csv(std::istream& in, const EmbeddingTable& table, int n) {
  Dataset data;
  std::string line;
  long long lineno = 0;
  int max_label = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto comma = line.find(',');
    if (comma == std::string::npos) {
      throw std::runtime_error("dataset line " + std::to_string(lineno) +
                               ": expected `label,text`");
    }
    int label = std::stoi(line.substr(0, comma));
    if (label < 1) {
      throw std::runtime_error("dataset line " + std::to_string(lineno) +
                               ": labels start at 1");
    }
    std::istringstream ts(line.substr(comma + 1));
    std::vector<std::string> tokens;
    std::string tok;
    while (ts >> tok) tokens.push_back(tok);
    data.items.push_back(encode_instance(tokens, n, table, label - 1));
    max_label = std::max(max_label, label);
  }
  data.num_classes = max_label;
  return data;
}

Dataset load_dataset_file(const std::string& path, const EmbeddingTable& table,
                          int n) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset: " + path);
  return load_dataset_csv(in, table, n);
}

TrainResult train_smoothed(const Dataset& data, const NoiseModel& noise,
                           const TrainOptions& opts) {
  if (data.items.empty()) throw std::domain_error("train_smoothed: empty dataset");
  const int n = noise.config.n;
  const int d = noise.config.d;
  const int C = std::max(2, data.num_classes);
  RngStream root(opts.seed);
  RngStream init_rng = root.fork(0);
  PositionGatedClassifier m =
      PositionGatedClassifier::init(n, d, C, opts.hidden, init_rng);

  const int H = m.hidden;
  std::vector<double> d_gains(n), d_w1(m.w1.size()), d_b1(H),
      d_w2(m.w2.size()), d_b2(C);
  std::vector<double> pooled(d), z1(H), a1(H), probs(C), dz1(H), dpooled(d);

  TrainResult result;
  std::vector<size_t> order(data.items.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    RngStream epoch_rng = root.fork(1000 + epoch);
    epoch_rng.shuffle(order);
    double loss_sum = 0.0;
    size_t cursor = 0;
    while (cursor < order.size()) {
      size_t batch_end = std::min(order.size(), cursor + opts.batch);
      size_t batch_size = batch_end - cursor;
      std::fill(d_gains.begin(), d_gains.end(), 0.0);
      std::fill(d_w1.begin(), d_w1.end(), 0.0);
      std::fill(d_b1.begin(), d_b1.end(), 0.0);
      std::fill(d_w2.begin(), d_w2.end(), 0.0);
      std::fill(d_b2.begin(), d_b2.end(), 0.0);

      for (size_t bi = cursor; bi < batch_end; ++bi) {
        size_t idx = order[bi];
        EncodedInstance noisy = data.items[idx];
        RngStream draw =
            epoch_rng.fork(0x6e6f6973ULL + static_cast<uint64_t>(idx));
        noise.sample(noisy, draw);
        std::vector<double> rendered = noisy.rendered();

        // forward
        std::fill(pooled.begin(), pooled.end(), 0.0);
        for (int p = 0; p < n; ++p) {
          const double* row = rendered.data() + static_cast<size_t>(p) * d;
          for (int j = 0; j < d; ++j) pooled[j] += m.gains[p] * row[j];
        }
        for (double& x : pooled) x /= static_cast<double>(n);
        for (int k = 0; k < H; ++k) {
          double z = m.b1[k];
          for (int j = 0; j < d; ++j) z += m.w1[static_cast<size_t>(j) * H + k] * pooled[j];
          z1[k] = z;
          a1[k] = z > 0.0 ? z : 0.0;
        }
        double zmax = -1e300;
        for (int c = 0; c < C; ++c) {
          double z = m.b2[c];
          for (int k = 0; k < H; ++k) z += m.w2[static_cast<size_t>(k) * C + c] * a1[k];
          probs[c] = z;
          zmax = std::max(zmax, z);
        }
        double zsum = 0.0;
        for (int c = 0; c < C; ++c) {
          probs[c] = std::exp(probs[c] - zmax);
          zsum += probs[c];
        }
        for (double& x : probs) x /= zsum;
        int y = noisy.label;
        loss_sum += -std::log(std::max(probs[y], 1e-300));

        // backward
        for (int c = 0; c < C; ++c) {
          double g = probs[c] - (c == y ? 1.0 : 0.0);
          d_b2[c] += g;
          for (int k = 0; k < H; ++k) {
            d_w2[static_cast<size_t>(k) * C + c] += a1[k] * g;
          }
        }
        for (int k = 0; k < H; ++k) {
          double g = 0.0;
          for (int c = 0; c < C; ++c) {
            g += m.w2[static_cast<size_t>(k) * C + c] * (probs[c] - (c == noisy.label ? 1.0 : 0.0));
          }
          dz1[k] = z1[k] > 0.0 ? g : 0.0;
          d_b1[k] += dz1[k];
        }
        for (int j = 0; j < d; ++j) {
          double g = 0.0;
          for (int k = 0; k < H; ++k) g += m.w1[static_cast<size_t>(j) * H + k] * dz1[k];
          dpooled[j] = g;
          for (int k = 0; k < H; ++k) {
            d_w1[static_cast<size_t>(j) * H + k] += pooled[j] * dz1[k];
          }
        }
        for (int p = 0; p < n; ++p) {
          const double* row = rendered.data() + static_cast<size_t>(p) * d;
          double g = 0.0;
          for (int j = 0; j < d; ++j) g += row[j] * dpooled[j];
          d_gains[p] += g / static_cast<double>(n);
        }
      }

      double scale = opts.lr / static_cast<double>(batch_size);
      for (int p = 0; p < n; ++p) m.gains[p] -= scale * d_gains[p];
      for (size_t i = 0; i < m.w1.size(); ++i) m.w1[i] -= scale * d_w1[i];
      for (int k = 0; k < H; ++k) m.b1[k] -= scale * d_b1[k];
      for (size_t i = 0; i < m.w2.size(); ++i) m.w2[i] -= scale * d_w2[i];
      for (int c = 0; c < C; ++c) m.b2[c] -= scale * d_b2[c];
      cursor = batch_end;
    }
    double mean_loss = loss_sum / static_cast<double>(data.items.size());
    if (!std::isfinite(mean_loss)) {
      throw std::runtime_error("train_smoothed: loss diverged (NaN) at epoch " +
                               std::to_string(epoch));
    }
    result.epoch_loss.push_back(mean_loss);
  }
  result.model = std::move(m);
  return result;
}

}  // namespace textcrs
