#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "test_support.hpp"
#include "textcrs/classifier.hpp"

using namespace textcrs;

namespace {

EmbeddingTable table() { return testsupport::random_table(12, 5, 31); }

EncodedInstance instance(const EmbeddingTable& t) {
  return encode_instance({"w0", "w4", "w7", "w2"}, 4, t, 0);
}

NoiseModel zero_noise(int n, int d) {
  SmoothingConfig cfg;
  cfg.mechanism = Mechanism::kSubstitution;
  cfg.s = 0;
  cfg.n = n;
  cfg.d = d;
  return NoiseModel::prepare(cfg, nullptr, nullptr);
}

}  // namespace

TEST_CASE("forward basics") {
  EmbeddingTable t = table();
  EncodedInstance inst = instance(t);
  auto m = testsupport::random_classifier(4, 5, 2, 8, 11);

  SUBCASE("all-zero input gives the bias-only forward") {
    EncodedInstance zero = inst;
    std::fill(zero.embedding.begin(), zero.embedding.end(), 0.0);
    auto scores = m.forward(zero);
    std::vector<double> h(m.hidden);
    for (int k = 0; k < m.hidden; ++k) h[k] = std::max(0.0, m.b1[k]);
    for (int c = 0; c < 2; ++c) {
      double z = m.b2[c];
      for (int k = 0; k < m.hidden; ++k) z += m.w2[k * 2 + c] * h[k];
      CHECK(scores[c] == doctest::Approx(z).epsilon(1e-12));
    }
  }

  SUBCASE("equal gains make the forward permutation-invariant") {
    auto eq = m;
    std::fill(eq.gains.begin(), eq.gains.end(), 1.0);
    auto base = eq.forward(inst);
    EncodedInstance shuffled = inst;
    apply_permutation(shuffled, {2, 0, 3, 1});
    auto moved = eq.forward(shuffled);
    for (int c = 0; c < 2; ++c) {
      CHECK(moved[c] == doctest::Approx(base[c]).epsilon(1e-12));
    }
  }

  SUBCASE("unequal gains are order-sensitive") {
    auto base = m.forward(inst);
    bool changed = false;
    std::vector<int> perm = {0, 1, 2, 3};
    while (std::next_permutation(perm.begin(), perm.end())) {
      EncodedInstance moved = inst;
      apply_permutation(moved, perm);
      auto s = m.forward(moved);
      if (std::fabs(s[0] - base[0]) > 1e-9) {
        changed = true;
        break;
      }
    }
    CHECK(changed);
  }

  SUBCASE("dimension mismatch throws") {
    EncodedInstance bad = inst;
    bad.n = 3;
    bad.token_ids.resize(3);
    bad.position_map = {0, 1, 2};
    bad.embedding.resize(15);
    CHECK_THROWS_AS(m.forward(bad), std::domain_error);
  }
}

TEST_CASE("analytic gradient matches central differences") {
  // With zero noise, lr = 1 and batch = 1, a single training step from a
  // known initialization exposes the analytic gradient as init - trained.
  EmbeddingTable t = table();
  RngStream rng(55);
  const int n = 4, d = 5, C = 3, H = 6;
  NoiseModel noise = zero_noise(n, d);

  auto loss_of = [&](const PositionGatedClassifier& m,
                     const EncodedInstance& inst) {
    auto scores = m.forward(inst);
    double zmax = *std::max_element(scores.begin(), scores.end());
    double zsum = 0.0;
    for (double z : scores) zsum += std::exp(z - zmax);
    return -(scores[inst.label] - zmax - std::log(zsum));
  };

  for (int trial = 0; trial < 10; ++trial) {
    EncodedInstance inst = encode_instance(
        {"w1", "w3", "w5", "w9"}, n, t, static_cast<int>(rng.next_below(C)));
    for (double& x : inst.embedding) x += 0.1 * rng.next_gaussian();

    Dataset data;
    data.num_classes = C;
    data.items = {inst};
    TrainOptions opts;
    opts.epochs = 1;
    opts.lr = 1.0;
    opts.batch = 1;
    opts.hidden = H;
    opts.seed = 2000 + trial;

    RngStream init_rng = RngStream(opts.seed).fork(0);
    auto m0 = PositionGatedClassifier::init(n, d, C, H, init_rng);
    auto trained = train_smoothed(data, noise, opts).model;

    const double h = 1e-5;
    double worst = 0.0;
    auto probe = [&](std::vector<double>& param, size_t idx, double analytic) {
      double saved = param[idx];
      param[idx] = saved + h;
      double up = loss_of(m0, inst);
      param[idx] = saved - h;
      double down = loss_of(m0, inst);
      param[idx] = saved;
      double numeric = (up - down) / (2.0 * h);
      double denom = std::max({1e-6, std::fabs(numeric), std::fabs(analytic)});
      worst = std::max(worst, std::fabs(numeric - analytic) / denom);
    };
    for (size_t i = 0; i < m0.w1.size(); i += 7) {
      probe(m0.w1, i, m0.w1[i] - trained.w1[i]);
    }
    for (size_t i = 0; i < m0.w2.size(); i += 3) {
      probe(m0.w2, i, m0.w2[i] - trained.w2[i]);
    }
    for (size_t i = 0; i < m0.gains.size(); ++i) {
      probe(m0.gains, i, m0.gains[i] - trained.gains[i]);
    }
    for (size_t i = 0; i < m0.b1.size(); ++i) {
      probe(m0.b1, i, m0.b1[i] - trained.b1[i]);
    }
    for (size_t i = 0; i < m0.b2.size(); ++i) {
      probe(m0.b2, i, m0.b2[i] - trained.b2[i]);
    }
    CHECK(worst < 1e-4);
  }
}

TEST_CASE("training determinism and degenerate options") {
  EmbeddingTable t = table();
  Dataset data;
  data.num_classes = 2;
  for (int i = 0; i < 12; ++i) {
    data.items.push_back(encode_instance({"w1", "w2", "w3"}, 4, t, i % 2));
  }
  SmoothingConfig cfg;
  cfg.mechanism = Mechanism::kDeletion;
  cfg.n = 4;
  cfg.d = 5;
  cfg.lambda = 2;
  cfg.p = 0.3;
  NoiseModel noise = NoiseModel::prepare(cfg, nullptr, nullptr);
  TrainOptions opts;
  opts.epochs = 3;
  opts.seed = 77;

  SUBCASE("same seed twice gives bit-identical weights") {
    auto a = train_smoothed(data, noise, opts);
    auto b = train_smoothed(data, noise, opts);
    CHECK(a.model.w1 == b.model.w1);
    CHECK(a.model.w2 == b.model.w2);
    CHECK(a.model.gains == b.model.gains);
    CHECK(a.epoch_loss == b.epoch_loss);
  }

  SUBCASE("lr = 0 leaves the initialization untouched") {
    TrainOptions frozen = opts;
    frozen.lr = 0.0;
    frozen.epochs = 1;
    auto trained = train_smoothed(data, noise, frozen);
    RngStream init_rng = RngStream(frozen.seed).fork(0);
    auto init = PositionGatedClassifier::init(4, 5, 2, frozen.hidden, init_rng);
    CHECK(trained.model.w1 == init.w1);
    CHECK(trained.model.b2 == init.b2);
  }

  SUBCASE("epochs = 0 returns the initial model") {
    TrainOptions zero = opts;
    zero.epochs = 0;
    auto trained = train_smoothed(data, noise, zero);
    CHECK(trained.epoch_loss.empty());
  }

  SUBCASE("empty dataset rejected") {
    Dataset empty;
    empty.num_classes = 2;
    CHECK_THROWS_AS(train_smoothed(empty, noise, opts), std::domain_error);
  }
}

TEST_CASE("zero-noise training reaches 95% on a separable toy corpus") {
  // Planted linear signal: class decided by dimension 0 sign.
  std::ostringstream ss;
  RngStream rng(9);
  const int vocab = 30, d = 6;
  for (int i = 0; i < vocab; ++i) {
    ss << "w" << i;
    double cls = i < vocab / 2 ? 1.0 : -1.0;
    ss << ' ' << cls + 0.2 * rng.next_gaussian();
    for (int j = 1; j < d; ++j) ss << ' ' << rng.next_gaussian();
    ss << "\n";
  }
  std::istringstream in(ss.str());
  EmbeddingTable t = load_embedding_table(in, d);

  Dataset data;
  data.num_classes = 2;
  for (int i = 0; i < 200; ++i) {
    RngStream row = RngStream(400).fork(i);
    int label = static_cast<int>(row.next_below(2));
    std::vector<std::string> tokens;
    for (int k = 0; k < 6; ++k) {
      int base = label == 0 ? 0 : vocab / 2;
      tokens.push_back(
          "w" + std::to_string(base + static_cast<int>(row.next_below(vocab / 2))));
    }
    data.items.push_back(encode_instance(tokens, 6, t, label));
  }
  NoiseModel noise = zero_noise(6, d);
  TrainOptions opts;
  opts.epochs = 30;
  opts.seed = 5;
  auto result = train_smoothed(data, noise, opts);
  int correct = 0;
  for (const auto& inst : data.items) {
    if (result.model.predict(inst) == inst.label) ++correct;
  }
  CHECK(correct >= 190);
}

TEST_CASE("model save/load round-trips bit-identically") {
  EmbeddingTable t = table();
  EncodedInstance inst = instance(t);
  auto m = testsupport::random_classifier(4, 5, 3, 8, 21);
  std::stringstream ss;
  m.save(ss);
  auto loaded = PositionGatedClassifier::load(ss);
  CHECK(loaded.w1 == m.w1);
  CHECK(loaded.gains == m.gains);
  auto a = m.forward(inst);
  auto b = loaded.forward(inst);
  CHECK(a == b);

  SUBCASE("truncated file fails to load") {
    std::stringstream out;
    m.save(out);
    std::string text = out.str();
    std::istringstream broken(text.substr(0, text.size() / 2));
    CHECK_THROWS(PositionGatedClassifier::load(broken));
  }
  SUBCASE("inconsistent dimensions rejected") {
    std::stringstream out;
    m.save(out);
    std::string text = out.str();
    auto pos = text.find("\"n\":4");
    REQUIRE(pos != std::string::npos);
    text.replace(pos, 5, "\"n\":9");
    std::istringstream broken(text);
    CHECK_THROWS_AS(PositionGatedClassifier::load(broken), std::runtime_error);
  }
}

TEST_CASE("dataset csv loader") {
  EmbeddingTable t = table();
  std::istringstream in("1,w1 w2 w3\n2,w4 w5\n1,w0\n");
  Dataset data = load_dataset_csv(in, t, 4);
  CHECK(data.num_classes == 2);
  REQUIRE(data.items.size() == 3);
  CHECK(data.items[0].label == 0);
  CHECK(data.items[1].label == 1);
  CHECK(data.items[1].alive_count() == 2);
  std::istringstream bad("nocomma\n");
  CHECK_THROWS_AS(load_dataset_csv(bad, t, 4), std::runtime_error);
}
