#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "test_support.hpp"
#include "textcrs/noise.hpp"

using namespace textcrs;
using testsupport::chi_square_pvalue;
using testsupport::chi_square_stat;

TEST_CASE("staircase pmf golden values") {
  SUBCASE("degenerate lexicon") {
    auto pmf = staircase_pmf(0, 1.0, 1.0, 1.0);
    REQUIRE(pmf.size() == 1);
    CHECK(pmf[0] == doctest::Approx(1.0));
  }
  SUBCASE("s=2 eps=1 normalized exponentials") {
    auto pmf = staircase_pmf(2, 1.0, 1.0, 1.0);
    CHECK(pmf[0] == doctest::Approx(0.6652409557748218).epsilon(1e-12));
    CHECK(pmf[1] == doctest::Approx(0.24472847105479764).epsilon(1e-12));
    CHECK(pmf[2] == doctest::Approx(0.09003057317038046).epsilon(1e-12));
  }
  SUBCASE("mass ratio between intervals") {
    auto pmf = staircase_pmf(5, 1.0, 1.0, 1.0);
    CHECK(pmf[4] / pmf[1] == doctest::Approx(std::exp(-3.0)).epsilon(1e-12));
  }
  SUBCASE("sums to one and is monotone") {
    for (double gamma : {1.0, 0.6, 0.0}) {
      auto pmf = staircase_pmf(7, 0.7, gamma, 1.0);
      double total = std::accumulate(pmf.begin(), pmf.end(), 0.0);
      CHECK(std::fabs(total - 1.0) <= 1e-12);
      for (size_t k = 1; k < pmf.size(); ++k) CHECK(pmf[k] <= pmf[k - 1] + 1e-15);
    }
  }
  SUBCASE("gamma < 1 mixes adjacent steps") {
    auto pmf = staircase_pmf(3, 1.0, 0.5, 1.0);
    // Hand-built interval-mass oracle.
    double total = 0.0;
    std::vector<double> expect(4);
    for (int k = 0; k <= 3; ++k) {
      expect[k] = 0.5 * std::exp(-k) + 0.5 * std::exp(-(k + 1));
      total += expect[k];
    }
    for (int k = 0; k <= 3; ++k) {
      CHECK(pmf[k] == doctest::Approx(expect[k] / total).epsilon(1e-12));
    }
  }
  CHECK_THROWS_AS(staircase_pmf(-1, 1.0, 1.0, 1.0), std::domain_error);
  CHECK_THROWS_AS(staircase_pmf(2, 0.0, 1.0, 1.0), std::domain_error);
}

TEST_CASE("centered staircase pmf") {
  SUBCASE("center zero equals the plain pmf") {
    auto a = staircase_pmf(4, 0.8, 1.0, 1.0);
    auto b = staircase_pmf_centered(4, 0.8, 0);
    for (int k = 0; k <= 4; ++k) CHECK(a[k] == doctest::Approx(b[k]).epsilon(1e-13));
  }
  SUBCASE("recentring moves the mode") {
    // The center point sits between intervals c-1 and c, which become the
    // joint mode of the index law.
    auto pmf = staircase_pmf_centered(4, 1.0, 3);
    CHECK(pmf[2] > pmf[0]);
    CHECK(pmf[2] > pmf[1]);
    CHECK(pmf[3] > pmf[1]);
    CHECK(pmf[3] > pmf[4]);
    double total = std::accumulate(pmf.begin(), pmf.end(), 0.0);
    CHECK(std::fabs(total - 1.0) <= 1e-12);
  }
}

namespace {

EmbeddingTable toy_table() {
  return testsupport::random_table(10, 4, 2024);
}

}  // namespace

TEST_CASE("substitution noise identity and law") {
  EmbeddingTable t = toy_table();
  SynonymTable syn = build_synonym_table(t, 2);
  EncodedInstance inst = encode_instance({"w0", "w3"}, 4, t, 0);

  SUBCASE("point mass at zero keeps the instance") {
    std::vector<double> pmf = {1.0, 0.0, 0.0};
    for (uint64_t i = 0; i < 20; ++i) {
      EncodedInstance noisy = inst;
      RngStream rng = RngStream(7).fork(i);
      apply_substitution_noise(noisy, syn, pmf, rng);
      CHECK(noisy.token_ids == inst.token_ids);
      CHECK(noisy.embedding == inst.embedding);
    }
  }

  SUBCASE("pads are never substituted") {
    auto pmf = staircase_pmf(2, 2.5, 1.0, 1.0);
    for (uint64_t i = 0; i < 50; ++i) {
      EncodedInstance noisy = inst;
      RngStream rng = RngStream(8).fork(i);
      apply_substitution_noise(noisy, syn, pmf, rng);
      CHECK(noisy.token_ids[2] == t.pad_id);
      CHECK(noisy.token_ids[3] == t.pad_id);
    }
  }

  SUBCASE("index frequencies match the staircase law") {
    // Single word; bucket draws by outcome-interval and chi-square against
    // the pmf (candidate intervals here are fully populated: s=2 over a
    // 10-word vocabulary gives intervals for every k).
    EncodedInstance one = encode_instance({"w5"}, 1, t, 0);
    const auto* entries = syn.find("w5");
    REQUIRE(entries != nullptr);
    auto pmf = staircase_pmf(2, 1.0, 1.0, 1.0);
    const long long draws = 200000;
    std::map<int, long long> by_token;
    RngStream root(991);
    for (long long i = 0; i < draws; ++i) {
      EncodedInstance noisy = one;
      RngStream rng = root.fork(static_cast<uint64_t>(i));
      apply_substitution_noise(noisy, syn, pmf, rng);
      by_token[noisy.token_ids[0]] += 1;
    }
    // Expected law over tokens.
    std::map<int, double> expect;
    expect[one.token_ids[0]] += pmf[0];
    for (int k = 1; k <= 2; ++k) {
      std::vector<int> cands;
      int best = -1;
      for (const auto& e : *entries) {
        if (best < 0 || std::abs(e.interval - k) < std::abs(best - k) ||
            (std::abs(e.interval - k) == std::abs(best - k) && e.interval < best))
          best = e.interval;
      }
      for (const auto& e : *entries)
        if (e.interval == best) cands.push_back(e.id);
      if (cands.empty()) {
        expect[one.token_ids[0]] += pmf[k];
      } else {
        for (int id : cands) expect[id] += pmf[k] / cands.size();
      }
    }
    std::vector<long long> obs;
    std::vector<double> probs;
    for (const auto& [token, prob] : expect) {
      obs.push_back(by_token[token]);
      probs.push_back(prob);
    }
    int df = 0;
    double stat = chi_square_stat(obs, probs, draws, &df);
    CHECK(chi_square_pvalue(stat, df) > 0.001);
  }
}

TEST_CASE("group permutation sampler") {
  SUBCASE("group 1 is the identity") {
    RngStream rng(3);
    for (int i = 0; i < 10; ++i) {
      auto r = sample_group_permutation(6, 1, rng);
      for (int j = 0; j < 6; ++j) CHECK(r[j] == j);
    }
  }
  SUBCASE("full group is uniform over S_3") {
    const long long draws = 600000;
    std::map<std::vector<int>, long long> counts;
    RngStream root(17);
    for (long long i = 0; i < draws; ++i) {
      RngStream rng = root.fork(static_cast<uint64_t>(i));
      counts[sample_group_permutation(3, 3, rng)] += 1;
    }
    REQUIRE(counts.size() == 6);
    std::vector<long long> obs;
    for (const auto& [perm, c] : counts) obs.push_back(c);
    std::vector<double> probs(6, 1.0 / 6.0);
    int df = 0;
    double stat = chi_square_stat(obs, probs, draws, &df);
    CHECK(chi_square_pvalue(stat, df) > 0.001);
  }
  SUBCASE("groups never mix: orbit sizes match the partition") {
    RngStream rng(11);
    for (int i = 0; i < 200; ++i) {
      auto r = sample_group_permutation(7, 3, rng);  // groups 3,3,1
      // r must be a bijection.
      std::vector<int> seen(7, 0);
      for (int x : r) seen[x] += 1;
      for (int c : seen) CHECK(c == 1);
    }
  }
  CHECK_THROWS_AS(
      [] {
        RngStream rng(1);
        sample_group_permutation(4, 5, rng);
      }(),
      std::domain_error);
}

TEST_CASE("apply_permutation composes maps") {
  EmbeddingTable t = toy_table();
  EncodedInstance inst = encode_instance({"w1", "w2", "w3", "w4"}, 4, t, 0);
  SUBCASE("identity keeps the instance") {
    EncodedInstance copy = inst;
    apply_permutation(copy, {0, 1, 2, 3});
    CHECK(copy.position_map == inst.position_map);
  }
  SUBCASE("swap applied twice is the identity") {
    EncodedInstance copy = inst;
    apply_permutation(copy, {1, 0, 2, 3});
    apply_permutation(copy, {1, 0, 2, 3});
    CHECK(copy.position_map == inst.position_map);
  }
  SUBCASE("two steps equal the composition") {
    RngStream rng(5);
    for (int trial = 0; trial < 50; ++trial) {
      auto r1 = sample_group_permutation(4, 4, rng);
      auto r2 = sample_group_permutation(4, 4, rng);
      EncodedInstance two_steps = inst;
      apply_permutation(two_steps, r1);
      apply_permutation(two_steps, r2);
      std::vector<int> composed(4);
      for (int i = 0; i < 4; ++i) composed[i] = r2[r1[i]];
      EncodedInstance one_step = inst;
      apply_permutation(one_step, composed);
      CHECK(two_steps.position_map == one_step.position_map);
    }
  }
  SUBCASE("embedding rows never move") {
    EncodedInstance copy = inst;
    apply_permutation(copy, {3, 2, 1, 0});
    CHECK(copy.embedding == inst.embedding);
  }
  CHECK_THROWS_AS(apply_permutation(inst, {0, 0, 2, 3}), std::domain_error);
}

TEST_CASE("gaussian noise") {
  EmbeddingTable t = toy_table();
  EncodedInstance inst = encode_instance({"w1", "w2"}, 3, t, 0);
  SUBCASE("sigma 0 mean 0 is identity") {
    EncodedInstance copy = inst;
    RngStream rng(1);
    apply_gaussian_noise(copy, 0.0, {}, rng);
    CHECK(copy.embedding == inst.embedding);
  }
  SUBCASE("pad rows receive noise too") {
    EncodedInstance copy = inst;
    RngStream rng(2);
    apply_gaussian_noise(copy, 1.0, {}, rng);
    bool pad_changed = false;
    for (int j = 0; j < copy.d; ++j) {
      if (copy.row(2)[j] != 0.0) pad_changed = true;
    }
    CHECK(pad_changed);
  }
  SUBCASE("moments match within 4 standard errors") {
    const long long draws = 200000;
    double sum = 0.0, sumsq = 0.0;
    std::vector<double> mean = {0.3, -0.7, 0.0, 0.1};
    RngStream root(21);
    EncodedInstance probe = encode_instance({"w1"}, 1, t, 0);
    for (long long i = 0; i < draws; ++i) {
      EncodedInstance copy = probe;
      RngStream rng = root.fork(static_cast<uint64_t>(i));
      apply_gaussian_noise(copy, 1.0, mean, rng);
      double x = copy.row(0)[1] - probe.row(0)[1];  // noise on dim 1
      sum += x;
      sumsq += x * x;
    }
    double m = sum / draws;
    double var = sumsq / draws - m * m;
    CHECK(std::fabs(m - mean[1]) <= 4.0 / std::sqrt(static_cast<double>(draws)));
    // var of sample variance ~ 2/N for unit variance.
    CHECK(std::fabs(var - 1.0) <= 4.0 * std::sqrt(2.0 / draws));
  }
}

TEST_CASE("bernoulli deletion") {
  EmbeddingTable t = toy_table();
  SUBCASE("p=0 identity, p=1 deletes every word") {
    EncodedInstance inst = encode_instance({"w1", "w2", "w3"}, 4, t, 0);
    EncodedInstance a = inst;
    RngStream r1(1);
    apply_bernoulli_deletion(a, 0.0, r1);
    CHECK(a.embedding == inst.embedding);
    EncodedInstance b = inst;
    RngStream r2(2);
    apply_bernoulli_deletion(b, 1.0, r2);
    for (double x : b.embedding) CHECK(x == 0.0);
    CHECK(b.alive_count() == 0);
  }
  SUBCASE("deletion counts follow the binomial law") {
    const int n = 20;
    std::vector<std::string> words;
    for (int i = 0; i < n; ++i) words.push_back("w" + std::to_string(i % 9));
    EmbeddingTable big = testsupport::random_table(9, 3, 5);
    EncodedInstance inst = encode_instance(words, n, big, 0);
    const long long draws = 100000;
    std::vector<long long> hist(n + 1, 0);
    RngStream root(77);
    for (long long i = 0; i < draws; ++i) {
      EncodedInstance copy = inst;
      RngStream rng = root.fork(static_cast<uint64_t>(i));
      apply_bernoulli_deletion(copy, 0.5, rng);
      hist[n - copy.alive_count()] += 1;
    }
    std::vector<double> probs(n + 1);
    for (int k = 0; k <= n; ++k) {
      probs[k] = std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) -
                          std::lgamma(n - k + 1.0)) *
                 std::pow(0.5, n);
    }
    int df = 0;
    double stat = chi_square_stat(hist, probs, draws, &df);
    CHECK(chi_square_pvalue(stat, df) > 0.001);
  }
}

TEST_CASE("insertion transform canonical form") {
  EmbeddingTable t = toy_table();
  EncodedInstance inst = encode_instance({"w1", "w2", "w3"}, 4, t, 0);
  const std::vector<double> fresh = {9, 9, 9, 9};

  SUBCASE("no insertions is identity") {
    EncodedInstance copy = inst;
    insertion_transform(copy, {}, {});
    CHECK(copy.embedding == inst.embedding);
    CHECK(copy.position_map == inst.position_map);
  }
  SUBCASE("single insertion mid-text") {
    // Insert before rendered position 1: x1 new x2 x3.
    EncodedInstance copy = inst;
    insertion_transform(copy, {1}, {fresh});
    // First n-1 storage rows preserved.
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 4; ++j) CHECK(copy.row(i)[j] == inst.row(i)[j]);
    }
    for (int j = 0; j < 4; ++j) CHECK(copy.row(3)[j] == fresh[j]);
    // Rendered equals the naive insert-then-truncate sequence.
    auto rendered = copy.rendered();
    std::vector<const double*> naive = {inst.row(0), fresh.data(), inst.row(1),
                                        inst.row(2)};
    for (int p = 0; p < 4; ++p) {
      for (int j = 0; j < 4; ++j) {
        CHECK(rendered[p * 4 + j] == naive[p][j]);
      }
    }
  }
  SUBCASE("two insertions match the naive construction") {
    EncodedInstance copy = inst;
    const std::vector<double> v2 = {-1, -2, -3, -4};
    insertion_transform(copy, {0, 2}, {fresh, v2});
    auto rendered = copy.rendered();
    std::vector<const double*> naive = {fresh.data(), inst.row(0), inst.row(1),
                                        v2.data()};
    for (int p = 0; p < 4; ++p) {
      for (int j = 0; j < 4; ++j) {
        CHECK(rendered[p * 4 + j] == naive[p][j]);
      }
    }
  }
  SUBCASE("rejects truncated markers and bad shapes") {
    EncodedInstance copy = inst;
    // Second marker would land at merged index 4 and be truncated away.
    CHECK_THROWS_AS(insertion_transform(copy, {2, 3}, {fresh, fresh}),
                    std::domain_error);
    CHECK_THROWS_AS(insertion_transform(copy, {0, 0}, {fresh, fresh}),
                    std::domain_error);
    CHECK_THROWS_AS(
        insertion_transform(copy, {0, 1, 2, 3, 0}, {fresh, fresh, fresh, fresh, fresh}),
        std::domain_error);
  }
}

TEST_CASE("deletion transform") {
  EmbeddingTable t = toy_table();
  EncodedInstance inst = encode_instance({"w1", "w2", "w3", "w4"}, 4, t, 0);
  SUBCASE("empty is identity") {
    EncodedInstance copy = inst;
    deletion_transform(copy, {});
    CHECK(copy.embedding == inst.embedding);
  }
  SUBCASE("deleting position 1 renders x1 x3 x4 pad") {
    EncodedInstance copy = inst;
    deletion_transform(copy, {1});
    auto rendered = copy.rendered();
    std::vector<const double*> naive = {inst.row(0), inst.row(2), inst.row(3)};
    for (int p = 0; p < 3; ++p) {
      for (int j = 0; j < 4; ++j) CHECK(rendered[p * 4 + j] == naive[p][j]);
    }
    for (int j = 0; j < 4; ++j) CHECK(rendered[3 * 4 + j] == 0.0);
    CHECK(copy.alive_count() == 3);
  }
  SUBCASE("delete everything") {
    EncodedInstance copy = inst;
    deletion_transform(copy, {0, 1, 2, 3});
    for (double x : copy.embedding) CHECK(x == 0.0);
  }
  SUBCASE("duplicate positions rejected") {
    EncodedInstance copy = inst;
    CHECK_THROWS_AS(deletion_transform(copy, {1, 1}), std::domain_error);
  }
}

TEST_CASE("perturbation norms") {
  SUBCASE("identity specs have norm zero") {
    PerturbationSpec s;
    s.kind = PerturbationSpec::Kind::kSubstitution;
    s.interval_indices = {0, 0, 0};
    CHECK(perturbation_norm(s) == 0.0);
    s.kind = PerturbationSpec::Kind::kReorder;
    s.targets = {0, 1, 2, 3};
    CHECK(perturbation_norm(s) == 0.0);
    s.kind = PerturbationSpec::Kind::kDeletion;
    s.positions = {};
    CHECK(perturbation_norm(s) == 0.0);
  }
  SUBCASE("reversal of four positions has displacement 8") {
    PerturbationSpec s;
    s.kind = PerturbationSpec::Kind::kReorder;
    s.targets = {3, 2, 1, 0};
    CHECK(perturbation_norm(s) == doctest::Approx(8.0));
  }
  SUBCASE("substitution norm sums interval indices") {
    PerturbationSpec s;
    s.kind = PerturbationSpec::Kind::kSubstitution;
    s.interval_indices = std::vector<int>(50, 4);
    CHECK(perturbation_norm(s) == doctest::Approx(200.0));
  }
  SUBCASE("insertion norm is the stacked l2") {
    PerturbationSpec s;
    s.kind = PerturbationSpec::Kind::kInsertion;
    s.positions = {0, 1};
    s.insert_deltas = {{3, 4}, {0, 0}};
    CHECK(perturbation_norm(s) == doctest::Approx(5.0));
  }
}

TEST_CASE("noise model determinism: identical seeds give identical draws") {
  EmbeddingTable t = toy_table();
  SynonymTable syn = build_synonym_table(t, 2);
  for (Mechanism mech : {Mechanism::kSubstitution, Mechanism::kReorder,
                         Mechanism::kInsertion, Mechanism::kDeletion}) {
    SmoothingConfig cfg;
    cfg.mechanism = mech;
    cfg.n = 6;
    cfg.d = 4;
    cfg.s = 2;
    cfg.lambda = mech == Mechanism::kReorder ? 2 : 3;
    cfg.sigma = 0.4;
    cfg.p = 0.5;
    NoiseModel noise = NoiseModel::prepare(cfg, &syn, &t);
    EncodedInstance inst =
        encode_instance({"w0", "w1", "w2", "w3", "w4"}, 6, t, 0);
    EncodedInstance a = inst, b = inst;
    RngStream s1 = RngStream(123).fork(7);
    RngStream s2 = RngStream(123).fork(7);
    noise.sample(a, s1);
    noise.sample(b, s2);
    CHECK(a.embedding == b.embedding);
    CHECK(a.position_map == b.position_map);
    CHECK(a.token_ids == b.token_ids);
  }
}

TEST_CASE("config json round trip and presets") {
  SmoothingConfig cfg;
  cfg.mechanism = Mechanism::kDeletion;
  cfg.n = 16;
  cfg.d = 20;
  cfg.lambda = 8;
  cfg.p = 0.7;
  cfg.seed = 99;
  SmoothingConfig back = SmoothingConfig::from_json(cfg.to_json());
  CHECK(back.mechanism == Mechanism::kDeletion);
  CHECK(back.p == doctest::Approx(0.7));
  CHECK(back.lambda == 8);
  CHECK(back.seed == 99);

  SUBCASE("table presets") {
    SmoothingConfig c;
    c.n = 16;
    c.d = 20;
    c.mechanism = Mechanism::kSubstitution;
    apply_noise_preset(c, "Low");
    CHECK(c.s == 50);
    apply_noise_preset(c, "High");
    CHECK(c.s == 250);
    c.mechanism = Mechanism::kReorder;
    apply_noise_preset(c, "Low");
    CHECK(c.lambda == 2);  // group size n/4
    apply_noise_preset(c, "High");
    CHECK(c.lambda == 8);  // full shuffle
    c.mechanism = Mechanism::kInsertion;
    apply_noise_preset(c, "Med");
    CHECK(c.sigma == doctest::Approx(0.2));
    CHECK(c.lambda == 8);
    c.mechanism = Mechanism::kDeletion;
    apply_noise_preset(c, "Low");
    CHECK(c.p == doctest::Approx(0.3));
    CHECK_THROWS_AS(apply_noise_preset(c, "Extreme"), std::domain_error);
  }
  SUBCASE("validation rejects bad parameter blocks") {
    SmoothingConfig c;
    c.n = 8;
    c.d = 4;
    c.mechanism = Mechanism::kReorder;
    c.lambda = 9;
    CHECK_THROWS_AS(c.validate(), std::domain_error);
    c.mechanism = Mechanism::kInsertion;
    c.lambda = 3;  // 2*lambda != n
    CHECK_THROWS_AS(c.validate(), std::domain_error);
    c.mechanism = Mechanism::kDeletion;
    c.lambda = 4;
    c.p = 1.5;
    CHECK_THROWS_AS(c.validate(), std::domain_error);
  }
  SUBCASE("insertion sigma presets cover the reference levels") {
    SmoothingConfig c;
    c.n = 16;
    c.d = 20;
    c.mechanism = Mechanism::kInsertion;
    for (auto [level, sigma] :
         std::vector<std::pair<std::string, double>>{{"Low", 0.1}, {"Med", 0.2},
                                                     {"High", 0.3}}) {
      apply_noise_preset(c, level);
      CHECK(c.sigma == doctest::Approx(sigma));
      c.validate();
    }
  }
}
