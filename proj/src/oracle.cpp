#include "textcrs/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "textcrs/bounds.hpp"

namespace textcrs {

namespace {

constexpr long long kMaxStates = 1000000;

struct WordOutcome {
  int token = -1;
  double prob = 0.0;
};

// Law of one word under staircase substitution noise centered at `center`:
// index 0 keeps the word, index k >= 1 maps to the nearest populated interval
// with a uniform choice inside it (the sampler's semantics, exactly).
std::vector<WordOutcome> word_substitution_law(int token,
                                               const SynonymTable& syn,
                                               const SynonymLookup& lookup,
                                               int s, double epsilon,
                                               int center) {
  std::vector<double> pmf = staircase_pmf_centered(s, epsilon, center);
  std::map<int, double> accum;
  auto it = lookup.candidates.find(token);
  for (int k = 0; k <= s; ++k) {
    if (k == 0 || it == lookup.candidates.end() || it->second.empty()) {
      accum[token] += pmf[k];
      continue;
    }
    const auto& cands = it->second[k - 1];
    if (cands.empty()) {
      accum[token] += pmf[k];
      continue;
    }
    double share = pmf[k] / static_cast<double>(cands.size());
    for (int id : cands) accum[id] += share;
  }
  std::vector<WordOutcome> law;
  law.reserve(accum.size());
  for (const auto& [id, prob] : accum) law.push_back({id, prob});
  return law;
}

std::vector<double> exact_substitution(const PositionGatedClassifier& model,
                                       const EncodedInstance& inst,
                                       const NoiseModel& noise,
                                       const std::vector<int>& centers) {
  if (noise.config.s == 0) {  // zero noise: point mass on the base prediction
    std::vector<double> probs(model.num_classes, 0.0);
    probs[model.predict(inst)] = 1.0;
    return probs;
  }
  const SynonymTable& syn = *noise.synonyms;
  const EmbeddingTable& table = *syn.source;
  int s = noise.config.s;
  double eps = noise.config.epsilon_stair();

  std::vector<int> word_rows;
  std::vector<std::vector<WordOutcome>> laws;
  long long states = 1;
  for (int i = 0; i < inst.n; ++i) {
    int token = inst.token_ids[i];
    if (token == inst.pad_token || token < 0) continue;
    int center = centers.empty() ? 0 : centers[i];
    auto law = word_substitution_law(token, syn, noise.lookup, s, eps, center);
    states *= static_cast<long long>(law.size());
    if (states > kMaxStates) {
      throw std::domain_error("exact_smoothed_distribution: state space over " +
                              std::to_string(kMaxStates));
    }
    word_rows.push_back(i);
    laws.push_back(std::move(law));
  }

  std::vector<double> probs(model.num_classes, 0.0);
  std::vector<double> rendered = inst.rendered();
  const int d = inst.d;
  std::function<void(size_t, double)> recurse = [&](size_t wi, double weight) {
    if (wi == laws.size()) {
      probs[model.predict_rendered(rendered.data())] += weight;
      return;
    }
    int row = word_rows[wi];
    int pos = inst.position_map[row];
    double* slot = rendered.data() + static_cast<size_t>(pos) * d;
    for (const auto& outcome : laws[wi]) {
      const auto& v = table.vec(outcome.token);
      std::copy(v.begin(), v.end(), slot);
      recurse(wi + 1, weight * outcome.prob);
    }
    const double* orig = inst.row(row);
    std::copy(orig, orig + d, slot);
  };
  recurse(0, 1.0);
  return probs;
}

// Exact law of the group-shuffle permutation over position maps: positions
// are split uniformly into groups of size `group` (one remainder group when
// group does not divide n) and each group is shuffled uniformly.
std::map<std::vector<int>, double> group_permutation_law(int n, int group) {
  // Enumerate the distinct partitions: choose the remainder set first (its
  // size differs from the others), then split the rest into equal groups,
  // anchoring each at its smallest member so no partition repeats. Every
  // partition with this size profile is equally likely under the sampler.
  int rem = n % group;
  std::vector<std::vector<std::vector<int>>> partitions;

  std::function<void(std::vector<int>, std::vector<std::vector<int>>&)>
      split_equal = [&](std::vector<int> rest, std::vector<std::vector<int>>& acc) {
        if (rest.empty()) {
          partitions.push_back(acc);
          return;
        }
        int anchor = rest[0];
        std::vector<int> pool(rest.begin() + 1, rest.end());
        std::vector<int> pick;
        std::function<void(size_t)> choose = [&](size_t start) {
          if (static_cast<int>(pick.size()) == group - 1) {
            std::vector<int> g = {anchor};
            g.insert(g.end(), pick.begin(), pick.end());
            std::vector<int> remaining;
            for (int x : pool) {
              if (std::find(pick.begin(), pick.end(), x) == pick.end()) {
                remaining.push_back(x);
              }
            }
            acc.push_back(g);
            split_equal(remaining, acc);
            acc.pop_back();
            return;
          }
          size_t need = group - 1 - pick.size();
          for (size_t i = start; i + need <= pool.size(); ++i) {
            pick.push_back(pool[i]);
            choose(i + 1);
            pick.pop_back();
          }
        };
        choose(0);
      };

  std::vector<int> all(n);
  std::iota(all.begin(), all.end(), 0);
  if (rem == 0) {
    std::vector<std::vector<int>> acc;
    split_equal(all, acc);
  } else {
    // All size-rem subsets as the remainder group.
    std::vector<int> pick;
    std::function<void(size_t)> choose_rem = [&](size_t start) {
      if (static_cast<int>(pick.size()) == rem) {
        std::vector<int> rest;
        for (int x : all) {
          if (std::find(pick.begin(), pick.end(), x) == pick.end()) {
            rest.push_back(x);
          }
        }
        std::vector<std::vector<int>> acc = {pick};
        split_equal(rest, acc);
        return;
      }
      size_t need = rem - pick.size();
      for (size_t i = start; i + need <= all.size(); ++i) {
        pick.push_back(all[i]);
        choose_rem(i + 1);
        pick.pop_back();
      }
    };
    choose_rem(0);
  }

  std::map<std::vector<int>, double> law;
  double part_weight = 1.0 / static_cast<double>(partitions.size());
  std::vector<int> r(n);
  for (const auto& partition : partitions) {
    long long combos = 1;
    for (const auto& g : partition) {
      long long f = 1;
      for (int i = 2; i <= static_cast<int>(g.size()); ++i) f *= i;
      combos *= f;
      if (combos > kMaxStates) {
        throw std::domain_error("group_permutation_law: state space too large");
      }
    }
    double w = part_weight / static_cast<double>(combos);
    std::function<void(size_t)> shuffle_group = [&](size_t gi) {
      if (gi == partition.size()) {
        law[r] += w;
        return;
      }
      std::vector<int> targets = partition[gi];
      std::sort(targets.begin(), targets.end());
      do {
        for (size_t j = 0; j < targets.size(); ++j) {
          r[partition[gi][j]] = targets[j];
        }
        shuffle_group(gi + 1);
      } while (std::next_permutation(targets.begin(), targets.end()));
    };
    shuffle_group(0);
  }
  return law;
}

std::vector<double> exact_reorder(const PositionGatedClassifier& model,
                                  const EncodedInstance& inst,
                                  const NoiseModel& noise) {
  if (inst.n > 8) {
    throw std::domain_error("exact_smoothed_distribution: reorder needs n <= 8");
  }
  auto law = group_permutation_law(inst.n, noise.config.group_size());
  std::vector<double> probs(model.num_classes, 0.0);
  const int d = inst.d;
  std::vector<double> rendered(static_cast<size_t>(inst.n) * d);
  for (const auto& [r, w] : law) {
    for (int i = 0; i < inst.n; ++i) {
      int pos = r[inst.position_map[i]];
      std::copy(inst.row(i), inst.row(i) + d,
                rendered.data() + static_cast<size_t>(pos) * d);
    }
    probs[model.predict_rendered(rendered.data())] += w;
  }
  return probs;
}

std::vector<double> exact_deletion(const PositionGatedClassifier& model,
                                   const EncodedInstance& inst,
                                   const NoiseModel& noise) {
  if (inst.n > 8) {
    throw std::domain_error("exact_smoothed_distribution: deletion needs n <= 8");
  }
  std::vector<int> alive;
  for (int i = 0; i < inst.n; ++i) {
    if (inst.token_ids[i] != inst.pad_token) alive.push_back(i);
  }
  if (alive.size() > 20) {
    throw std::domain_error("exact_smoothed_distribution: 2^alive too large");
  }
  double p = noise.config.p;
  const int d = inst.d;
  std::vector<double> probs(model.num_classes, 0.0);

  // Precompute the uniform-shuffle average per survivor subset.
  std::vector<int> perm(inst.n);
  std::vector<double> rendered(static_cast<size_t>(inst.n) * d);
  const long long subsets = 1LL << alive.size();
  for (long long mask = 0; mask < subsets; ++mask) {
    int deleted = __builtin_popcountll(mask);
    double w = std::pow(p, deleted) *
               std::pow(1.0 - p, static_cast<int>(alive.size()) - deleted);
    if (w == 0.0) continue;
    std::vector<double> rows = inst.embedding;
    for (size_t j = 0; j < alive.size(); ++j) {
      if ((mask >> j) & 1) {
        std::fill(rows.begin() + static_cast<size_t>(alive[j]) * d,
                  rows.begin() + static_cast<size_t>(alive[j] + 1) * d, 0.0);
      }
    }
    std::iota(perm.begin(), perm.end(), 0);
    std::vector<double> tally(model.num_classes, 0.0);
    long long arrangements = 0;
    do {
      for (int i = 0; i < inst.n; ++i) {
        std::copy(rows.begin() + static_cast<size_t>(perm[i]) * d,
                  rows.begin() + static_cast<size_t>(perm[i] + 1) * d,
                  rendered.begin() + static_cast<size_t>(i) * d);
      }
      tally[model.predict_rendered(rendered.data())] += 1.0;
      ++arrangements;
    } while (std::next_permutation(perm.begin(), perm.end()));
    for (int c = 0; c < model.num_classes; ++c) {
      probs[c] += w * tally[c] / static_cast<double>(arrangements);
    }
  }
  return probs;
}

}  // namespace

std::vector<double> exact_smoothed_distribution(
    const PositionGatedClassifier& model, const EncodedInstance& inst,
    const NoiseModel& noise, const std::vector<int>& centers) {
  switch (noise.config.mechanism) {
    case Mechanism::kSubstitution:
      return exact_substitution(model, inst, noise, centers);
    case Mechanism::kReorder:
      return exact_reorder(model, inst, noise);
    case Mechanism::kDeletion:
      return exact_deletion(model, inst, noise);
    case Mechanism::kInsertion:
      throw std::domain_error(
          "exact_smoothed_distribution: Gaussian insertion is not enumerable");
  }
  throw std::domain_error("exact_smoothed_distribution: unknown mechanism");
}

namespace {

std::string describe_substitution(const std::vector<int>& centers) {
  std::ostringstream os;
  os << "substitution centers [";
  for (size_t i = 0; i < centers.size(); ++i) {
    os << (i ? " " : "") << centers[i];
  }
  os << "]";
  return os.str();
}

VerifyVerdict verify_substitution(const PositionGatedClassifier& model,
                                  const EncodedInstance& inst,
                                  const NoiseModel& noise, double radius) {
  VerifyVerdict verdict;
  auto base = exact_smoothed_distribution(model, inst, noise);
  int ya = argmax_lowest(base);

  // Achievable interval indices per word: 0 plus the populated intervals.
  std::vector<int> word_rows;
  std::vector<std::vector<int>> choices;
  for (int i = 0; i < inst.n; ++i) {
    int token = inst.token_ids[i];
    if (token == inst.pad_token || token < 0) continue;
    std::vector<int> ks = {0};
    if (const auto* entries = noise.synonyms->find_id(token)) {
      std::vector<int> ivs;
      for (const auto& e : *entries) ivs.push_back(e.interval);
      std::sort(ivs.begin(), ivs.end());
      ivs.erase(std::unique(ivs.begin(), ivs.end()), ivs.end());
      for (int k : ivs) ks.push_back(k);
    }
    word_rows.push_back(i);
    choices.push_back(std::move(ks));
  }

  std::vector<int> centers(inst.n, 0);
  std::function<bool(size_t, double)> sweep = [&](size_t wi,
                                                  double budget) -> bool {
    if (wi == choices.size()) {
      bool nonzero = false;
      for (int c : centers) {
        if (c != 0) { nonzero = true; break; }
      }
      if (!nonzero) return true;
      auto dist = exact_smoothed_distribution(model, inst, noise, centers);
      ++verdict.perturbations_checked;
      if (argmax_lowest(dist) != ya) {
        verdict.sound = false;
        verdict.counterexample = describe_substitution(centers);
        return false;
      }
      return true;
    }
    for (int k : choices[wi]) {
      if (k > budget) break;
      centers[word_rows[wi]] = k;
      if (!sweep(wi + 1, budget - k)) return false;
      centers[word_rows[wi]] = 0;
    }
    return true;
  };
  sweep(0, radius);
  return verdict;
}

VerifyVerdict verify_reorder(const PositionGatedClassifier& model,
                             const EncodedInstance& inst,
                             const NoiseModel& noise, double radius) {
  VerifyVerdict verdict;
  auto base = exact_smoothed_distribution(model, inst, noise);
  int ya = argmax_lowest(base);
  std::vector<int> perm(inst.n);
  std::iota(perm.begin(), perm.end(), 0);
  do {
    long long norm = 0;
    for (int i = 0; i < inst.n; ++i) norm += std::abs(perm[i] - i);
    if (norm == 0 || static_cast<double>(norm) > radius) continue;
    EncodedInstance perturbed = inst;
    apply_permutation(perturbed, perm);
    auto dist = exact_smoothed_distribution(model, perturbed, noise);
    ++verdict.perturbations_checked;
    if (argmax_lowest(dist) != ya) {
      verdict.sound = false;
      std::ostringstream os;
      os << "reorder targets [";
      for (int i = 0; i < inst.n; ++i) os << (i ? " " : "") << perm[i];
      os << "] norm " << norm;
      verdict.counterexample = os.str();
      return verdict;
    }
  } while (std::next_permutation(perm.begin(), perm.end()));
  return verdict;
}

VerifyVerdict verify_deletion(const PositionGatedClassifier& model,
                              const EncodedInstance& inst,
                              const NoiseModel& noise, double radius) {
  VerifyVerdict verdict;
  auto base = exact_smoothed_distribution(model, inst, noise);
  int ya = argmax_lowest(base);
  std::vector<int> alive_positions;
  for (int i = 0; i < inst.n; ++i) {
    if (inst.token_ids[i] != inst.pad_token) {
      alive_positions.push_back(inst.position_map[i]);
    }
  }
  std::sort(alive_positions.begin(), alive_positions.end());
  int max_del = std::min<int>(static_cast<int>(radius),
                              static_cast<int>(alive_positions.size()));
  const long long subsets = 1LL << alive_positions.size();
  for (long long mask = 1; mask < subsets; ++mask) {
    int m = __builtin_popcountll(mask);
    if (m > max_del) continue;
    std::vector<int> positions;
    for (size_t j = 0; j < alive_positions.size(); ++j) {
      if ((mask >> j) & 1) positions.push_back(alive_positions[j]);
    }
    EncodedInstance perturbed = inst;
    deletion_transform(perturbed, positions);
    auto dist = exact_smoothed_distribution(model, perturbed, noise);
    ++verdict.perturbations_checked;
    if (argmax_lowest(dist) != ya) {
      verdict.sound = false;
      std::ostringstream os;
      os << "delete positions [";
      for (size_t i = 0; i < positions.size(); ++i) {
        os << (i ? " " : "") << positions[i];
      }
      os << "]";
      verdict.counterexample = os.str();
      return verdict;
    }
  }
  return verdict;
}

}  // namespace

VerifyVerdict verify_certificate_exhaustive(const PositionGatedClassifier& model,
                                            const EncodedInstance& inst,
                                            const NoiseModel& noise,
                                            double radius) {
  if (radius < 0.0 || std::isnan(radius)) {
    throw std::domain_error("verify_certificate_exhaustive: bad radius");
  }
  switch (noise.config.mechanism) {
    case Mechanism::kSubstitution:
      return verify_substitution(model, inst, noise, radius);
    case Mechanism::kReorder:
      return verify_reorder(model, inst, noise, radius);
    case Mechanism::kDeletion:
      return verify_deletion(model, inst, noise, radius);
    case Mechanism::kInsertion:
      throw std::domain_error(
          "verify_certificate_exhaustive: insertion is not enumerable");
  }
  throw std::domain_error("verify_certificate_exhaustive: unknown mechanism");
}

namespace {

double binom_pmf(int n, double p, int z) {
  return std::exp(log_binomial(n, z) + z * std::log(p) +
                  (n - z) * std::log1p(-p));
}

// Greedy fractional NP value: take deletion-count groups in the given order
// until W-mass `target` is reached, splitting the boundary group.
double np_greedy(int n, double p, int delta, double target,
                 const std::vector<int>& order) {
  double acc_w = 0.0, acc_v = 0.0;
  for (int z : order) {
    double w = binom_pmf(n, p, z);
    double v = z < delta ? 0.0
                         : std::exp(log_binomial(n - delta, z - delta) +
                                    (z - delta) * std::log(p) +
                                    (n - z) * std::log1p(-p));
    if (acc_w + w <= target + 1e-15) {
      acc_w += w;
      acc_v += v;
    } else {
      double frac = w > 0.0 ? (target - acc_w) / w : 0.0;
      frac = std::clamp(frac, 0.0, 1.0);
      acc_v += frac * v;
      break;
    }
  }
  return acc_v;
}

}  // namespace

int exact_deletion_radius(int n, double p, double pa, double pb) {
  if (n < 1 || n > 20) throw std::domain_error("exact_deletion_radius: n in [1,20]");
  if (!(p > 0.0 && p < 1.0)) throw std::domain_error("exact_deletion_radius: p");
  if (!(pa >= pb && pb >= 0.0 && pa <= 1.0)) {
    throw std::domain_error("exact_deletion_radius: need 1 >= pa >= pb >= 0");
  }
  // Likelihood ratio C(z, delta) is nondecreasing in z: the adversarial A
  // fills from z = 0 upward, the adversarial B from z = n downward.
  std::vector<int> ascending(n + 1), descending(n + 1);
  std::iota(ascending.begin(), ascending.end(), 0);
  for (int z = 0; z <= n; ++z) descending[z] = n - z;
  int radius = 0;
  for (int delta = 1; delta <= n; ++delta) {
    double min_a = np_greedy(n, p, delta, pa, ascending);
    double max_b = np_greedy(n, p, delta, pb, descending);
    if (min_a > max_b + 1e-12) {
      radius = delta;
    } else {
      break;
    }
  }
  return radius;
}

double gaussian_linear_pa(const std::vector<double>& weight, double bias,
                          const std::vector<double>& input, double sigma) {
  if (weight.size() != input.size()) {
    throw std::domain_error("gaussian_linear_pa: dimension mismatch");
  }
  if (!(sigma > 0.0)) throw std::domain_error("gaussian_linear_pa: sigma <= 0");
  double dot = 0.0, norm_sq = 0.0;
  for (size_t i = 0; i < weight.size(); ++i) {
    dot += weight[i] * input[i];
    norm_sq += weight[i] * weight[i];
  }
  if (norm_sq == 0.0) throw std::domain_error("gaussian_linear_pa: zero weight");
  return normal_cdf((dot + bias) / (sigma * std::sqrt(norm_sq)));
}

ClaimReport np_claim_checks(int s, double epsilon, int dims, long long trials,
                            uint64_t seed) {
  if (s < 1 || dims < 1 || dims > 3) {
    throw std::domain_error("np_claim_checks: need s >= 1, dims in [1,3]");
  }
  // Untruncated staircase law per dimension: interval m in the window
  // [-(s+1), s] has mass exp(-rank * eps) (1 - exp(-eps)) / 2 where rank is
  // the interval distance to the center point. Mass outside the window is
  // never assigned to the random event sets, which keeps all three bounds
  // exact inequalities.
  const int lo = -(s + 1), hi = s;
  const int width = hi - lo + 1;
  const double unit = (1.0 - std::exp(-epsilon)) / 2.0;
  auto mass = [&](int m, int center) {
    int rank = m >= center ? m - center : center - 1 - m;
    return std::exp(-rank * epsilon) * unit;
  };

  long long cells = 1;
  for (int k = 0; k < dims; ++k) cells *= width;

  RngStream rng(seed);
  ClaimReport report;
  std::vector<int> shift(dims);
  std::vector<int> coords(dims);
  for (long long t = 0; t < trials; ++t) {
    RngStream trial = rng.fork(static_cast<uint64_t>(t));
    long long l1 = 0;
    for (int k = 0; k < dims; ++k) {
      shift[k] = static_cast<int>(trial.next_below(s + 1));
      l1 += shift[k];
    }
    double inclusion = 0.1 + 0.8 * trial.next_unit();
    double pw_a = 0.0, pv_a = 0.0, pw_b = 0.0, pv_b = 0.0;
    for (long long cell = 0; cell < cells; ++cell) {
      long long rest = cell;
      double w = 1.0, v = 1.0;
      for (int k = 0; k < dims; ++k) {
        int m = lo + static_cast<int>(rest % width);
        rest /= width;
        w *= mass(m, 0);
        v *= mass(m, shift[k]);
      }
      bool in_a = trial.next_unit() < inclusion;
      bool in_b = trial.next_unit() < 1.0 - inclusion;
      if (in_a) {
        pw_a += w;
        pv_a += v;
      }
      if (in_b) {
        pw_b += w;
        pv_b += v;
      }
    }
    double factor = std::exp(static_cast<double>(l1) * epsilon);
    double slack1 = pv_a - pw_a / factor;
    double slack2 = pv_a - (1.0 - factor * (1.0 - pw_a));
    double slack3 = factor * pw_b - pv_b;
    double slack = std::min({slack1, slack2, slack3});
    report.worst_slack = std::min(report.worst_slack, slack);
    if (slack < -1e-12) ++report.violations;
    ++report.trials;
  }
  return report;
}

}  // namespace textcrs
