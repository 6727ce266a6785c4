#include "textcrs/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>
#include <sstream>

#include "textcrs/bounds.hpp"

namespace textcrs {

ScoreFn model_score_fn(const PositionGatedClassifier& model) {
  return [&model](const EncodedInstance& inst, const std::vector<int>&) {
    return model.forward(inst);
  };
}

ScoreFn smoothed_score_fn(const PositionGatedClassifier& model,
                          const NoiseModel& noise, long long samples,
                          uint64_t seed, int workers) {
  return [&model, &noise, samples, seed, workers](
             const EncodedInstance& inst, const std::vector<int>& centers) {
    NoiseModel local = noise;
    if (noise.config.mechanism == Mechanism::kSubstitution && !centers.empty()) {
      local = NoiseModel::prepare_centered(noise.config, noise.synonyms, nullptr,
                                           centers);
    }
    auto counts = sample_under_noise(model, inst, local, samples,
                                     RngStream(seed), workers);
    std::vector<double> freq(counts.size());
    for (size_t c = 0; c < counts.size(); ++c) {
      freq[c] = static_cast<double>(counts[c]) / static_cast<double>(samples);
    }
    return freq;
  };
}

namespace {

// Word importance: score drop on the predicted class when the row is zeroed.
std::vector<std::pair<double, int>> rank_words(const ScoreFn& score,
                                               const EncodedInstance& inst,
                                               int target) {
  std::vector<std::pair<double, int>> ranked;
  std::vector<double> base = score(inst, {});
  for (int i = 0; i < inst.n; ++i) {
    if (inst.token_ids[i] == inst.pad_token || inst.token_ids[i] < 0) continue;
    EncodedInstance zeroed = inst;
    std::fill(zeroed.row(i), zeroed.row(i) + inst.d, 0.0);
    std::vector<double> s = score(zeroed, {});
    ranked.push_back({base[target] - s[target], i});
  }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  return ranked;
}

}  // namespace

AttackOutcome attack_substitution_greedy(const ScoreFn& score,
                                         const EncodedInstance& inst,
                                         const SynonymTable& syn,
                                         double budget) {
  AttackOutcome out;
  out.spec.kind = PerturbationSpec::Kind::kSubstitution;
  out.spec.interval_indices.assign(inst.n, 0);
  out.adversarial = inst;
  out.centers.assign(inst.n, 0);
  if (budget < 1.0) return out;

  int target = argmax_lowest(score(inst, {}));
  auto ranked = rank_words(score, inst, target);
  const EmbeddingTable& table = *syn.source;
  double spent = 0.0;

  for (const auto& [importance, row] : ranked) {
    (void)importance;
    const auto* entries = syn.find_id(inst.token_ids[row]);
    if (entries == nullptr || entries->empty()) continue;
    double base_target = score(out.adversarial, out.centers)[target];
    int best_idx = -1;
    double best_score = base_target;
    // Highest-cosine first = list order.
    for (size_t e = 0; e < entries->size(); ++e) {
      const auto& cand = (*entries)[e];
      if (spent + cand.interval > budget) continue;
      EncodedInstance trial = out.adversarial;
      trial.token_ids[row] = cand.id;
      const auto& v = table.vec(cand.id);
      std::copy(v.begin(), v.end(), trial.row(row));
      std::vector<int> trial_centers = out.centers;
      trial_centers[row] = cand.interval;
      double sc = score(trial, trial_centers)[target];
      if (sc < best_score) {
        best_score = sc;
        best_idx = static_cast<int>(e);
      }
    }
    if (best_idx < 0) continue;
    const auto& cand = (*entries)[best_idx];
    out.adversarial.token_ids[row] = cand.id;
    const auto& v = table.vec(cand.id);
    std::copy(v.begin(), v.end(), out.adversarial.row(row));
    out.centers[row] = cand.interval;
    out.spec.interval_indices[row] = cand.interval;
    spent += cand.interval;
    if (argmax_lowest(score(out.adversarial, out.centers)) != target) {
      out.success = true;
      break;
    }
  }
  out.norm = perturbation_norm(out.spec);
  return out;
}

AttackOutcome attack_reorder(const ScoreFn& score, const EncodedInstance& inst,
                             long long trials, double max_norm, RngStream rng) {
  AttackOutcome out;
  out.spec.kind = PerturbationSpec::Kind::kReorder;
  out.adversarial = inst;
  int target = argmax_lowest(score(inst, {}));
  const int n = inst.n;

  for (long long t = 0; t < trials; ++t) {
    RngStream trial_rng = rng.fork(static_cast<uint64_t>(t));
    // Random consecutive window, scaled up over time when unrestricted.
    int span = 2 + static_cast<int>(trial_rng.next_below(
                       std::max<uint64_t>(1, static_cast<uint64_t>(n) - 1)));
    span = std::min(span, n);
    int start = static_cast<int>(
        trial_rng.next_below(static_cast<uint64_t>(n - span + 1)));
    std::vector<int> targets(n);
    std::iota(targets.begin(), targets.end(), 0);
    std::vector<int> window(targets.begin() + start,
                            targets.begin() + start + span);
    trial_rng.shuffle(window);
    for (int j = 0; j < span; ++j) targets[start + j] = window[j];
    long long norm = 0;
    for (int i = 0; i < n; ++i) norm += std::abs(targets[i] - i);
    if (norm == 0) continue;
    if (max_norm >= 0.0 && static_cast<double>(norm) > max_norm) continue;
    EncodedInstance trial = inst;
    apply_permutation(trial, targets);
    if (argmax_lowest(score(trial, {})) != target) {
      out.success = true;
      out.spec.targets = targets;
      out.adversarial = std::move(trial);
      out.norm = static_cast<double>(norm);
      return out;
    }
  }
  return out;
}

AttackOutcome attack_insertion(const ScoreFn& score, const EncodedInstance& inst,
                               const SynonymTable& syn, int budget,
                               long long trials, RngStream rng) {
  AttackOutcome out;
  out.spec.kind = PerturbationSpec::Kind::kInsertion;
  out.adversarial = inst;
  if (budget < 1) return out;
  int target = argmax_lowest(score(inst, {}));
  const EmbeddingTable& table = *syn.source;

  // In-vocabulary insertion pool: synonyms of words present in the text.
  std::vector<int> pool;
  for (int i = 0; i < inst.n; ++i) {
    int token = inst.token_ids[i];
    if (token == inst.pad_token || token < 0) continue;
    if (const auto* entries = syn.find_id(token)) {
      for (const auto& e : *entries) pool.push_back(e.id);
    }
  }
  if (pool.empty()) return out;

  for (long long t = 0; t < trials; ++t) {
    RngStream trial_rng = rng.fork(static_cast<uint64_t>(t));
    int m = 1 + static_cast<int>(trial_rng.next_below(
                    static_cast<uint64_t>(budget)));
    m = std::min(m, inst.n - 1);
    // Distinct increasing positions with survivable markers.
    std::vector<int> positions;
    int limit = inst.n - m;
    if (limit < 1) continue;
    std::vector<int> all(limit);
    std::iota(all.begin(), all.end(), 0);
    trial_rng.shuffle(all);
    positions.assign(all.begin(), all.begin() + m);
    std::sort(positions.begin(), positions.end());
    std::vector<std::vector<double>> vectors;
    for (int j = 0; j < m; ++j) {
      vectors.push_back(table.vec(pool[trial_rng.next_below(pool.size())]));
    }
    EncodedInstance trial = inst;
    std::vector<int> old_map = trial.position_map;
    // Capture replaced tail rows before the transform overwrites them.
    std::vector<int> pos_to_row(inst.n);
    for (int i = 0; i < inst.n; ++i) pos_to_row[old_map[i]] = i;
    insertion_transform(trial, positions, vectors);
    std::vector<std::vector<double>> deltas;
    {
      std::vector<bool> was_replaced(inst.n, false);
      for (int i = 0; i < inst.n; ++i) {
        if (trial.token_ids[i] == -1 && inst.token_ids[i] != -1) {
          was_replaced[i] = true;
        }
      }
      int vi = 0;
      for (int p = 0; p < inst.n && vi < m; ++p) {
        int row = pos_to_row[p];
        if (!was_replaced[row]) continue;
        std::vector<double> delta(inst.d);
        for (int j = 0; j < inst.d; ++j) {
          delta[j] = trial.row(row)[j] - inst.row(row)[j];
        }
        deltas.push_back(std::move(delta));
        ++vi;
      }
    }
    double norm_r = 0.0;
    for (int i = 0; i < inst.n; ++i) {
      norm_r += std::abs(trial.position_map[i] - old_map[i]);
    }
    if (argmax_lowest(score(trial, {})) != target) {
      out.success = true;
      out.spec.positions = positions;
      out.spec.insert_deltas = deltas;
      out.norm = perturbation_norm(out.spec);
      out.norm_reorder = norm_r;
      out.adversarial = std::move(trial);
      return out;
    }
  }
  return out;
}

AttackOutcome attack_deletion_input_reduction(const ScoreFn& score,
                                              const EncodedInstance& inst,
                                              int budget) {
  AttackOutcome out;
  out.spec.kind = PerturbationSpec::Kind::kDeletion;
  out.adversarial = inst;
  if (budget < 1) return out;
  int target = argmax_lowest(score(inst, {}));

  EncodedInstance current = inst;
  std::vector<int> deleted_positions;
  for (int step = 0; step < budget; ++step) {
    // Least significant word = smallest drop in the target score.
    double best_drop = 1e300;
    int best_position = -1;
    double base = score(current, {})[target];
    for (int i = 0; i < current.n; ++i) {
      if (current.token_ids[i] == current.pad_token || current.token_ids[i] < 0)
        continue;
      EncodedInstance trial = current;
      deletion_transform(trial, {trial.position_map[i]});
      double drop = base - score(trial, {})[target];
      if (drop < best_drop) {
        best_drop = drop;
        best_position = current.position_map[i];
      }
    }
    if (best_position < 0) break;
    deletion_transform(current, {best_position});
    deleted_positions.push_back(best_position);
    if (argmax_lowest(score(current, {})) != target) {
      out.success = true;
      break;
    }
  }
  out.spec.positions = deleted_positions;
  out.norm = static_cast<double>(deleted_positions.size());
  out.adversarial = std::move(current);
  return out;
}

namespace {

// Confirms a suspected flip with a larger sample and an exact binomial lower
// bound: genuine only if some other class provably beats 1/2.
bool confirm_flip(const PositionGatedClassifier& model, const NoiseModel& noise,
                  const EncodedInstance& inst, const std::vector<int>& centers,
                  int certified_label, const HarnessOptions& opts,
                  uint64_t salt) {
  NoiseModel local = noise;
  if (noise.config.mechanism == Mechanism::kSubstitution && !centers.empty()) {
    local = NoiseModel::prepare_centered(noise.config, noise.synonyms, nullptr,
                                         centers);
  }
  auto counts = sample_under_noise(model, inst, local, opts.confirm_samples,
                                   RngStream(opts.seed ^ salt), opts.workers);
  for (int c = 0; c < model.num_classes; ++c) {
    if (c == certified_label) continue;
    double lower =
        clopper_pearson_lower(counts[c], opts.confirm_samples, opts.confirm_alpha);
    if (lower > 0.5) return true;
  }
  return false;
}

}  // namespace

HarnessReport soundness_harness(const PositionGatedClassifier& model,
                                const NoiseModel& noise,
                                const std::vector<EncodedInstance>& instances,
                                const std::vector<CertifyResult>& results,
                                const HarnessOptions& opts) {
  if (instances.size() != results.size()) {
    throw std::domain_error("soundness_harness: instances/results mismatch");
  }
  HarnessReport report;
  const Mechanism mech = noise.config.mechanism;
  const SynonymTable* syn = noise.synonyms;

  for (size_t idx = 0; idx < results.size(); ++idx) {
    const CertifyResult& res = results[idx];
    if (!res.certified) continue;
    ++report.certified_instances;
    const EncodedInstance& inst = instances[idx];
    int ya = res.label;
    RngStream rng = RngStream(opts.seed).fork(0xa77acc) .fork(idx);

    auto screen = smoothed_score_fn(model, noise, opts.screen_samples,
                                    opts.seed ^ 0x5c4ee4, opts.workers);

    auto check_candidate = [&](const EncodedInstance& cand,
                               const std::vector<int>& centers,
                               const std::string& attack, double norm) {
      ++report.candidates_tried;
      auto freq = screen(cand, centers);
      if (argmax_lowest(freq) == ya) return;
      if (confirm_flip(model, noise, cand, centers, ya, opts,
                       0xc0ffee ^ report.candidates_tried)) {
        std::ostringstream os;
        os << attack << " flip at norm " << norm << " (certified radius "
           << res.radius << ", reorder " << res.radius_reorder << ")";
        report.violations.push_back(
            {res.instance_id, attack, norm, os.str()});
      }
    };

    switch (mech) {
      case Mechanism::kSubstitution: {
        double budget = std::floor(res.radius);
        if (budget < 1.0 || syn == nullptr) break;
        // Random within-budget substitutions.
        std::vector<int> word_rows;
        for (int i = 0; i < inst.n; ++i) {
          if (inst.token_ids[i] != inst.pad_token && inst.token_ids[i] >= 0 &&
              syn->find_id(inst.token_ids[i]) != nullptr) {
            word_rows.push_back(i);
          }
        }
        if (word_rows.empty()) break;
        for (long long t = 0; t < opts.trials; ++t) {
          RngStream trng = rng.fork(t);
          EncodedInstance cand = inst;
          std::vector<int> centers(inst.n, 0);
          double spent = 0.0;
          int edits = 1 + static_cast<int>(trng.next_below(word_rows.size()));
          for (int e = 0; e < edits; ++e) {
            int row = word_rows[trng.next_below(word_rows.size())];
            const auto* entries = syn->find_id(inst.token_ids[row]);
            const auto& se = (*entries)[trng.next_below(entries->size())];
            if (centers[row] != 0) continue;
            if (spent + se.interval > budget) continue;
            cand.token_ids[row] = se.id;
            const auto& v = syn->source->vec(se.id);
            std::copy(v.begin(), v.end(), cand.row(row));
            centers[row] = se.interval;
            spent += se.interval;
          }
          if (spent == 0.0) continue;
          check_candidate(cand, centers, "substitution", spent);
        }
        break;
      }
      case Mechanism::kReorder: {
        double budget = res.radius;
        if (budget < 2.0) break;  // smallest nonzero displacement norm is 2
        for (long long t = 0; t < opts.trials; ++t) {
          RngStream trng = rng.fork(t);
          std::vector<int> targets(inst.n);
          std::iota(targets.begin(), targets.end(), 0);
          int span = 2 + static_cast<int>(trng.next_below(
                             static_cast<uint64_t>(inst.n - 1)));
          span = std::min(span, inst.n);
          int start = static_cast<int>(
              trng.next_below(static_cast<uint64_t>(inst.n - span + 1)));
          std::vector<int> win(targets.begin() + start,
                               targets.begin() + start + span);
          trng.shuffle(win);
          for (int j = 0; j < span; ++j) targets[start + j] = win[j];
          long long norm = 0;
          for (int i = 0; i < inst.n; ++i) norm += std::abs(targets[i] - i);
          if (norm == 0 || static_cast<double>(norm) > budget) continue;
          EncodedInstance cand = inst;
          apply_permutation(cand, targets);
          check_candidate(cand, {}, "reorder", static_cast<double>(norm));
        }
        break;
      }
      case Mechanism::kInsertion: {
        if (syn == nullptr) break;
        std::vector<int> pool;
        for (int i = 0; i < inst.n; ++i) {
          int token = inst.token_ids[i];
          if (token == inst.pad_token || token < 0) continue;
          if (const auto* entries = syn->find_id(token)) {
            for (const auto& e : *entries) pool.push_back(e.id);
          }
        }
        if (pool.empty()) break;
        for (long long t = 0; t < opts.trials; ++t) {
          RngStream trng = rng.fork(t);
          int m = 1 + static_cast<int>(trng.next_below(3));
          if (m >= inst.n) continue;
          int limit = inst.n - m;
          std::vector<int> all(limit);
          std::iota(all.begin(), all.end(), 0);
          trng.shuffle(all);
          std::vector<int> positions(all.begin(), all.begin() + m);
          std::sort(positions.begin(), positions.end());
          std::vector<std::vector<double>> vectors;
          for (int j = 0; j < m; ++j) {
            vectors.push_back(
                syn->source->vec(pool[trng.next_below(pool.size())]));
          }
          EncodedInstance cand = inst;
          std::vector<int> old_map = cand.position_map;
          EncodedInstance before = cand;
          insertion_transform(cand, positions, vectors);
          double normR = 0.0;
          for (int i = 0; i < inst.n; ++i) {
            normR += std::abs(cand.position_map[i] - old_map[i]);
          }
          double sq = 0.0;
          for (int i = 0; i < inst.n; ++i) {
            for (int j = 0; j < inst.d; ++j) {
              double diff = cand.row(i)[j] - before.row(i)[j];
              sq += diff * diff;
            }
          }
          double normI = std::sqrt(sq);
          // Inside the certified box only (strict).
          if (!(normR < res.radius_reorder && normI < res.radius)) continue;
          check_candidate(cand, {}, "insertion", normI);
        }
        break;
      }
      case Mechanism::kDeletion: {
        int budget = static_cast<int>(res.radius);
        std::vector<int> alive_pos;
        for (int i = 0; i < inst.n; ++i) {
          if (inst.token_ids[i] != inst.pad_token) {
            alive_pos.push_back(inst.position_map[i]);
          }
        }
        if (budget < 1 || alive_pos.empty()) break;
        for (long long t = 0; t < opts.trials; ++t) {
          RngStream trng = rng.fork(t);
          int m = 1 + static_cast<int>(trng.next_below(
                          static_cast<uint64_t>(budget)));
          m = std::min<int>(m, static_cast<int>(alive_pos.size()));
          std::vector<int> pool = alive_pos;
          trng.shuffle(pool);
          std::vector<int> positions(pool.begin(), pool.begin() + m);
          std::sort(positions.begin(), positions.end());
          EncodedInstance cand = inst;
          deletion_transform(cand, positions);
          check_candidate(cand, {}, "deletion", static_cast<double>(m));
        }
        break;
      }
    }
  }
  return report;
}

std::map<std::string, AttackStats> unrestricted_attack_accuracy(
    const PositionGatedClassifier& model,
    const std::vector<EncodedInstance>& instances, const SynonymTable& syn,
    long long trials_per_attack, uint64_t seed) {
  std::map<std::string, AttackStats> stats;
  ScoreFn score = model_score_fn(model);
  for (size_t i = 0; i < instances.size(); ++i) {
    const EncodedInstance& inst = instances[i];
    RngStream rng = RngStream(seed).fork(i);
    {
      auto out = attack_substitution_greedy(score, inst, syn, 1e18);
      auto& s = stats["substitution"];
      ++s.attempts;
      if (out.success) ++s.successes;
    }
    {
      auto out = attack_reorder(score, inst, trials_per_attack, -1.0, rng.fork(1));
      auto& s = stats["reorder"];
      ++s.attempts;
      if (out.success) ++s.successes;
    }
    {
      auto out = attack_insertion(score, inst, syn, std::max(1, inst.n / 2),
                                  trials_per_attack, rng.fork(2));
      auto& s = stats["insertion"];
      ++s.attempts;
      if (out.success) ++s.successes;
    }
    {
      auto out = attack_deletion_input_reduction(score, inst, inst.n);
      auto& s = stats["deletion"];
      ++s.attempts;
      if (out.success) ++s.successes;
    }
  }
  return stats;
}

void write_attack_csv(std::ostream& out, const std::vector<AttackRecord>& rows) {
  out << "instance_id,attack,success,norm,budget,trials\n";
  for (const auto& r : rows) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6g", r.norm);
    out << r.instance_id << ',' << r.attack << ',' << (r.success ? 1 : 0) << ','
        << buf << ',';
    std::snprintf(buf, sizeof(buf), "%.6g", r.budget);
    out << buf << ',' << r.trials << "\n";
  }
}

}  // namespace textcrs
