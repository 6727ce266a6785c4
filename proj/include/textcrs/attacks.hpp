#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "textcrs/certify.hpp"
#include "textcrs/classifier.hpp"
#include "textcrs/noise.hpp"

namespace textcrs {

// Attacks probe a score oracle: scores(inst, centers) where `centers` carries
// the staircase re-centering for substitution-perturbed inputs (empty
// otherwise). The oracle is the raw model for empirical attacks and a
// Monte-Carlo estimate of the smoothed classifier for certificate
// falsification.
using ScoreFn = std::function<std::vector<double>(
    const EncodedInstance&, const std::vector<int>& centers)>;

ScoreFn model_score_fn(const PositionGatedClassifier& model);
// Monte-Carlo smoothed scores with `samples` draws per query.
ScoreFn smoothed_score_fn(const PositionGatedClassifier& model,
                          const NoiseModel& noise, long long samples,
                          uint64_t seed, int workers);

struct AttackOutcome {
  bool success = false;
  PerturbationSpec spec;
  double norm = 0.0;
  double norm_reorder = 0.0;  // insertion: reorder norm of canonicalization
  EncodedInstance adversarial;
  std::vector<int> centers;  // substitution: staircase centers of the result
};

// Greedy synonym substitution: words ranked by score drop when zeroed, then
// substituted with their highest-cosine synonyms while the interval-index
// budget lasts.
AttackOutcome attack_substitution_greedy(const ScoreFn& score,
                                         const EncodedInstance& inst,
                                         const SynonymTable& syn,
                                         double budget);

// Random local reorderings of increasing displacement norm; first flip wins.
// max_norm < 0 means unrestricted.
AttackOutcome attack_reorder(const ScoreFn& score, const EncodedInstance& inst,
                             long long trials, double max_norm, RngStream rng);

// Inserts up to `budget` in-vocabulary synonyms of present words at random
// positions via the canonical insertion transform.
AttackOutcome attack_insertion(const ScoreFn& score, const EncodedInstance& inst,
                               const SynonymTable& syn, int budget,
                               long long trials, RngStream rng);

// Input reduction: repeatedly deletes the word whose removal least decreases
// the current-label score.
AttackOutcome attack_deletion_input_reduction(const ScoreFn& score,
                                              const EncodedInstance& inst,
                                              int budget);

struct HarnessOptions {
  long long trials = 10000;        // candidate perturbations per instance
  long long screen_samples = 64;   // cheap smoothed estimate per candidate
  long long confirm_samples = 2000;
  double confirm_alpha = 0.001;
  uint64_t seed = 1;
  int workers = 1;
};

struct HarnessViolation {
  long long instance_id = 0;
  std::string attack;
  double norm = 0.0;
  std::string detail;
};

struct HarnessReport {
  long long certified_instances = 0;
  long long candidates_tried = 0;
  std::vector<HarnessViolation> violations;  // must stay empty
};

// For every certified instance, bombards the smoothed classifier with
// perturbations of the certified kind inside the certified radius (and inside
// the (reorder, mechanism) box for insertion/deletion); any statistically
// confirmed prediction flip is a soundness violation.
HarnessReport soundness_harness(const PositionGatedClassifier& model,
                                const NoiseModel& noise,
                                const std::vector<EncodedInstance>& instances,
                                const std::vector<CertifyResult>& results,
                                const HarnessOptions& opts);

struct AttackStats {
  long long attempts = 0;
  long long successes = 0;
  double success_rate() const {
    return attempts ? static_cast<double>(successes) / attempts : 0.0;
  }
};

// Unrestricted attacks against the raw (unsmoothed) model; one row per attack
// family.
std::map<std::string, AttackStats> unrestricted_attack_accuracy(
    const PositionGatedClassifier& model,
    const std::vector<EncodedInstance>& instances, const SynonymTable& syn,
    long long trials_per_attack, uint64_t seed);

// Attack report CSV: instance_id,attack,success,norm,budget,trials
struct AttackRecord {
  long long instance_id = 0;
  std::string attack;
  bool success = false;
  double norm = 0.0;
  double budget = 0.0;
  long long trials = 0;
};
void write_attack_csv(std::ostream& out, const std::vector<AttackRecord>& rows);

}  // namespace textcrs
