#pragma once

#include <optional>
#include <string>
#include <vector>

#include "textcrs/embedding.hpp"
#include "textcrs/rng.hpp"

namespace textcrs {

enum class Mechanism { kSubstitution, kReorder, kInsertion, kDeletion };

std::string mechanism_name(Mechanism m);
Mechanism mechanism_from_name(const std::string& name);

// Noise parameters for one smoothing mechanism plus the Monte-Carlo
// certification parameters. The reordering field lambda is the radius unit;
// the sampler shuffles within groups of size 2*lambda (a full shuffle when
// 2*lambda = n, which insertion and deletion always use).
struct SmoothingConfig {
  Mechanism mechanism = Mechanism::kSubstitution;

  int s = 0;                 // substitution: synonym count
  double gamma = 1.0;        // substitution: staircase geometry
  double delta_width = 1.0;  // substitution: interval width
  int lambda = 1;            // reorder/insertion/deletion
  double sigma = 0.0;        // insertion
  bool ogn = false;          // insertion: use embedding-average noise mean
  double p = 0.0;            // deletion

  int n = 0;  // fixed sequence length
  int d = 0;  // embedding dimension

  long long n0 = 100;
  long long nsamples = 100000;
  double alpha = 0.001;
  uint64_t seed = 1;
  int workers = 1;

  double epsilon_stair() const { return 5.0 / s; }
  int group_size() const;  // sampler group size (2*lambda clamped to n)
  void validate() const;   // throws std::domain_error on bad parameters

  std::string to_json() const;
  static SmoothingConfig from_json(const std::string& text);
};

// Applies Table IV's named noise levels (Low/Med/High) for the config's
// mechanism and sequence length n.
void apply_noise_preset(SmoothingConfig& config, const std::string& level);

// Discrete staircase mass over interval indices 0..s: index k carries the
// continuous mass of the symmetric interval pair at distance k, normalized.
// With gamma = 1 this is exp(-k*eps) / sum_j exp(-j*eps).
std::vector<double> staircase_pmf(int s, double epsilon, double gamma,
                                  double delta_width);

// Staircase mass over indices 0..s for a distribution re-centered at lattice
// point `center` (an interval index), truncated to the word's 2s+2-interval
// window and renormalized. center = 0 reduces to staircase_pmf with gamma=1.
std::vector<double> staircase_pmf_centered(int s, double epsilon, int center);

// Per-row independent staircase substitution. Index 0 keeps the row; index
// k >= 1 substitutes a uniformly chosen synonym with interval index k,
// falling back to the nearest populated interval (ties toward smaller k).
// Pad rows are never touched. `centers`, when given, recenters row i's
// staircase at centers[i] (used to evaluate the smoothed classifier at
// adversarially substituted inputs).
void apply_substitution_noise(EncodedInstance& inst, const SynonymTable& syn,
                              const std::vector<double>& pmf, RngStream& rng);
void apply_substitution_noise_centered(EncodedInstance& inst,
                                       const SynonymTable& syn, int s,
                                       double epsilon,
                                       const std::vector<int>& centers,
                                       RngStream& rng);

// Uniformly partitions positions 0..n-1 into ceil(n/group) groups of size
// `group` (last group takes the remainder) and shuffles uniformly within each
// group. group = 1 is the identity; group = n a uniform permutation.
std::vector<int> sample_group_permutation(int n, int group, RngStream& rng);

// Composes the instance's position map with r (position p moves to r[p]).
void apply_permutation(EncodedInstance& inst, const std::vector<int>& r);

// Adds independent N(mean_j, sigma^2) to every entry, pad rows included.
void apply_gaussian_noise(EncodedInstance& inst, double sigma,
                          const std::vector<double>& mean, RngStream& rng);

// Each non-pad row independently becomes the zero (pad) vector with
// probability p; pad rows stay pad.
void apply_bernoulli_deletion(EncodedInstance& inst, double p, RngStream& rng);

// Canonical insertion: the rendered sequence equals insert-then-truncate of
// the original text; surviving original rows keep their storage slots and the
// inserted vectors take over the slots of the truncated tail words.
// `positions` are 0-based indices into the current rendered sequence (the
// inserted word lands immediately before that word), strictly increasing.
void insertion_transform(EncodedInstance& inst,
                         const std::vector<int>& positions,
                         const std::vector<std::vector<double>>& vectors);

// Canonical deletion: zeroes the rows rendered at `positions` and moves their
// position slots to the tail, so the rendered non-pad prefix equals the text
// with those words removed.
void deletion_transform(EncodedInstance& inst, const std::vector<int>& positions);

struct PerturbationSpec {
  enum class Kind { kSubstitution, kReorder, kInsertion, kDeletion };
  Kind kind = Kind::kSubstitution;
  std::vector<int> interval_indices;  // S: a_1..a_n (>= 0, 0 = unchanged)
  std::vector<int> targets;           // R: bijection, position i -> targets[i]
  std::vector<int> positions;         // I/D: strictly increasing, 0-based
  // I: per inserted vector, difference to the tail row it replaces.
  std::vector<std::vector<double>> insert_deltas;
};

// S: sum of interval indices. R: sum of |r_i - i|. I: l2 norm of the stacked
// insert deltas. D: number of deletions.
double perturbation_norm(const PerturbationSpec& spec);

// Per-word interval -> synonym candidates with the nearest-interval fallback
// resolved, so a drawn index maps to its candidate list in O(1).
struct SynonymLookup {
  // candidates[token_id][k-1] lists synonym ids for drawn index k in 1..s.
  std::unordered_map<int, std::vector<std::vector<int>>> candidates;
  static SynonymLookup build(const SynonymTable& syn);
};

// Prepared sampler for one (config, tables) pair: theta_T and phi_T in one
// draw. Holds no mutable state after prepare(); safe to share across threads.
struct NoiseModel {
  SmoothingConfig config;
  const SynonymTable* synonyms = nullptr;
  SynonymLookup lookup;           // substitution
  std::vector<double> stair_cdf;  // substitution, cumulative
  // Optional per-row cumulative laws for evaluating the smoothed classifier
  // at an adversarially substituted input (staircase re-centered per row).
  std::vector<std::vector<double>> row_cdfs;
  std::vector<double> mean;  // insertion noise mean (empty = zeros)

  static NoiseModel prepare(const SmoothingConfig& config,
                            const SynonymTable* synonyms,
                            const EmbeddingTable* table);
  // Same, but substitution noise re-centered at the given interval indices.
  static NoiseModel prepare_centered(const SmoothingConfig& config,
                                     const SynonymTable* synonyms,
                                     const EmbeddingTable* table,
                                     const std::vector<int>& centers);

  // One fresh draw of (theta_T, phi_T) applied in place.
  void sample(EncodedInstance& inst, RngStream& rng) const;
};

}  // namespace textcrs
