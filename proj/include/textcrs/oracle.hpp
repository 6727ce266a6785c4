#pragma once

#include <optional>
#include <string>
#include <vector>

#include "textcrs/classifier.hpp"
#include "textcrs/noise.hpp"

namespace textcrs {

// Exact class distribution of the smoothed classifier by brute-force
// enumeration of the mechanism's discrete law (substitution, reorder,
// deletion). For substitution, `centers` re-centers each word's staircase
// (the law at an adversarially substituted input); empty means the original.
// Throws std::domain_error with the state count when the space is too large
// and std::domain_error for Gaussian insertion (not enumerable).
std::vector<double> exact_smoothed_distribution(
    const PositionGatedClassifier& model, const EncodedInstance& inst,
    const NoiseModel& noise, const std::vector<int>& centers = {});

struct VerifyVerdict {
  bool sound = true;
  long long perturbations_checked = 0;
  std::string counterexample;  // empty when sound
};

// Recomputes the exact smoothed argmax at every perturbation of the
// mechanism's kind with norm within `radius` (inclusive for the discrete
// substitution/reorder/deletion norms); SOUND iff the argmax never changes.
VerifyVerdict verify_certificate_exhaustive(const PositionGatedClassifier& model,
                                            const EncodedInstance& inst,
                                            const NoiseModel& noise,
                                            double radius);

// Tight deletion-count Neyman-Pearson radius over the deletion-count lattice:
// outcomes grouped by the number of deletions z with weight
// binom(n,z) p^z (1-p)^(n-z), likelihood ratio proportional to binom(z, delta),
// boundary groups split fractionally (randomized NP test). Largest delta such
// that every delta' <= delta strictly separates. n <= 20.
int exact_deletion_radius(int n, double p, double pa, double pb);

// Exact smoothed top-class probability of the sign-threshold classifier
// sign(a . x + bias) under N(0, sigma^2 I): Phi((a . x + bias) / (sigma |a|)).
double gaussian_linear_pa(const std::vector<double>& weight, double bias,
                          const std::vector<double>& input, double sigma);

struct ClaimReport {
  long long trials = 0;
  long long violations = 0;
  double worst_slack = 1e300;  // min over trials of (bound - requirement)
};

// Numeric check of the three staircase likelihood-ratio bounds on random
// event sets and integer shifts over a dims-dimensional index lattice with
// the untruncated staircase law:
//   P(V in A) >= exp(-|delta|_1 eps) P(W in A)
//   P(V in A) >= 1 - exp(+|delta|_1 eps) (1 - P(W in A))
//   P(V in B) <= exp(+|delta|_1 eps) P(W in B)
ClaimReport np_claim_checks(int s, double epsilon, int dims, long long trials,
                            uint64_t seed);

}  // namespace textcrs
