#pragma once

#include <cstdint>
#include <limits>

namespace textcrs {

// Distinguished sentinel for an unbounded certified radius.
inline constexpr double kInfiniteRadius = std::numeric_limits<double>::infinity();

// Standard normal CDF.
double normal_cdf(double x);

// Inverse standard normal CDF on (0, 1). Acklam's rational approximation
// polished with one Newton step against erfc; round-trips |Phi(Phi^-1(q)) - q|
// to well under 1e-12 away from the extreme tails.
double inverse_normal_cdf(double q);

// Exact upper tail P[Bin(N, p) >= k].
double binomial_upper_tail(long long n, double p, long long k);

// Exact one-sided lower confidence bound: the p with
// P[Bin(N, p) >= k] = alpha, found by bisection on the exact tail.
// Returns 0 when k == 0.
double clopper_pearson_lower(long long k, long long n, double alpha);

// log of the binomial coefficient C(n, k).
double log_binomial(long long n, long long k);

// Certified radii. All take the lower bound pa on the top-class probability
// and the upper bound pb on the runner-up probability, and return the largest
// perturbation norm below which the smoothed prediction provably cannot
// change. Infinite radii are returned as kInfiniteRadius.

// Staircase substitution: certifies synonym substitutions with
// sum of interval indices <= radius.
double rad_substitution(double pa, double pb, double epsilon);

// Binary-case substitution radius -(1/eps) log(2 (1 - pa)); 0 for pa <= 1/2.
double rad_substitution_binary(double pa, double epsilon);

// Group-permutation reordering: certifies position displacements with
// l1 norm <= radius. lambda is half the shuffling group size.
double rad_reorder(double pa, double pb, int lambda);

// Gaussian insertion: certifies inserted-embedding l2 perturbations
// strictly below the radius.
double rad_insertion(double pa, double pb, double sigma);

// Bernoulli deletion: certifies up to the returned number of word deletions
// (inclusive). n_alive is the number of non-pad words the noise acts on,
// p the per-word deletion probability.
int rad_deletion(double pa, double pb, int n_alive, double p);

// Simultaneous permutation + embedding perturbation (full-shuffle smoothing
// only): true iff norm_r < rad_r and norm_t < rad_t. Throws if the smoothing
// was not a full shuffle (2 * lambda < n).
bool combined_certificate(double rad_r, double rad_t, double norm_r,
                          double norm_t, int lambda, int n);

}  // namespace textcrs
