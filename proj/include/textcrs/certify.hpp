#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "textcrs/classifier.hpp"
#include "textcrs/noise.hpp"

namespace textcrs {

struct CertifyResult {
  long long instance_id = 0;
  int gold = -1;            // 0-based gold label
  bool certified = false;   // false = ABSTAIN
  int label = -1;           // certified label (0-based)
  double pa_lower = 0.0;
  double pb_upper = 1.0;
  std::vector<long long> counts;  // tallies over classes from the N draws
  long long n0 = 0;
  long long n = 0;
  double alpha = 0.0;
  Mechanism mechanism = Mechanism::kSubstitution;
  double radius = 0.0;          // RAD_T of the mechanism
  double radius_reorder = 0.0;  // paired reorder radius (insertion/deletion)
  long long elapsed_samples = 0;
  uint64_t seed = 0;
};

// Draws `count` independent (theta_T, phi_T) samples of the instance,
// classifies each, and tallies argmax labels (ties to the lowest class id).
// Output is a pure function of the stream key, for any worker count.
std::vector<long long> sample_under_noise(const PositionGatedClassifier& model,
                                          const EncodedInstance& inst,
                                          const NoiseModel& noise,
                                          long long count, RngStream stream,
                                          int workers);

// Monte-Carlo certification: top class over n0 draws, Clopper-Pearson lower
// bound over fresh nsamples draws, abstain unless pa_lower > 1/2. The
// per-instance stream is derived from (config.seed, instance_id).
CertifyResult certify(const PositionGatedClassifier& model,
                      const EncodedInstance& inst, const NoiseModel& noise,
                      long long instance_id);

// Fraction of instances certified with the correct label at radius >= r,
// per grid point; monotone non-increasing in r.
struct CurvePoint {
  double radius = 0.0;
  double certified_accuracy = 0.0;
};
std::vector<CurvePoint> certified_accuracy_curve(
    const std::vector<CertifyResult>& results, const std::vector<double>& grid);

// Results CSV:
// instance_id,gold,outcome,label,pA_lower,radius,radius_reorder,N,alpha,mechanism,seed
void write_results_csv(std::ostream& out,
                       const std::vector<CertifyResult>& results);
std::vector<CertifyResult> read_results_csv(std::istream& in);

void write_curve_csv(std::ostream& out, const std::vector<CurvePoint>& curve);

}  // namespace textcrs
