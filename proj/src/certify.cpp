#include "textcrs/certify.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "textcrs/bounds.hpp"

namespace textcrs {

namespace {
constexpr uint64_t kSelectionPhase = 0;
constexpr uint64_t kEstimationPhase = 1;
}  // namespace

std::vector<long long> sample_under_noise(const PositionGatedClassifier& model,
                                          const EncodedInstance& inst,
                                          const NoiseModel& noise,
                                          long long count, RngStream stream,
                                          int workers) {
  if (count < 1) throw std::domain_error("sample_under_noise: count < 1");
  workers = std::max(1, workers);
  const int C = model.num_classes;

  auto run_range = [&](long long lo, long long hi, std::vector<long long>& tally) {
    EncodedInstance noisy;
    for (long long i = lo; i < hi; ++i) {
      noisy = inst;
      RngStream draw = stream.fork(static_cast<uint64_t>(i));
      noise.sample(noisy, draw);
      tally[model.predict(noisy)] += 1;
    }
  };

  if (workers == 1 || count < 256) {
    std::vector<long long> counts(C, 0);
    run_range(0, count, counts);
    return counts;
  }
  std::vector<std::vector<long long>> partial(workers,
                                              std::vector<long long>(C, 0));
  std::vector<std::thread> threads;
  long long chunk = (count + workers - 1) / workers;
  for (int w = 0; w < workers; ++w) {
    long long lo = w * chunk;
    long long hi = std::min(count, lo + chunk);
    if (lo >= hi) break;
    threads.emplace_back([&, w, lo, hi] { run_range(lo, hi, partial[w]); });
  }
  for (auto& t : threads) t.join();
  std::vector<long long> counts(C, 0);
  for (const auto& tally : partial) {
    for (int c = 0; c < C; ++c) counts[c] += tally[c];
  }
  return counts;
}

CertifyResult certify(const PositionGatedClassifier& model,
                      const EncodedInstance& inst, const NoiseModel& noise,
                      long long instance_id) {
  const SmoothingConfig& cfg = noise.config;
  cfg.validate();
  CertifyResult r;
  r.instance_id = instance_id;
  r.gold = inst.label;
  r.n0 = cfg.n0;
  r.n = cfg.nsamples;
  r.alpha = cfg.alpha;
  r.mechanism = cfg.mechanism;
  r.seed = cfg.seed;

  RngStream master = RngStream(cfg.seed).fork(static_cast<uint64_t>(instance_id));
  auto counts0 = sample_under_noise(model, inst, noise, cfg.n0,
                                    master.fork(kSelectionPhase), cfg.workers);
  int top = 0;
  for (int c = 1; c < model.num_classes; ++c) {
    if (counts0[c] > counts0[top]) top = c;
  }
  r.counts = sample_under_noise(model, inst, noise, cfg.nsamples,
                                master.fork(kEstimationPhase), cfg.workers);
  r.elapsed_samples = cfg.n0 + cfg.nsamples;
  r.pa_lower = clopper_pearson_lower(r.counts[top], cfg.nsamples, cfg.alpha);
  r.pb_upper = 1.0 - r.pa_lower;
  if (r.pa_lower <= 0.5) {
    r.certified = false;
    return r;  // ABSTAIN
  }
  r.certified = true;
  r.label = top;
  double pa = r.pa_lower, pb = r.pb_upper;
  switch (cfg.mechanism) {
    case Mechanism::kSubstitution:
      r.radius = rad_substitution(pa, pb, cfg.epsilon_stair());
      break;
    case Mechanism::kReorder:
      r.radius = rad_reorder(pa, pb, cfg.lambda);
      break;
    case Mechanism::kInsertion:
      r.radius = rad_insertion(pa, pb, cfg.sigma);
      r.radius_reorder = rad_reorder(pa, pb, cfg.lambda);
      break;
    case Mechanism::kDeletion: {
      int alive = std::max(1, inst.alive_count());
      r.radius = static_cast<double>(rad_deletion(pa, pb, alive, cfg.p));
      r.radius_reorder = rad_reorder(pa, pb, cfg.lambda);
      break;
    }
  }
  return r;
}

std::vector<CurvePoint> certified_accuracy_curve(
    const std::vector<CertifyResult>& results, const std::vector<double>& grid) {
  if (results.empty()) {
    throw std::domain_error("certified_accuracy_curve: no results");
  }
  std::vector<CurvePoint> curve;
  curve.reserve(grid.size());
  for (double r : grid) {
    long long hits = 0;
    for (const auto& res : results) {
      if (res.certified && res.label == res.gold && res.radius >= r) ++hits;
    }
    curve.push_back({r, static_cast<double>(hits) /
                            static_cast<double>(results.size())});
  }
  return curve;
}

namespace {

std::string format_radius(double x) {
  if (std::isinf(x)) return "inf";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", x);
  return buf;
}

}  // namespace

void write_results_csv(std::ostream& out,
                       const std::vector<CertifyResult>& results) {
  out << "instance_id,gold,outcome,label,pA_lower,radius,radius_reorder,N,"
         "alpha,mechanism,seed\n";
  for (const auto& r : results) {
    out << r.instance_id << ',' << (r.gold + 1) << ','
        << (r.certified ? "certified" : "abstain") << ','
        << (r.certified ? std::to_string(r.label + 1) : std::string("-")) << ','
        << format_radius(r.pa_lower) << ',' << format_radius(r.radius) << ','
        << format_radius(r.radius_reorder) << ',' << r.n << ','
        << format_radius(r.alpha) << ',' << mechanism_name(r.mechanism) << ','
        << r.seed << "\n";
  }
}

std::vector<CertifyResult> read_results_csv(std::istream& in) {
  std::vector<CertifyResult> results;
  std::string line;
  if (!std::getline(in, line)) return results;  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::istringstream ls(line);
    std::string col;
    while (std::getline(ls, col, ',')) cols.push_back(col);
    if (cols.size() != 11) {
      throw std::runtime_error("results csv: expected 11 columns");
    }
    CertifyResult r;
    r.instance_id = std::stoll(cols[0]);
    r.gold = std::stoi(cols[1]) - 1;
    r.certified = cols[2] == "certified";
    r.label = cols[3] == "-" ? -1 : std::stoi(cols[3]) - 1;
    r.pa_lower = std::stod(cols[4]);
    r.pb_upper = 1.0 - r.pa_lower;
    r.radius = cols[5] == "inf" ? kInfiniteRadius : std::stod(cols[5]);
    r.radius_reorder = cols[6] == "inf" ? kInfiniteRadius : std::stod(cols[6]);
    r.n = std::stoll(cols[7]);
    r.alpha = std::stod(cols[8]);
    r.mechanism = mechanism_from_name(cols[9]);
    r.seed = std::stoull(cols[10]);
    results.push_back(std::move(r));
  }
  return results;
}

void write_curve_csv(std::ostream& out, const std::vector<CurvePoint>& curve) {
  out << "radius,certified_accuracy\n";
  for (const auto& pt : curve) {
    out << format_radius(pt.radius) << ',' << format_radius(pt.certified_accuracy)
        << "\n";
  }
}

}  // namespace textcrs
