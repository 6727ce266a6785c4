#include "textcrs/noise.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

namespace textcrs {

namespace {
// Substream salts keeping theta and per-row phi draws on disjoint streams.
constexpr uint64_t kThetaSalt = 0x74686574ULL;
constexpr uint64_t kPhiSalt = 0x70686900ULL;
}  // namespace

std::string mechanism_name(Mechanism m) {
  switch (m) {
    case Mechanism::kSubstitution: return "substitution";
    case Mechanism::kReorder: return "reorder";
    case Mechanism::kInsertion: return "insertion";
    case Mechanism::kDeletion: return "deletion";
  }
  return "unknown";
}

Mechanism mechanism_from_name(const std::string& name) {
  if (name == "substitution") return Mechanism::kSubstitution;
  if (name == "reorder") return Mechanism::kReorder;
  if (name == "insertion") return Mechanism::kInsertion;
  if (name == "deletion") return Mechanism::kDeletion;
  throw std::domain_error("unknown mechanism: " + name);
}

int SmoothingConfig::group_size() const {
  if (mechanism == Mechanism::kReorder) return std::min(2 * lambda, n);
  return n;  // insertion/deletion smooth with the full shuffle
}

void SmoothingConfig::validate() const {
  if (n < 1) throw std::domain_error("config: n < 1");
  if (d < 1) throw std::domain_error("config: d < 1");
  if (!(alpha > 0.0 && alpha < 1.0)) throw std::domain_error("config: alpha");
  if (n0 < 1 || nsamples < 1) throw std::domain_error("config: sample counts");
  if (workers < 1) throw std::domain_error("config: workers < 1");
  switch (mechanism) {
    case Mechanism::kSubstitution:
      if (s < 0) throw std::domain_error("config: s < 0");
      if (!(gamma >= 0.0 && gamma <= 1.0)) throw std::domain_error("config: gamma");
      if (!(delta_width > 0.0)) throw std::domain_error("config: delta");
      break;
    case Mechanism::kReorder:
      if (lambda < 1 || lambda > n) throw std::domain_error("config: lambda");
      break;
    case Mechanism::kInsertion:
      if (sigma < 0.0) throw std::domain_error("config: sigma < 0");
      if (2 * lambda != n) {
        throw std::domain_error("config: insertion needs 2*lambda = n");
      }
      break;
    case Mechanism::kDeletion:
      if (!(p >= 0.0 && p <= 1.0)) throw std::domain_error("config: p");
      if (2 * lambda != n) {
        throw std::domain_error("config: deletion needs 2*lambda = n");
      }
      break;
  }
}

std::string SmoothingConfig::to_json() const {
  nlohmann::json j;
  j["mechanism"] = mechanism_name(mechanism);
  switch (mechanism) {
    case Mechanism::kSubstitution:
      j["s"] = s;
      j["gamma"] = gamma;
      j["delta"] = delta_width;
      break;
    case Mechanism::kReorder:
      j["lambda"] = lambda;
      break;
    case Mechanism::kInsertion:
      j["sigma"] = sigma;
      j["ogn"] = ogn;
      j["lambda"] = lambda;
      break;
    case Mechanism::kDeletion:
      j["p"] = p;
      j["lambda"] = lambda;
      break;
  }
  j["n"] = n;
  j["d"] = d;
  j["n0"] = n0;
  j["nsamples"] = nsamples;
  j["alpha"] = alpha;
  j["seed"] = seed;
  j["workers"] = workers;
  return j.dump(2);
}

SmoothingConfig SmoothingConfig::from_json(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  SmoothingConfig c;
  c.mechanism = mechanism_from_name(j.at("mechanism").get<std::string>());
  c.n = j.at("n").get<int>();
  c.d = j.at("d").get<int>();
  if (j.count("s")) c.s = j["s"].get<int>();
  if (j.count("gamma")) c.gamma = j["gamma"].get<double>();
  if (j.count("delta")) c.delta_width = j["delta"].get<double>();
  if (j.count("lambda")) c.lambda = j["lambda"].get<int>();
  if (j.count("sigma")) c.sigma = j["sigma"].get<double>();
  if (j.count("ogn")) c.ogn = j["ogn"].get<bool>();
  if (j.count("p")) c.p = j["p"].get<double>();
  if (j.count("n0")) c.n0 = j["n0"].get<long long>();
  if (j.count("nsamples")) c.nsamples = j["nsamples"].get<long long>();
  if (j.count("alpha")) c.alpha = j["alpha"].get<double>();
  if (j.count("seed")) c.seed = j["seed"].get<uint64_t>();
  if (j.count("workers")) c.workers = j["workers"].get<int>();
  if (c.mechanism == Mechanism::kInsertion ||
      c.mechanism == Mechanism::kDeletion) {
    if (!j.count("lambda")) c.lambda = c.n / 2;
  }
  if (j.count("noise")) apply_noise_preset(c, j["noise"].get<std::string>());
  return c;
}

void apply_noise_preset(SmoothingConfig& config, const std::string& level) {
  int idx;
  if (level == "Low") idx = 0;
  else if (level == "Med") idx = 1;
  else if (level == "High") idx = 2;
  else throw std::domain_error("unknown noise level: " + level);

  switch (config.mechanism) {
    case Mechanism::kSubstitution: {
      static const int kS[] = {50, 100, 250};
      config.s = kS[idx];
      break;
    }
    case Mechanism::kReorder: {
      // Group sizes n/4, n/2, n; lambda is half the group size.
      static const int kDiv[] = {8, 4, 2};
      config.lambda = std::max(1, config.n / kDiv[idx]);
      break;
    }
    case Mechanism::kInsertion: {
      static const double kSigma[] = {0.1, 0.2, 0.3};
      config.sigma = kSigma[idx];
      config.lambda = config.n / 2;
      break;
    }
    case Mechanism::kDeletion: {
      static const double kP[] = {0.3, 0.5, 0.7};
      config.p = kP[idx];
      config.lambda = config.n / 2;
      break;
    }
  }
}

std::vector<double> staircase_pmf(int s, double epsilon, double gamma,
                                  double delta_width) {
  if (s < 0) throw std::domain_error("staircase_pmf: s < 0");
  if (!(epsilon > 0.0)) throw std::domain_error("staircase_pmf: epsilon <= 0");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw std::domain_error("staircase_pmf: gamma");
  if (!(delta_width > 0.0)) throw std::domain_error("staircase_pmf: delta <= 0");
  // The interval pair at distance k holds a width-gamma step of density
  // exp(-k eps) and a width-(1-gamma) step of density exp(-(k+1) eps); the
  // interval width scales every pair alike and drops out in normalization.
  std::vector<double> pmf(s + 1);
  double total = 0.0;
  for (int k = 0; k <= s; ++k) {
    pmf[k] = gamma * std::exp(-k * epsilon) +
             (1.0 - gamma) * std::exp(-(k + 1) * epsilon);
    total += pmf[k];
  }
  for (double& x : pmf) x /= total;
  return pmf;
}

std::vector<double> staircase_pmf_centered(int s, double epsilon, int center) {
  if (s < 0) throw std::domain_error("staircase_pmf_centered: s < 0");
  if (!(epsilon > 0.0)) {
    throw std::domain_error("staircase_pmf_centered: epsilon <= 0");
  }
  if (center < 0 || center > s) {
    throw std::domain_error("staircase_pmf_centered: center outside [0, s]");
  }
  // Signed window of 2s+2 unit intervals m = -(s+1)..s; interval m holds
  // synonym index (m >= 0 ? m : -m-1) and sits |rank| intervals away from the
  // center point. Mirror symmetry makes centers +a and -a equivalent.
  std::vector<double> pmf(s + 1, 0.0);
  double total = 0.0;
  for (int m = -(s + 1); m <= s; ++m) {
    int idx = m >= 0 ? m : -(m + 1);
    int dist = m >= center ? m - center : center - 1 - m;
    double mass = std::exp(-dist * epsilon);
    pmf[idx] += mass;
    total += mass;
  }
  for (double& x : pmf) x /= total;
  return pmf;
}

namespace {

std::vector<double> to_cdf(const std::vector<double>& pmf) {
  std::vector<double> cdf(pmf.size());
  double acc = 0.0;
  for (size_t k = 0; k < pmf.size(); ++k) {
    acc += pmf[k];
    cdf[k] = acc;
  }
  cdf.back() = 1.0;
  return cdf;
}

int draw_index(const std::vector<double>& cdf, RngStream& rng) {
  double u = rng.next_unit();
  auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
  if (it == cdf.end()) --it;
  return static_cast<int>(it - cdf.begin());
}

void substitution_impl(EncodedInstance& inst, const SynonymTable& syn,
                       const SynonymLookup& lookup,
                       const std::vector<double>& shared_cdf,
                       const std::vector<std::vector<double>>& row_cdfs,
                       RngStream& rng) {
  const EmbeddingTable& table = *syn.source;
  for (int i = 0; i < inst.n; ++i) {
    int token = inst.token_ids[i];
    if (token == inst.pad_token || token < 0) continue;  // pads never substituted
    RngStream row_rng = rng.fork(kPhiSalt + static_cast<uint64_t>(i));
    const auto& cdf = row_cdfs.empty() ? shared_cdf : row_cdfs[i];
    int k = draw_index(cdf, row_rng);
    if (k == 0) continue;
    auto it = lookup.candidates.find(token);
    if (it == lookup.candidates.end() || it->second.empty()) continue;
    const auto& cands = it->second[k - 1];
    int id = cands[row_rng.next_below(cands.size())];
    inst.token_ids[i] = id;
    const auto& v = table.vec(id);
    std::copy(v.begin(), v.end(), inst.row(i));
  }
}

}  // namespace

SynonymLookup SynonymLookup::build(const SynonymTable& syn) {
  SynonymLookup lookup;
  int s = syn.radius_s;
  for (const auto& [word, entries] : syn.entries) {
    int token = syn.source->lookup(word);
    if (token < 0 || entries.empty()) continue;
    std::vector<std::vector<int>> per_k(s);
    for (int k = 1; k <= s; ++k) {
      // Nearest populated interval, ties toward the smaller index.
      int best = -1;
      for (const auto& e : entries) {
        if (best < 0 || std::abs(e.interval - k) < std::abs(best - k) ||
            (std::abs(e.interval - k) == std::abs(best - k) && e.interval < best)) {
          best = e.interval;
        }
      }
      for (const auto& e : entries) {
        if (e.interval == best) per_k[k - 1].push_back(e.id);
      }
    }
    lookup.candidates.emplace(token, std::move(per_k));
  }
  return lookup;
}

void apply_substitution_noise(EncodedInstance& inst, const SynonymTable& syn,
                              const std::vector<double>& pmf, RngStream& rng) {
  substitution_impl(inst, syn, SynonymLookup::build(syn), to_cdf(pmf), {}, rng);
}

void apply_substitution_noise_centered(EncodedInstance& inst,
                                       const SynonymTable& syn, int s,
                                       double epsilon,
                                       const std::vector<int>& centers,
                                       RngStream& rng) {
  if (s != syn.radius_s) {
    throw std::domain_error("apply_substitution_noise_centered: s mismatch");
  }
  std::vector<std::vector<double>> row_cdfs;
  row_cdfs.reserve(centers.size());
  for (int c : centers) {
    row_cdfs.push_back(to_cdf(staircase_pmf_centered(s, epsilon, c)));
  }
  substitution_impl(inst, syn, SynonymLookup::build(syn), {}, row_cdfs, rng);
}

std::vector<int> sample_group_permutation(int n, int group, RngStream& rng) {
  if (group < 1 || group > n) {
    throw std::domain_error("sample_group_permutation: group outside [1, n]");
  }
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  rng.shuffle(order);
  std::vector<int> r(n);
  for (int start = 0; start < n; start += group) {
    int len = std::min(group, n - start);
    std::vector<int> targets(order.begin() + start, order.begin() + start + len);
    rng.shuffle(targets);
    for (int j = 0; j < len; ++j) r[order[start + j]] = targets[j];
  }
  return r;
}

void apply_permutation(EncodedInstance& inst, const std::vector<int>& r) {
  if (static_cast<int>(r.size()) != inst.n) {
    throw std::domain_error("apply_permutation: size mismatch");
  }
  std::vector<bool> seen(inst.n, false);
  for (int x : r) {
    if (x < 0 || x >= inst.n || seen[x]) {
      throw std::domain_error("apply_permutation: r is not a bijection");
    }
    seen[x] = true;
  }
  for (int i = 0; i < inst.n; ++i) {
    inst.position_map[i] = r[inst.position_map[i]];
  }
}

void apply_gaussian_noise(EncodedInstance& inst, double sigma,
                          const std::vector<double>& mean, RngStream& rng) {
  if (sigma < 0.0) throw std::domain_error("apply_gaussian_noise: sigma < 0");
  if (!mean.empty() && static_cast<int>(mean.size()) != inst.d) {
    throw std::domain_error("apply_gaussian_noise: mean dimension mismatch");
  }
  for (int i = 0; i < inst.n; ++i) {
    RngStream row_rng = rng.fork(kPhiSalt + static_cast<uint64_t>(i));
    double* row = inst.row(i);
    for (int j = 0; j < inst.d; ++j) {
      double mu = mean.empty() ? 0.0 : mean[j];
      row[j] += mu + sigma * row_rng.next_gaussian();
    }
  }
}

void apply_bernoulli_deletion(EncodedInstance& inst, double p, RngStream& rng) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw std::domain_error("apply_bernoulli_deletion: p outside [0, 1]");
  }
  for (int i = 0; i < inst.n; ++i) {
    if (inst.token_ids[i] == inst.pad_token) continue;  // 0 -> 1 never happens
    RngStream row_rng = rng.fork(kPhiSalt + static_cast<uint64_t>(i));
    if (row_rng.next_unit() < p) {
      std::fill(inst.row(i), inst.row(i) + inst.d, 0.0);
      inst.token_ids[i] = inst.pad_token;
    }
  }
}

void insertion_transform(EncodedInstance& inst,
                         const std::vector<int>& positions,
                         const std::vector<std::vector<double>>& vectors) {
  int m = static_cast<int>(positions.size());
  if (m != static_cast<int>(vectors.size())) {
    throw std::domain_error("insertion_transform: positions/vectors mismatch");
  }
  if (m > inst.n) throw std::domain_error("insertion_transform: m' > n");
  if (m == 0) return;
  for (int i = 0; i < m; ++i) {
    if (positions[i] < 0 || positions[i] >= inst.n) {
      throw std::domain_error("insertion_transform: position out of range");
    }
    if (i > 0 && positions[i] <= positions[i - 1]) {
      throw std::domain_error("insertion_transform: positions must increase");
    }
    if (static_cast<int>(vectors[i].size()) != inst.d) {
      throw std::domain_error("insertion_transform: vector dimension mismatch");
    }
    // Marker i lands at merged index positions[i] + i; it must survive the
    // truncation back to n or the canonical form does not exist.
    if (positions[i] + i >= inst.n) {
      throw std::domain_error("insertion_transform: inserted word would be truncated");
    }
  }
  // Current rendered order of storage rows.
  std::vector<int> pos_to_row(inst.n);
  for (int i = 0; i < inst.n; ++i) pos_to_row[inst.position_map[i]] = i;
  // Merged sequence: -1 - i marks inserted item i.
  std::vector<int> merged;
  merged.reserve(inst.n + m);
  int next_insert = 0;
  for (int p = 0; p < inst.n; ++p) {
    while (next_insert < m && positions[next_insert] == p) {
      merged.push_back(-1 - next_insert);
      ++next_insert;
    }
    merged.push_back(pos_to_row[p]);
  }
  merged.resize(inst.n);  // drop the last m' rendered originals
  // Rows that fell off the end receive the inserted vectors, in order.
  std::vector<bool> survives(inst.n, false);
  for (int x : merged) {
    if (x >= 0) survives[x] = true;
  }
  std::vector<int> replaced;
  for (int p = 0; p < inst.n; ++p) {
    int row = pos_to_row[p];
    if (!survives[row]) replaced.push_back(row);
  }
  for (int i = 0; i < m; ++i) {
    int row = replaced[i];
    std::copy(vectors[i].begin(), vectors[i].end(), inst.row(row));
    inst.token_ids[row] = -1;  // inserted embeddings carry no vocabulary id
  }
  // Rebuild the position map from the merged order.
  for (int p = 0; p < inst.n; ++p) {
    int x = merged[p];
    int row = x >= 0 ? x : replaced[-1 - x];
    inst.position_map[row] = p;
  }
}

void deletion_transform(EncodedInstance& inst, const std::vector<int>& positions) {
  if (positions.empty()) return;
  std::vector<bool> chosen(inst.n, false);
  for (int p : positions) {
    if (p < 0 || p >= inst.n) {
      throw std::domain_error("deletion_transform: position out of range");
    }
    if (chosen[p]) throw std::domain_error("deletion_transform: duplicate position");
    chosen[p] = true;
  }
  std::vector<int> pos_to_row(inst.n);
  for (int i = 0; i < inst.n; ++i) pos_to_row[inst.position_map[i]] = i;
  std::vector<int> kept, deleted;
  for (int p = 0; p < inst.n; ++p) {
    int row = pos_to_row[p];
    if (chosen[p]) {
      std::fill(inst.row(row), inst.row(row) + inst.d, 0.0);
      inst.token_ids[row] = inst.pad_token;
      deleted.push_back(row);
    } else {
      kept.push_back(row);
    }
  }
  int p = 0;
  for (int row : kept) inst.position_map[row] = p++;
  for (int row : deleted) inst.position_map[row] = p++;
}

double perturbation_norm(const PerturbationSpec& spec) {
  switch (spec.kind) {
    case PerturbationSpec::Kind::kSubstitution: {
      long long total = 0;
      for (int a : spec.interval_indices) total += a;
      return static_cast<double>(total);
    }
    case PerturbationSpec::Kind::kReorder: {
      long long total = 0;
      for (size_t i = 0; i < spec.targets.size(); ++i) {
        total += std::llabs(spec.targets[i] - static_cast<long long>(i));
      }
      return static_cast<double>(total);
    }
    case PerturbationSpec::Kind::kInsertion: {
      double sq = 0.0;
      for (const auto& delta : spec.insert_deltas) {
        for (double x : delta) sq += x * x;
      }
      return std::sqrt(sq);
    }
    case PerturbationSpec::Kind::kDeletion:
      return static_cast<double>(spec.positions.size());
  }
  return 0.0;
}

NoiseModel NoiseModel::prepare(const SmoothingConfig& config,
                               const SynonymTable* synonyms,
                               const EmbeddingTable* table) {
  config.validate();
  NoiseModel model;
  model.config = config;
  model.synonyms = synonyms;
  switch (config.mechanism) {
    case Mechanism::kSubstitution:
      if (config.s > 0) {
        if (synonyms == nullptr) {
          throw std::domain_error("substitution smoothing needs a synonym table");
        }
        if (synonyms->radius_s != config.s) {
          throw std::domain_error("synonym table radius does not match config s");
        }
        model.stair_cdf = to_cdf(staircase_pmf(config.s, config.epsilon_stair(),
                                               config.gamma, config.delta_width));
        model.lookup = SynonymLookup::build(*synonyms);
      }
      break;
    case Mechanism::kInsertion:
      if (config.ogn) {
        if (table == nullptr) {
          throw std::domain_error("ogn noise needs the embedding table");
        }
        model.mean = compute_ogn_mean(*table);
      }
      break;
    default:
      break;
  }
  return model;
}

NoiseModel NoiseModel::prepare_centered(const SmoothingConfig& config,
                                        const SynonymTable* synonyms,
                                        const EmbeddingTable* table,
                                        const std::vector<int>& centers) {
  NoiseModel model = prepare(config, synonyms, table);
  if (config.mechanism != Mechanism::kSubstitution) return model;
  model.row_cdfs.reserve(centers.size());
  for (int c : centers) {
    model.row_cdfs.push_back(
        to_cdf(staircase_pmf_centered(config.s, config.epsilon_stair(), c)));
  }
  return model;
}

void NoiseModel::sample(EncodedInstance& inst, RngStream& rng) const {
  switch (config.mechanism) {
    case Mechanism::kSubstitution: {
      if (config.s > 0) {
        RngStream phi = rng.fork(kPhiSalt);
        substitution_impl(inst, *synonyms, lookup, stair_cdf, row_cdfs, phi);
      }
      break;
    }
    case Mechanism::kReorder: {
      RngStream theta = rng.fork(kThetaSalt);
      apply_permutation(inst,
                        sample_group_permutation(inst.n, config.group_size(), theta));
      break;
    }
    case Mechanism::kInsertion: {
      RngStream theta = rng.fork(kThetaSalt);
      apply_permutation(inst, sample_group_permutation(inst.n, inst.n, theta));
      RngStream phi = rng.fork(kPhiSalt);
      apply_gaussian_noise(inst, config.sigma, mean, phi);
      break;
    }
    case Mechanism::kDeletion: {
      RngStream theta = rng.fork(kThetaSalt);
      apply_permutation(inst, sample_group_permutation(inst.n, inst.n, theta));
      RngStream phi = rng.fork(kPhiSalt);
      apply_bernoulli_deletion(inst, config.p, phi);
      break;
    }
  }
}

}  // namespace textcrs
