// Command-line surface for the certified-robustness engine: corpus
// generation, synonym-table construction, smoothed training, Monte-Carlo
// certification, attack validation, and report aggregation.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "textcrs/attacks.hpp"
#include "textcrs/bounds.hpp"
#include "textcrs/certify.hpp"
#include "textcrs/classifier.hpp"
#include "textcrs/corpus.hpp"
#include "textcrs/embedding.hpp"
#include "textcrs/noise.hpp"

using namespace textcrs;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitSoundness = 3;

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

SmoothingConfig load_config(const std::string& path, const std::string& preset) {
  SmoothingConfig cfg = SmoothingConfig::from_json(slurp(path));
  if (!preset.empty()) apply_noise_preset(cfg, preset);
  return cfg;
}

struct LoadedWorld {
  EmbeddingTable table;
  SynonymTable synonyms;
  bool have_synonyms = false;
};

LoadedWorld load_world(const SmoothingConfig& cfg, const std::string& emb_path,
                       const std::string& syn_path) {
  LoadedWorld world;
  world.table = load_embedding_file(emb_path, cfg.d);
  if (!syn_path.empty()) {
    std::ifstream in(syn_path);
    if (!in) throw std::runtime_error("cannot open " + syn_path);
    world.synonyms = load_synonym_table(in, world.table);
    world.have_synonyms = true;
  }
  return world;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Certified robustness engine for word-level text attacks"};
  app.require_subcommand(1);

  // ---- gen-corpus ----
  auto* gen = app.add_subcommand("gen-corpus", "Generate a synthetic corpus");
  CorpusSpec corpus;
  std::string gen_out;
  gen->add_option("--seed", corpus.seed);
  gen->add_option("--size", corpus.train_size);
  gen->add_option("--test-size", corpus.test_size);
  gen->add_option("--vocab", corpus.vocab);
  gen->add_option("--length", corpus.length);
  gen->add_option("--dim", corpus.dim);
  gen->add_option("--out", gen_out)->required();

  // ---- build-synonyms ----
  auto* syn_cmd = app.add_subcommand("build-synonyms", "Build the synonym table");
  std::string syn_emb, syn_out;
  int syn_s = 0, syn_dim = 0;
  syn_cmd->add_option("--embeddings", syn_emb)->required();
  syn_cmd->add_option("--s", syn_s)->required();
  syn_cmd->add_option("--dim", syn_dim)->required();
  syn_cmd->add_option("--out", syn_out)->required();

  // ---- train ----
  auto* train_cmd = app.add_subcommand("train", "Train under smoothing noise");
  std::string tr_config, tr_data, tr_emb, tr_syn, tr_out, tr_noise;
  TrainOptions tr_opts;
  train_cmd->add_option("--config", tr_config)->required();
  train_cmd->add_option("--data", tr_data)->required();
  train_cmd->add_option("--embeddings", tr_emb)->required();
  train_cmd->add_option("--synonyms", tr_syn);
  train_cmd->add_option("--out", tr_out)->required();
  train_cmd->add_option("--noise", tr_noise, "Low/Med/High preset override");
  train_cmd->add_option("--epochs", tr_opts.epochs);
  train_cmd->add_option("--lr", tr_opts.lr);
  train_cmd->add_option("--batch", tr_opts.batch);
  train_cmd->add_option("--hidden", tr_opts.hidden);

  // ---- certify ----
  auto* cert_cmd = app.add_subcommand("certify", "Certify test instances");
  std::string ce_model, ce_data, ce_config, ce_emb, ce_syn, ce_out, ce_noise;
  long long ce_n0 = -1, ce_n = -1;
  double ce_alpha = -1.0;
  long long ce_seed = -1;
  int ce_workers = -1;
  long long ce_max = -1;
  cert_cmd->add_option("--model", ce_model)->required();
  cert_cmd->add_option("--data", ce_data)->required();
  cert_cmd->add_option("--config", ce_config)->required();
  cert_cmd->add_option("--embeddings", ce_emb)->required();
  cert_cmd->add_option("--synonyms", ce_syn);
  cert_cmd->add_option("--out", ce_out)->required();
  cert_cmd->add_option("--noise", ce_noise, "Low/Med/High preset override");
  cert_cmd->add_option("--n0", ce_n0);
  cert_cmd->add_option("--n", ce_n);
  cert_cmd->add_option("--alpha", ce_alpha);
  cert_cmd->add_option("--seed", ce_seed);
  cert_cmd->add_option("--workers", ce_workers);
  cert_cmd->add_option("--max-instances", ce_max);

  // ---- attack ----
  auto* atk_cmd = app.add_subcommand("attack", "Run the soundness harness");
  std::string at_model, at_results, at_data, at_config, at_emb, at_syn, at_out,
      at_noise;
  std::string at_suite = "all";
  long long at_trials = 10000;
  int at_workers = 1;
  long long at_seed = 1;
  atk_cmd->add_option("--model", at_model)->required();
  atk_cmd->add_option("--results", at_results)->required();
  atk_cmd->add_option("--data", at_data)->required();
  atk_cmd->add_option("--config", at_config)->required();
  atk_cmd->add_option("--embeddings", at_emb)->required();
  atk_cmd->add_option("--synonyms", at_syn);
  atk_cmd->add_option("--suite", at_suite, "all | within-radius | unrestricted");
  atk_cmd->add_option("--trials", at_trials);
  atk_cmd->add_option("--seed", at_seed);
  atk_cmd->add_option("--workers", at_workers);
  atk_cmd->add_option("--out", at_out)->required();
  atk_cmd->add_option("--noise", at_noise);

  // ---- report ----
  auto* rep_cmd = app.add_subcommand("report", "Certified-accuracy curve");
  std::string re_results, re_out, re_grid = "auto";
  rep_cmd->add_option("--results", re_results)->required();
  rep_cmd->add_option("--grid", re_grid, "comma-separated radii or 'auto'");
  rep_cmd->add_option("--out", re_out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (gen->parsed()) {
      generate_corpus(corpus, gen_out);
      std::cout << "corpus written to " << gen_out << "\n";
      return kExitOk;
    }

    if (syn_cmd->parsed()) {
      EmbeddingTable table = load_embedding_file(syn_emb, syn_dim);
      SynonymTable syn = build_synonym_table(table, syn_s);
      std::ofstream out(syn_out);
      if (!out) throw std::runtime_error("cannot write " + syn_out);
      save_synonym_table(syn, out);
      std::cout << "synonym table: " << syn.entries.size() << " words, s="
                << syn_s << "\n";
      return kExitOk;
    }

    if (train_cmd->parsed()) {
      SmoothingConfig cfg = load_config(tr_config, tr_noise);
      LoadedWorld world = load_world(cfg, tr_emb, tr_syn);
      if (cfg.mechanism == Mechanism::kSubstitution && cfg.s > 0 &&
          !world.have_synonyms) {
        throw std::runtime_error("substitution training needs --synonyms");
      }
      NoiseModel noise = NoiseModel::prepare(
          cfg, world.have_synonyms ? &world.synonyms : nullptr, &world.table);
      Dataset data = load_dataset_file(tr_data, world.table, cfg.n);
      tr_opts.seed = cfg.seed;
      TrainResult result = train_smoothed(data, noise, tr_opts);
      result.model.save_file(tr_out);
      std::ofstream log(tr_out + ".train.csv");
      log << "epoch,loss\n";
      for (size_t e = 0; e < result.epoch_loss.size(); ++e) {
        log << e << ',' << result.epoch_loss[e] << "\n";
      }
      std::cout << "model written to " << tr_out << " ("
                << result.epoch_loss.size() << " epochs)\n";
      return kExitOk;
    }

    if (cert_cmd->parsed()) {
      SmoothingConfig cfg = load_config(ce_config, ce_noise);
      if (ce_n0 > 0) cfg.n0 = ce_n0;
      if (ce_n > 0) cfg.nsamples = ce_n;
      if (ce_alpha > 0) cfg.alpha = ce_alpha;
      if (ce_seed >= 0) cfg.seed = static_cast<uint64_t>(ce_seed);
      if (ce_workers > 0) cfg.workers = ce_workers;
      LoadedWorld world = load_world(cfg, ce_emb, ce_syn);
      if (cfg.mechanism == Mechanism::kSubstitution && cfg.s > 0 &&
          !world.have_synonyms) {
        throw std::runtime_error("substitution certification needs --synonyms");
      }
      PositionGatedClassifier model = PositionGatedClassifier::load_file(ce_model);
      if (model.n != cfg.n || model.d != cfg.d) {
        throw std::runtime_error("model dimensions do not match config");
      }
      NoiseModel noise = NoiseModel::prepare(
          cfg, world.have_synonyms ? &world.synonyms : nullptr, &world.table);
      Dataset data = load_dataset_file(ce_data, world.table, cfg.n);
      long long count = static_cast<long long>(data.items.size());
      if (ce_max > 0) count = std::min(count, ce_max);
      std::vector<CertifyResult> results;
      results.reserve(count);
      for (long long i = 0; i < count; ++i) {
        results.push_back(certify(model, data.items[i], noise, i));
      }
      std::ofstream out(ce_out);
      if (!out) throw std::runtime_error("cannot write " + ce_out);
      write_results_csv(out, results);
      long long certified = 0;
      for (const auto& r : results) certified += r.certified ? 1 : 0;
      std::cout << "certified " << certified << "/" << count << " instances -> "
                << ce_out << "\n";
      return kExitOk;
    }

    if (atk_cmd->parsed()) {
      SmoothingConfig cfg = load_config(at_config, at_noise);
      if (at_workers > 0) cfg.workers = at_workers;
      LoadedWorld world = load_world(cfg, at_emb, at_syn);
      PositionGatedClassifier model = PositionGatedClassifier::load_file(at_model);
      NoiseModel noise = NoiseModel::prepare(
          cfg, world.have_synonyms ? &world.synonyms : nullptr, &world.table);
      Dataset data = load_dataset_file(at_data, world.table, cfg.n);
      std::ifstream rin(at_results);
      if (!rin) throw std::runtime_error("cannot open " + at_results);
      std::vector<CertifyResult> results = read_results_csv(rin);
      std::vector<EncodedInstance> instances;
      for (const auto& r : results) {
        if (r.instance_id < 0 ||
            r.instance_id >= static_cast<long long>(data.items.size())) {
          throw std::runtime_error("results reference unknown instance ids");
        }
        instances.push_back(data.items[r.instance_id]);
      }

      std::vector<AttackRecord> rows;
      bool violated = false;
      if (at_suite == "all" || at_suite == "within-radius") {
        HarnessOptions opts;
        opts.trials = at_trials;
        opts.seed = static_cast<uint64_t>(at_seed);
        opts.workers = cfg.workers;
        HarnessReport report =
            soundness_harness(model, noise, instances, results, opts);
        for (const auto& v : report.violations) {
          std::cerr << "SOUNDNESS VIOLATION: instance " << v.instance_id << " "
                    << v.detail << "\n";
          rows.push_back({v.instance_id, "within-" + v.attack, true, v.norm,
                          0.0, at_trials});
          violated = true;
        }
        std::cout << "within-radius: " << report.certified_instances
                  << " certified instances, " << report.candidates_tried
                  << " candidates, " << report.violations.size()
                  << " violations\n";
      }
      if (at_suite == "all" || at_suite == "unrestricted") {
        if (!world.have_synonyms) {
          throw std::runtime_error("unrestricted suite needs --synonyms");
        }
        auto stats = unrestricted_attack_accuracy(
            model, instances, world.synonyms, std::min<long long>(at_trials, 200),
            static_cast<uint64_t>(at_seed));
        for (const auto& [name, st] : stats) {
          std::cout << "unrestricted " << name << ": " << st.successes << "/"
                    << st.attempts << " flips\n";
          rows.push_back({-1, "unrestricted-" + name, st.successes > 0,
                          st.success_rate(), -1.0, st.attempts});
        }
      }
      std::ofstream out(at_out);
      if (!out) throw std::runtime_error("cannot write " + at_out);
      write_attack_csv(out, rows);
      return violated ? kExitSoundness : kExitOk;
    }

    if (rep_cmd->parsed()) {
      std::ifstream rin(re_results);
      if (!rin) throw std::runtime_error("cannot open " + re_results);
      std::vector<CertifyResult> results = read_results_csv(rin);
      std::ofstream out(re_out);
      if (!out) throw std::runtime_error("cannot write " + re_out);
      if (results.empty()) {
        out << "radius,certified_accuracy\n";  // header-only
        std::cout << "no results; wrote header-only curve\n";
        return kExitOk;
      }
      std::vector<double> grid;
      if (re_grid == "auto") {
        double max_radius = 0.0;
        for (const auto& r : results) {
          if (r.certified && std::isfinite(r.radius)) {
            max_radius = std::max(max_radius, r.radius);
          }
        }
        for (int i = 0; i <= 40; ++i) grid.push_back(max_radius * i / 40.0);
      } else {
        std::istringstream gs(re_grid);
        std::string tok;
        while (std::getline(gs, tok, ',')) grid.push_back(std::stod(tok));
      }
      auto curve = certified_accuracy_curve(results, grid);
      write_curve_csv(out, curve);
      std::cout << "curve with " << curve.size() << " points -> " << re_out
                << "\n";
      return kExitOk;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
