// Command-line front end: train / probe / verify / diagnose / gen-data,
// driven by a JSON config. Exit codes: 0 ok, 1 config error, 2 data error,
// 3 numeric failure, 4 property-suite failure.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "simo/dataset.hpp"
#include "simo/diagnostics.hpp"
#include "simo/errors.hpp"
#include "simo/log.hpp"
#include "simo/model.hpp"
#include "simo/rng.hpp"
#include "simo/semimetric.hpp"
#include "simo/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitData = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitProperty = 4;

void require_keys(const json& j, const std::string& ctx,
                  std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw simo::ConfigError("config: " + ctx + " must be an object");
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* key : allowed) {
      if (item.key() == key) {
        known = true;
        break;
      }
    }
    if (!known) {
      throw simo::ConfigError("config: unknown key \"" + item.key() + "\" in " + ctx);
    }
  }
}

struct RunConfig {
  std::uint64_t seed = 42;
  std::string output_dir = "out";

  bool synthetic = true;
  simo::SyntheticSpec synth;
  std::vector<std::string> cifar_paths;
  bool cifar_downscale = false;

  std::size_t batch_size = 96;
  std::size_t k = 32;

  simo::SimoConfig loss;
  simo::Architecture arch;  // input_dim resolved from the dataset

  std::size_t iterations = 2000;
  double learning_rate = 1e-3;
  simo::OptimizerKind optimizer = simo::OptimizerKind::adam;
  std::size_t log_period = 10;

  simo::ProbeTrainConfig probe;
  double probe_test_fraction = 0.25;

  simo::DiagnosticsOptions diagnostics;
};

RunConfig parse_config(const json& j) {
  require_keys(j, "top level",
               {"seed", "output_dir", "dataset", "batch", "loss", "model", "train", "probe",
                "diagnostics"});
  RunConfig cfg;
  cfg.arch.embedding_dim = 16;
  if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("output_dir")) cfg.output_dir = j.at("output_dir").get<std::string>();

  if (!j.contains("dataset")) throw simo::ConfigError("config: missing \"dataset\" section");
  const json& ds = j.at("dataset");
  require_keys(ds, "dataset", {"synthetic", "cifar10"});
  if (ds.contains("synthetic") == ds.contains("cifar10")) {
    throw simo::ConfigError("config: dataset must hold exactly one of synthetic/cifar10");
  }
  if (ds.contains("synthetic")) {
    const json& s = ds.at("synthetic");
    require_keys(s, "dataset.synthetic",
                 {"num_classes", "samples_per_class", "feature_dim", "cluster_spread", "seed"});
    cfg.synthetic = true;
    if (s.contains("num_classes")) cfg.synth.num_classes = s.at("num_classes").get<std::size_t>();
    if (s.contains("samples_per_class")) {
      cfg.synth.samples_per_class = s.at("samples_per_class").get<std::size_t>();
    }
    if (s.contains("feature_dim")) cfg.synth.feature_dim = s.at("feature_dim").get<std::size_t>();
    if (s.contains("cluster_spread")) {
      cfg.synth.cluster_spread = s.at("cluster_spread").get<double>();
    }
    if (s.contains("seed")) cfg.synth.seed = s.at("seed").get<std::uint64_t>();
  } else {
    const json& c = ds.at("cifar10");
    require_keys(c, "dataset.cifar10", {"paths", "downscale"});
    cfg.synthetic = false;
    if (!c.contains("paths") || !c.at("paths").is_array() || c.at("paths").empty()) {
      throw simo::ConfigError("config: dataset.cifar10.paths must be a non-empty array");
    }
    for (const json& p : c.at("paths")) cfg.cifar_paths.push_back(p.get<std::string>());
    if (c.contains("downscale")) cfg.cifar_downscale = c.at("downscale").get<bool>();
  }

  if (j.contains("batch")) {
    const json& b = j.at("batch");
    require_keys(b, "batch", {"batch_size", "k"});
    if (b.contains("batch_size")) cfg.batch_size = b.at("batch_size").get<std::size_t>();
    if (b.contains("k")) cfg.k = b.at("k").get<std::size_t>();
  }

  if (j.contains("loss")) {
    const json& l = j.at("loss");
    require_keys(l, "loss", {"epsilon", "olean", "orthogonality_weight", "divisor"});
    if (l.contains("epsilon")) cfg.loss.epsilon = l.at("epsilon").get<double>();
    if (l.contains("olean")) cfg.loss.olean = l.at("olean").get<double>();
    if (l.contains("orthogonality_weight")) {
      cfg.loss.orthogonality_weight = l.at("orthogonality_weight").get<double>();
    }
    if (l.contains("divisor")) {
      const std::string d = l.at("divisor").get<std::string>();
      if (d == "pair_count") {
        cfg.loss.divisor = simo::LossDivisor::pair_count;
      } else if (d == "group_size") {
        cfg.loss.divisor = simo::LossDivisor::group_size;
      } else {
        throw simo::ConfigError("config: loss.divisor must be pair_count or group_size");
      }
    }
    cfg.loss.validate();
  }

  if (j.contains("model")) {
    const json& m = j.at("model");
    require_keys(m, "model", {"embedding_dim", "hidden"});
    if (m.contains("embedding_dim")) {
      cfg.arch.embedding_dim = m.at("embedding_dim").get<std::size_t>();
    }
    if (m.contains("hidden")) {
      cfg.arch.hidden.clear();
      for (const json& h : m.at("hidden")) cfg.arch.hidden.push_back(h.get<std::size_t>());
    }
  }

  if (j.contains("train")) {
    const json& t = j.at("train");
    require_keys(t, "train", {"iterations", "learning_rate", "optimizer", "log_period"});
    if (t.contains("iterations")) cfg.iterations = t.at("iterations").get<std::size_t>();
    if (t.contains("learning_rate")) cfg.learning_rate = t.at("learning_rate").get<double>();
    if (t.contains("optimizer")) {
      const std::string o = t.at("optimizer").get<std::string>();
      if (o == "adam") {
        cfg.optimizer = simo::OptimizerKind::adam;
      } else if (o == "sgd") {
        cfg.optimizer = simo::OptimizerKind::sgd;
      } else {
        throw simo::ConfigError("config: train.optimizer must be adam or sgd");
      }
    }
    if (t.contains("log_period")) cfg.log_period = t.at("log_period").get<std::size_t>();
  }
  cfg.probe.optimizer = cfg.optimizer;  // the probe trains with the run's optimizer

  if (j.contains("probe")) {
    const json& p = j.at("probe");
    require_keys(p, "probe",
                 {"hidden", "epochs", "learning_rate", "batch_size", "test_fraction", "seed"});
    if (p.contains("hidden")) cfg.probe.hidden = p.at("hidden").get<std::size_t>();
    if (p.contains("epochs")) cfg.probe.epochs = p.at("epochs").get<std::size_t>();
    if (p.contains("learning_rate")) cfg.probe.learning_rate = p.at("learning_rate").get<double>();
    if (p.contains("batch_size")) cfg.probe.batch_size = p.at("batch_size").get<std::size_t>();
    if (p.contains("test_fraction")) {
      cfg.probe_test_fraction = p.at("test_fraction").get<double>();
    }
    if (p.contains("seed")) cfg.probe.seed = p.at("seed").get<std::uint64_t>();
  }

  if (j.contains("diagnostics")) {
    const json& d = j.at("diagnostics");
    require_keys(d, "diagnostics", {"pairwise_sample", "semimetric_trials", "kernel", "seed"});
    if (d.contains("pairwise_sample")) {
      cfg.diagnostics.pairwise_sample = d.at("pairwise_sample").get<std::size_t>();
    }
    if (d.contains("semimetric_trials")) {
      cfg.diagnostics.semimetric_trials = d.at("semimetric_trials").get<std::size_t>();
    }
    if (d.contains("kernel")) {
      const std::string kern = d.at("kernel").get<std::string>();
      if (kern == "d_prime") {
        cfg.diagnostics.kernel = simo::SimilarityKernel::d_prime;
      } else if (kern == "d_double_prime") {
        cfg.diagnostics.kernel = simo::SimilarityKernel::d_double_prime;
      } else {
        throw simo::ConfigError("config: diagnostics.kernel must be d_prime or d_double_prime");
      }
    }
    if (d.contains("seed")) cfg.diagnostics.seed = d.at("seed").get<std::uint64_t>();
  }
  return cfg;
}

json resolved_json(const RunConfig& cfg) {
  json j;
  j["seed"] = cfg.seed;
  j["output_dir"] = cfg.output_dir;
  if (cfg.synthetic) {
    j["dataset"]["synthetic"] = {{"num_classes", cfg.synth.num_classes},
                                 {"samples_per_class", cfg.synth.samples_per_class},
                                 {"feature_dim", cfg.synth.feature_dim},
                                 {"cluster_spread", cfg.synth.cluster_spread},
                                 {"seed", cfg.synth.seed}};
  } else {
    j["dataset"]["cifar10"] = {{"paths", cfg.cifar_paths}, {"downscale", cfg.cifar_downscale}};
  }
  j["batch"] = {{"batch_size", cfg.batch_size}, {"k", cfg.k}};
  j["loss"] = {{"epsilon", cfg.loss.epsilon},
               {"olean", cfg.loss.olean},
               {"orthogonality_weight", cfg.loss.orthogonality_weight},
               {"divisor",
                cfg.loss.divisor == simo::LossDivisor::pair_count ? "pair_count" : "group_size"}};
  j["model"] = {{"embedding_dim", cfg.arch.embedding_dim}, {"hidden", cfg.arch.hidden}};
  j["train"] = {{"iterations", cfg.iterations},
                {"learning_rate", cfg.learning_rate},
                {"optimizer", cfg.optimizer == simo::OptimizerKind::adam ? "adam" : "sgd"},
                {"log_period", cfg.log_period}};
  j["probe"] = {{"hidden", cfg.probe.hidden},
                {"epochs", cfg.probe.epochs},
                {"learning_rate", cfg.probe.learning_rate},
                {"batch_size", cfg.probe.batch_size},
                {"test_fraction", cfg.probe_test_fraction},
                {"seed", cfg.probe.seed}};
  j["diagnostics"] = {
      {"pairwise_sample", cfg.diagnostics.pairwise_sample},
      {"semimetric_trials", cfg.diagnostics.semimetric_trials},
      {"kernel",
       cfg.diagnostics.kernel == simo::SimilarityKernel::d_prime ? "d_prime" : "d_double_prime"},
      {"seed", cfg.diagnostics.seed}};
  return j;
}

RunConfig load_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw simo::ConfigError("config: cannot open " + path);
  json j;
  try {
    is >> j;
  } catch (const json::exception& err) {
    throw simo::ConfigError(std::string("config: parse error: ") + err.what());
  }
  return parse_config(j);
}

simo::Dataset load_dataset(const RunConfig& cfg) {
  if (cfg.synthetic) return simo::generate_synthetic(cfg.synth);
  return simo::read_cifar10(cfg.cifar_paths, cfg.cifar_downscale);
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw simo::DataError("cannot open " + path + " for writing");
  os << text;
}

int cmd_train(const RunConfig& cfg) {
  const simo::Dataset dataset = load_dataset(cfg);
  simo::TrainConfig tc;
  tc.batch = simo::BatchSpec::make(cfg.batch_size, cfg.k, dataset.num_classes,
                                   simo::Rng::derive_seed(cfg.seed, 1));
  tc.loss = cfg.loss;
  tc.arch = cfg.arch;
  tc.arch.input_dim = dataset.feature_dim();
  tc.learning_rate = cfg.learning_rate;
  tc.optimizer = cfg.optimizer;
  tc.iterations = cfg.iterations;
  tc.log_period = cfg.log_period;
  tc.seed = cfg.seed;

  fs::create_directories(cfg.output_dir);
  const simo::TrainResult result = simo::train(dataset, tc);
  simo::save_checkpoint(result.params, cfg.output_dir + "/checkpoint.bin");
  simo::write_metrics_csv(result.history, cfg.output_dir + "/metrics.csv");
  write_text(cfg.output_dir + "/resolved-config.json", resolved_json(cfg).dump(2) + "\n");
  simo::log::info("wrote checkpoint, metrics.csv and resolved-config.json to " + cfg.output_dir);
  return 0;
}

int cmd_probe(const RunConfig& cfg, const std::string& checkpoint, bool write_out) {
  const simo::ModelParams params = simo::load_checkpoint(checkpoint);
  const simo::Dataset dataset = load_dataset(cfg);
  const auto [train_split, test_split] =
      simo::split_dataset(dataset, cfg.probe_test_fraction, simo::Rng::derive_seed(cfg.seed, 2));
  const simo::ProbeResult result = simo::linear_probe(params, train_split, test_split, cfg.probe);

  json j;
  j["train_accuracy"] = result.train_accuracy;
  j["test_accuracy"] = result.test_accuracy;
  const std::string text = j.dump(2) + "\n";
  std::cout << text;
  if (write_out) {
    fs::create_directories(cfg.output_dir);
    write_text(cfg.output_dir + "/probe.json", text);
  }
  return 0;
}

int cmd_verify(double epsilon, std::size_t trials, std::uint64_t seed, std::size_t dim,
               const std::string& out_dir) {
  std::vector<std::string> failures;
  json report;

  // Semi-metric properties of d' plus the triangle-inequality hunt.
  simo::Rng rng(seed);
  const simo::PointSource source = [&]() {
    std::vector<double> p(dim);
    for (double& x : p) x = rng.uniform();
    return p;
  };
  const simo::SemiMetricReport sm = simo::verify_semimetric(source, trials, epsilon);
  report["semimetric"] = json::parse(sm.to_json());
  if (sm.nonnegativity_violations != 0) failures.push_back("d_prime non-negativity");
  if (sm.symmetry_violations != 0) failures.push_back("d_prime symmetry");
  if (sm.identity_violations != 0) failures.push_back("d_prime identity of indiscernibles");
  if (sm.triangle_violations.empty()) {
    failures.push_back("triangle-inequality violation not found");
  } else {
    bool witness_found = false;
    for (const simo::TriangleWitness& w : sm.triangle_violations) {
      if (w.trial == -1) witness_found = true;
    }
    if (!witness_found) failures.push_back("fixed witness triple did not violate");
  }

  // Orthogonality bound on Gram-Schmidt bases, R^3..R^16.
  simo::Rng org(simo::Rng::derive_seed(seed, 3));
  json orth = json::array();
  for (std::size_t n = 3; n <= 16; ++n) {
    simo::Tensor basis({n, n});
    for (std::size_t attempt = 0;; ++attempt) {
      for (std::size_t i = 0; i < n * n; ++i) basis[i] = org.gaussian();
      bool ok = true;
      for (std::size_t i = 0; i < n && ok; ++i) {
        for (std::size_t p = 0; p < i; ++p) {
          double dp = 0.0;
          for (std::size_t c = 0; c < n; ++c) dp += basis.at(i, c) * basis.at(p, c);
          for (std::size_t c = 0; c < n; ++c) basis.at(i, c) -= dp * basis.at(p, c);
        }
        double norm = 0.0;
        for (std::size_t c = 0; c < n; ++c) norm += basis.at(i, c) * basis.at(i, c);
        norm = std::sqrt(norm);
        if (norm < 1e-8) {
          ok = false;
          break;
        }
        for (std::size_t c = 0; c < n; ++c) basis.at(i, c) /= norm;
      }
      if (ok) break;
      if (attempt > 8) throw simo::NumericError("verify: Gram-Schmidt failed repeatedly");
    }
    const simo::OrthogonalityResult res = simo::verify_orthogonality_bound(basis, 1e-9);
    orth.push_back({{"dim", n},
                    {"max_mutually_orthogonal_size", res.max_mutually_orthogonal_size},
                    {"bound_holds", res.bound_holds}});
    if (res.max_mutually_orthogonal_size != n) {
      failures.push_back("orthogonal basis of R^" + std::to_string(n) + " not recovered");
    }
    if (!res.bound_holds) {
      failures.push_back("orthogonality bound exceeded in R^" + std::to_string(n));
    }
  }
  report["orthogonality"] = orth;

  // JL projection checks.
  simo::Rng jrng(simo::Rng::derive_seed(seed, 4));
  const double jl_eps = 0.5;
  {
    const std::size_t kvec = 50, n = 10;
    simo::Tensor vecs({kvec, n});
    for (std::size_t i = 0; i < kvec; ++i) {
      double norm = 0.0;
      for (std::size_t c = 0; c < n; ++c) {
        vecs.at(i, c) = jrng.gaussian();
        norm += vecs.at(i, c) * vecs.at(i, c);
      }
      norm = std::sqrt(norm);
      for (std::size_t c = 0; c < n; ++c) vecs.at(i, c) /= norm;
    }
    const simo::JlProjection proj = simo::jl_project(vecs, jl_eps, seed + 5);
    std::size_t pass = 0, total = 0;
    for (std::size_t i = 0; i < kvec; ++i) {
      for (std::size_t j = i + 1; j < kvec; ++j) {
        double orig = 0.0, mapped = 0.0;
        for (std::size_t c = 0; c < n; ++c) {
          const double t = vecs.at(i, c) - vecs.at(j, c);
          orig += t * t;
        }
        for (std::size_t c = 0; c < proj.projector.target_dim; ++c) {
          const double t = proj.projected.at(i, c) - proj.projected.at(j, c);
          mapped += t * t;
        }
        total += 1;
        if (mapped >= (1.0 - jl_eps) * orig && mapped <= (1.0 + jl_eps) * orig) pass += 1;
      }
    }
    const double frac = static_cast<double>(pass) / static_cast<double>(total);
    report["jl"]["target_dim"] = proj.projector.target_dim;
    report["jl"]["distance_pass_fraction"] = frac;
    if (frac < 0.95) failures.push_back("JL squared-distance distortion");
  }
  {
    const std::size_t n = 16;
    simo::Tensor basis({n, n});
    for (std::size_t i = 0; i < n; ++i) basis.at(i, i) = 1.0;
    const simo::JlProjection proj = simo::jl_project(basis, jl_eps, seed + 6);
    std::size_t pass = 0, total = 0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = i + 1; j < n; ++j) {
        double dp = 0.0;
        for (std::size_t c = 0; c < proj.projector.target_dim; ++c) {
          dp += proj.projected.at(i, c) * proj.projected.at(j, c);
        }
        total += 1;
        if (std::fabs(dp) <= jl_eps * 2.0) pass += 1;  // unit vectors: |v_i|^2+|v_j|^2 = 2
      }
    }
    const double frac = static_cast<double>(pass) / static_cast<double>(total);
    report["jl"]["orthogonal_dot_pass_fraction"] = frac;
    if (frac < 0.95) failures.push_back("JL near-orthogonality bound");
  }

  report["passed"] = failures.empty();
  report["failures"] = failures;
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    write_text(out_dir + "/verify.json", report.dump(2) + "\n");
  }
  std::cout << report.dump(2) << "\n";
  if (!failures.empty()) {
    for (const std::string& f : failures) simo::log::error("property failed: " + f);
    return kExitProperty;
  }
  return 0;
}

int cmd_diagnose(const RunConfig& cfg, const std::string& checkpoint,
                 const std::string& out_dir) {
  const simo::ModelParams params = simo::load_checkpoint(checkpoint);
  const simo::Dataset dataset = load_dataset(cfg);
  if (dataset.size() == 0) throw simo::DataError("diagnose: empty dataset");

  const simo::Tensor embeddings = simo::encode(params, dataset.features);
  const simo::DiagnosticsReport report =
      simo::diagnose(embeddings, dataset.labels, dataset.num_classes, cfg.loss, cfg.diagnostics);

  fs::create_directories(out_dir);
  write_text(out_dir + "/report.json", report.to_json() + "\n");
  simo::write_matrix_csv(report.pairwise_matrix, out_dir + "/pairwise_matrix.csv");
  simo::write_matrix_csv(report.class_mean_matrix, out_dir + "/class_mean_matrix.csv");
  simo::export_embeddings(dataset, params, out_dir + "/embeddings.csv");
  simo::log::info("wrote report.json, matrices and embeddings.csv to " + out_dir);
  return 0;
}

int cmd_gen_data(const RunConfig& cfg, const std::string& out_file) {
  if (!cfg.synthetic) {
    throw simo::ConfigError("gen-data: config must use a synthetic dataset");
  }
  const simo::Dataset dataset = simo::generate_synthetic(cfg.synth);
  simo::write_records(dataset, out_file);
  simo::log::info("wrote " + std::to_string(dataset.size()) + " records to " + out_file);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SimO / anchor-free contrastive learning toolkit"};
  app.require_subcommand(1);

  std::string config_path, checkpoint_path, out_dir, out_file;
  std::optional<std::uint64_t> seed_override;
  double epsilon = 1e-6;
  std::size_t trials = 1000, dim = 8;
  std::uint64_t verify_seed = 0;

  CLI::App* train = app.add_subcommand("train", "pretrain an encoder");
  train->add_option("--config", config_path, "JSON config")->required();
  train->add_option("--out", out_dir, "output directory (overrides config)");
  train->add_option("--seed", seed_override, "seed override");

  CLI::App* probe = app.add_subcommand("probe", "linear-probe a frozen checkpoint");
  probe->add_option("--config", config_path, "JSON config")->required();
  probe->add_option("--checkpoint", checkpoint_path, "encoder checkpoint")->required();
  probe->add_option("--out", out_dir, "output directory for probe.json");
  probe->add_option("--seed", seed_override, "seed override");

  CLI::App* verify = app.add_subcommand(
      "verify", "run the semi-metric / orthogonality / JL property suite");
  verify->add_option("--epsilon", epsilon, "ratio denominator guard");
  verify->add_option("--trials", trials, "random pair/triple trials");
  verify->add_option("--seed", verify_seed, "sampler seed");
  verify->add_option("--dim", dim, "sample dimension");
  verify->add_option("--out", out_dir, "output directory for verify.json");

  CLI::App* diagnose = app.add_subcommand("diagnose", "embedding-space diagnostics");
  diagnose->add_option("--config", config_path, "JSON config")->required();
  diagnose->add_option("--checkpoint", checkpoint_path, "encoder checkpoint")->required();
  diagnose->add_option("--out", out_dir, "output directory")->required();
  diagnose->add_option("--seed", seed_override, "seed override");

  CLI::App* gen = app.add_subcommand("gen-data", "write a synthetic dataset as records");
  gen->add_option("--config", config_path, "JSON config")->required();
  gen->add_option("--out", out_file, "output records file")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (verify->parsed()) return cmd_verify(epsilon, trials, verify_seed, dim, out_dir);

    RunConfig cfg = load_config(config_path);
    if (seed_override.has_value()) cfg.seed = *seed_override;
    if (!out_dir.empty()) cfg.output_dir = out_dir;

    if (train->parsed()) return cmd_train(cfg);
    if (probe->parsed()) return cmd_probe(cfg, checkpoint_path, !out_dir.empty());
    if (diagnose->parsed()) return cmd_diagnose(cfg, checkpoint_path, cfg.output_dir);
    if (gen->parsed()) return cmd_gen_data(cfg, out_file);
  } catch (const simo::ConfigError& err) {
    simo::log::error(err.what());
    return kExitConfig;
  } catch (const simo::NumericError& err) {
    simo::log::error(err.what());
    return kExitNumeric;
  } catch (const simo::ShapeError& err) {
    simo::log::error(err.what());
    return kExitData;
  } catch (const simo::DataError& err) {
    simo::log::error(err.what());
    return kExitData;
  } catch (const std::exception& err) {
    simo::log::error(err.what());
    return kExitConfig;
  }
  return 0;
}
