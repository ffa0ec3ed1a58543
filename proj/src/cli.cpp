#include "selfgnn/cli.hpp"

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "selfgnn/checkpoint.hpp"
#include "selfgnn/cluster.hpp"
#include "selfgnn/config.hpp"
#include "selfgnn/errors.hpp"
#include "selfgnn/eval.hpp"
#include "selfgnn/feature_aug.hpp"
#include "selfgnn/io.hpp"
#include "selfgnn/parallel.hpp"
#include "selfgnn/trainer.hpp"

namespace selfgnn {

namespace fs = std::filesystem;

namespace {

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> threads;
  std::optional<std::string> precision;
  std::optional<std::string> data;
  std::vector<std::string> sets;
  std::optional<std::string> feature;
  std::optional<int> clusters;
  std::optional<int> batches;
  std::optional<std::string> import_partition;
  std::string what = "split-perm";
  int trials = 5;
  std::optional<std::string> checkpoint;
  std::optional<std::string> embeddings;
};

RunConfig resolve(const Flags& f) {
  RunConfig cfg;
  if (!f.config.empty()) cfg.apply_file(f.config);
  if (const char* env = std::getenv("SELFGNN_THREADS"); env != nullptr && *env != '\0' && !f.threads) {
    cfg.set("threads", env);
  }
  if (f.seed) cfg.set("seed", std::to_string(*f.seed));
  if (f.out) cfg.set("out", *f.out);
  if (f.threads) cfg.set("threads", std::to_string(*f.threads));
  if (f.precision) cfg.set("precision", *f.precision);
  if (f.data) cfg.set("data", *f.data);
  if (f.clusters) {
    cfg.set("mode", "cluster");
    cfg.set("cluster.k", std::to_string(*f.clusters));
  }
  if (f.batches) {
    cfg.set("mode", "cluster");
    cfg.set("cluster.b", std::to_string(*f.batches));
  }
  if (f.import_partition) {
    cfg.set("mode", "cluster");
    cfg.set("cluster.partition", *f.import_partition);
  }
  for (const auto& kv : f.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    cfg.set(std::string(io::trim(kv.substr(0, eq))), std::string(io::trim(kv.substr(eq + 1))));
  }
  cfg.validate();
  set_num_threads(cfg.threads);
  return cfg;
}

Graph load_dataset(const RunConfig& cfg) {
  if (cfg.data.empty()) throw ConfigError("no dataset given (use --data DIR or 'data = DIR')");
  Graph g = load_graph_bundle(cfg.data);
  if (g.has_labels() && !g.has_split()) g.split = stratified_split(g.labels, cfg.split_seed);
  return g;
}

fs::path prepare_out(const RunConfig& cfg) {
  fs::path out(cfg.out);
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw DataError("cannot create output directory " + out.string() + ": " + ec.message());
  io::write_text(out / "resolved.cfg", cfg.to_text());
  return out;
}

std::string dataset_name(const RunConfig& cfg) {
  fs::path p(cfg.data);
  if (!p.has_filename()) p = p.parent_path();
  return p.filename().string();
}

std::vector<Batch> build_batches(const Graph& g, const RunConfig& cfg, std::optional<Partition>* partition) {
  if (cfg.mode == RunMode::kFull) {
    std::vector<Batch> b;
    b.push_back(make_batch(g, cfg.aug));
    return b;
  }
  Partition p = cfg.cluster.partition_file ? read_partition_file(*cfg.cluster.partition_file, g.num_nodes)
                                           : partition_graph(g, cfg.cluster.clusters, cfg.seed);
  auto groups = merge_clusters(p, std::min(cfg.cluster.resolved_batches(), p.num_clusters), cfg.seed);
  if (partition) *partition = p;
  return make_cluster_batches(g, cfg.aug, groups);
}

struct ReportRow {
  std::string dataset;
  std::string variant;
  std::string protocol;
  double mean = 0.0;
  double std = 0.0;
  double collapse_std = 0.0;
  double effective_rank = 0.0;
  std::optional<double> wall_seconds;
};

std::string report_header() {
  return "dataset\tvariant\tprotocol\taccuracy_mean\taccuracy_std\tcollapse_mean_std\teffective_rank\twall_time\n";
}

std::string report_line(const ReportRow& r) {
  std::ostringstream os;
  os << r.dataset << '\t' << r.variant << '\t' << r.protocol << '\t' << io::format_double(r.mean) << '\t'
     << io::format_double(r.std) << '\t' << io::format_double(r.collapse_std) << '\t'
     << io::format_double(r.effective_rank) << '\t' << (r.wall_seconds ? io::format_double(*r.wall_seconds) : "NA")
     << '\n';
  return os.str();
}

/// Protocol A (fit on train, score on test) and protocol B (k-fold CV).
std::vector<ReportRow> evaluate_embeddings(const Graph& g, const DenseMatrix& emb, const RunConfig& cfg,
                                           const std::string& variant, std::optional<double> wall) {
  if (!g.has_labels()) throw DataError("evaluation needs labels.tsv in the dataset bundle");
  if (emb.rows() != g.num_nodes) throw DataError("embedding rows do not match the dataset's node count");
  const CollapseMetrics cm = collapse_metrics(emb);
  const ProbeResult a = split_probe(emb, g.labels, g.split, SplitTag::kTrain, SplitTag::kTest, cfg.train.probe);
  const KFoldResult b = kfold_accuracy(emb, g.labels, cfg.train.probe);
  const std::string ds = dataset_name(cfg);
  return {ReportRow{ds, variant, "A", a.accuracy, 0.0, cm.mean_std, cm.effective_rank, wall},
          ReportRow{ds, variant, "B", b.mean, b.std, cm.mean_std, cm.effective_rank, wall}};
}

template <typename T>
struct PipelineOutcome {
  TrainResult<T> result;
  DenseMatrix embeddings;
  std::optional<Partition> partition;
  double seconds = 0.0;
};

template <typename T>
PipelineOutcome<T> run_pipeline(const Graph& g, const RunConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  PipelineOutcome<T> o;
  std::vector<Batch> batches = build_batches(g, cfg, &o.partition);
  o.result = train_batches<T>(g, batches, cfg.train, cfg.mode == RunMode::kCluster);
  o.embeddings = embed_batches(o.result.best, batches, g.num_nodes, cfg.train);
  o.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return o;
}

template <typename T>
void write_training_outputs(const fs::path& out, PipelineOutcome<T>& o) {
  save_params(out / "checkpoint.sgnn", o.result.best);
  write_history(o.result.history, out / "history.tsv");
  if (o.partition) write_partition_file(*o.partition, out / "partition.tsv");
}

void write_operator_tsv(const SparseMatrix& h, const std::string& meta, const fs::path& path) {
  std::ostringstream os;
  os << "# " << meta << '\n';
  const auto& rp = h.row_ptr();
  const auto& ci = h.col_idx();
  const auto& v = h.values();
  for (int i = 0; i < h.rows(); ++i) {
    for (auto k = rp[static_cast<std::size_t>(i)]; k < rp[static_cast<std::size_t>(i) + 1]; ++k) {
      os << i << '\t' << ci[static_cast<std::size_t>(k)] << '\t' << io::format_double(v[static_cast<std::size_t>(k)])
         << '\n';
    }
  }
  io::write_text(path, os.str());
}

std::string diffusion_meta(const RunConfig& cfg) {
  std::ostringstream os;
  std::istringstream in(cfg.to_text());
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.rfind("diffusion.", 0) != 0 && line.rfind("aug.variant", 0) != 0) continue;
    const auto eq = line.find(" = ");
    os << (first ? "" : " ") << line.substr(0, eq) << '=' << line.substr(eq + 3);
    first = false;
  }
  return os.str();
}

int cmd_augment(const Flags& f, std::ostream& out) {
  RunConfig cfg = resolve(f);
  if (f.feature) cfg.set("aug.variant", *f.feature);
  const Graph g = load_dataset(cfg);
  const fs::path dir = prepare_out(cfg);
  if (is_topological(cfg.aug.variant)) {
    const ViewPair v = make_views(g, cfg.aug);
    write_operator_tsv(v.second.op, diffusion_meta(cfg), dir / "operator.tsv");
    out << "wrote " << (dir / "operator.tsv").string() << " (" << v.second.op.nnz() << " entries)\n";
    return 0;
  }
  const ViewPair v = make_views(g, cfg.aug);
  write_matrix_tsv(v.first.x, dir / "view1.tsv");
  write_matrix_tsv(v.second.x, dir / "view2.tsv");
  out << "wrote " << (dir / "view1.tsv").string() << " and " << (dir / "view2.tsv").string() << '\n';
  return 0;
}

template <typename T>
int cmd_train_t(const RunConfig& cfg, std::ostream& out) {
  const Graph g = load_dataset(cfg);
  const fs::path dir = prepare_out(cfg);
  std::optional<Partition> partition;
  std::vector<Batch> batches = build_batches(g, cfg, &partition);
  PipelineOutcome<T> o;
  o.partition = partition;
  o.result = train_batches<T>(g, batches, cfg.train, cfg.mode == RunMode::kCluster);
  write_training_outputs(dir, o);
  out << "trained " << cfg.train.epochs << " epochs; best epoch " << o.result.best_epoch;
  if (o.result.best_val_acc >= 0.0) out << " (val acc " << io::format_double(o.result.best_val_acc) << ")";
  out << '\n';
  return 0;
}

template <typename T>
int cmd_embed_t(const RunConfig& cfg, const Flags& f, std::ostream& out) {
  const Graph g = load_dataset(cfg);
  const fs::path dir = prepare_out(cfg);
  const fs::path ckpt = f.checkpoint ? fs::path(*f.checkpoint) : dir / "checkpoint.sgnn";
  std::vector<Batch> batches = build_batches(g, cfg, nullptr);
  ModelConfig mc = cfg.train.model;
  mc.input_dim = batches.front().input_dim();
  ModelParams<T> params = init_params<T>(mc, cfg.seed);
  load_params(ckpt, params);
  const DenseMatrix emb = embed_batches(params, batches, g.num_nodes, cfg.train);
  write_matrix_tsv(emb, dir / "embeddings.tsv");
  out << "wrote " << (dir / "embeddings.tsv").string() << " (" << emb.rows() << " x " << emb.cols() << ")\n";
  return 0;
}

int cmd_evaluate(const Flags& f, std::ostream& out) {
  const RunConfig cfg = resolve(f);
  const Graph g = load_dataset(cfg);
  const fs::path dir = prepare_out(cfg);
  const fs::path path = f.embeddings ? fs::path(*f.embeddings) : dir / "embeddings.tsv";
  const DenseMatrix emb = read_matrix_tsv(path);
  std::string text = report_header();
  for (const auto& r : evaluate_embeddings(g, emb, cfg, to_string(cfg.aug.variant), std::nullopt)) {
    text += report_line(r);
    out << r.protocol << ": " << io::format_double(r.mean) << '\n';
  }
  io::write_text(dir / "report.tsv", text);
  return 0;
}

template <typename T>
int cmd_report_t(const RunConfig& cfg, std::ostream& out) {
  const Graph g = load_dataset(cfg);
  const fs::path dir = prepare_out(cfg);
  auto o = run_pipeline<T>(g, cfg);
  write_training_outputs(dir, o);
  write_matrix_tsv(o.embeddings, dir / "embeddings.tsv");
  std::optional<double> wall;
  if (cfg.report_wall_time) wall = o.seconds;
  std::string variant = to_string(cfg.aug.variant);
  if (cfg.mode == RunMode::kCluster) variant += "-cluster";
  std::string text = report_header();
  for (const auto& r : evaluate_embeddings(g, o.embeddings, cfg, variant, wall)) {
    text += report_line(r);
    out << variant << ' ' << r.protocol << ": " << io::format_double(r.mean) << '\n';
  }
  io::write_text(dir / "report.tsv", text);
  return 0;
}

template <typename T>
int cmd_ablate_t(const RunConfig& base, const Flags& f, std::ostream& out) {
  const Graph g = load_dataset(base);
  const fs::path dir = prepare_out(base);
  if (f.trials < 1) throw ConfigError("--trials must be >= 1");
  std::string text = report_header();
  auto run = [&](const Graph& graph, const RunConfig& cfg, const std::string& variant) {
    auto o = run_pipeline<T>(graph, cfg);
    std::optional<double> wall;
    if (cfg.report_wall_time) wall = o.seconds;
    const auto rows = evaluate_embeddings(graph, o.embeddings, cfg, variant, wall);
    text += report_line(rows.front());
    out << variant << ": " << io::format_double(rows.front().mean) << '\n';
  };
  if (f.what == "split-perm") {
    RunConfig cfg = base;
    cfg.set("aug.variant", "split");
    run(g, cfg, "split");
    for (int trial = 1; trial <= f.trials; ++trial) {
      Graph permuted = g;
      const auto perm = random_feature_permutation(g.num_features(), mix64(base.seed + static_cast<std::uint64_t>(trial)));
      permuted.features = permute_features(g.features, perm);
      run(permuted, cfg, "split-perm-" + std::to_string(trial));
    }
  } else if (f.what == "projection") {
    RunConfig off = base;
    off.set("model.projector", "false");
    run(g, off, to_string(base.aug.variant) + "-no-projector");
    RunConfig on = base;
    on.set("model.projector", "true");
    run(g, on, to_string(base.aug.variant) + "-projector");
  } else {
    throw ConfigError("--what must be split-perm or projection, got '" + f.what + "'");
  }
  io::write_text(dir / "ablation.tsv", text);
  return 0;
}

template <template <typename> class Fn, typename... Args>
int dispatch(const RunConfig& cfg, Args&&... args) {
  if (cfg.precision == Precision::kF64) return Fn<double>::run(cfg, std::forward<Args>(args)...);
  return Fn<float>::run(cfg, std::forward<Args>(args)...);
}

template <typename T>
struct TrainCmd {
  static int run(const RunConfig& c, std::ostream& o) { return cmd_train_t<T>(c, o); }
};
template <typename T>
struct EmbedCmd {
  static int run(const RunConfig& c, const Flags& f, std::ostream& o) { return cmd_embed_t<T>(c, f, o); }
};
template <typename T>
struct ReportCmd {
  static int run(const RunConfig& c, std::ostream& o) { return cmd_report_t<T>(c, o); }
};
template <typename T>
struct AblateCmd {
  static int run(const RunConfig& c, const Flags& f, std::ostream& o) { return cmd_ablate_t<T>(c, f, o); }
};

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Self-supervised node embeddings with student/teacher networks"};
  app.require_subcommand(1);
  Flags f;
  app.add_option("--config", f.config, "config file (key = value lines)");
  app.add_option("--seed", f.seed, "run seed");
  app.add_option("--out", f.out, "output directory");
  app.add_option("--threads", f.threads, "worker threads (fallback: SELFGNN_THREADS)");
  app.add_option("--precision", f.precision, "f32 or f64");
  app.add_option("--data", f.data, "dataset bundle directory");
  app.add_option("--set", f.sets, "override a config key: key=value");
  app.add_option("--clusters", f.clusters, "cluster mode with k clusters");
  app.add_option("--batches", f.batches, "cluster mode: number of merged batches");
  app.add_option("--import-partition", f.import_partition, "cluster mode: partition file (one id per line)");

  auto* augment = app.add_subcommand("augment", "write an augmented operator or feature views");
  augment->add_option("--feature", f.feature, "split|standardize|ldp|paste (default: aug.variant)");
  auto* train = app.add_subcommand("train", "train and write checkpoint.sgnn and history.tsv");
  auto* embed_cmd = app.add_subcommand("embed", "write embeddings.tsv from a checkpoint");
  embed_cmd->add_option("--checkpoint", f.checkpoint, "checkpoint path (default OUT/checkpoint.sgnn)");
  auto* evaluate = app.add_subcommand("evaluate", "probe embeddings and write report.tsv");
  evaluate->add_option("--embeddings", f.embeddings, "embeddings path (default OUT/embeddings.tsv)");
  auto* ablate = app.add_subcommand("ablate", "feature-permutation or projection-head ablation");
  ablate->add_option("--what", f.what, "split-perm or projection");
  ablate->add_option("--trials", f.trials, "number of permutations");
  auto* report = app.add_subcommand("report", "train, embed and evaluate in one run");
  for (auto* sub : {augment, train, embed_cmd, evaluate, ablate, report}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "selfgnn: " << e.what() << '\n';
    return 1;
  }

  try {
    if (augment->parsed()) return cmd_augment(f, out);
    if (evaluate->parsed()) return cmd_evaluate(f, out);
    const RunConfig cfg = resolve(f);
    if (train->parsed()) return dispatch<TrainCmd>(cfg, out);
    if (embed_cmd->parsed()) return dispatch<EmbedCmd>(cfg, f, out);
    if (report->parsed()) return dispatch<ReportCmd>(cfg, out);
    if (ablate->parsed()) return dispatch<AblateCmd>(cfg, f, out);
  } catch (const ConfigError& e) {
    err << "selfgnn: config error: " << e.what() << '\n';
    return 1;
  } catch (const DataError& e) {
    err << "selfgnn: data error: " << e.what() << '\n';
    return 2;
  } catch (const NumericError& e) {
    err << "selfgnn: numeric failure: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    err << "selfgnn: error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv{"selfgnn"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace selfgnn
