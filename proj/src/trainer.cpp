#include "selfgnn/trainer.hpp"

#include <deque>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "selfgnn/errors.hpp"
#include "selfgnn/feature_aug.hpp"
#include "selfgnn/io.hpp"

namespace selfgnn {

std::string to_string(AugVariant v) {
  switch (v) {
    case AugVariant::kPpr: return "ppr";
    case AugVariant::kHeat: return "heat";
    case AugVariant::kKatz: return "katz";
    case AugVariant::kSplit: return "split";
    case AugVariant::kStandardize: return "standardize";
    case AugVariant::kLdp: return "ldp";
    case AugVariant::kPaste: return "paste";
  }
  return "?";
}

AugVariant parse_aug_variant(const std::string& s) {
  for (auto v : {AugVariant::kPpr, AugVariant::kHeat, AugVariant::kKatz, AugVariant::kSplit, AugVariant::kStandardize,
                 AugVariant::kLdp, AugVariant::kPaste}) {
    if (s == to_string(v)) return v;
  }
  throw ConfigError("unknown augmentation variant '" + s + "' (ppr|heat|katz|split|standardize|ldp|paste)");
}

bool is_topological(AugVariant v) {
  return v == AugVariant::kPpr || v == AugVariant::kHeat || v == AugVariant::kKatz;
}

ViewPair make_views(const Graph& g, const AugSpec& spec) {
  g.validate();
  const SparseMatrix a_tilde = symmetric_renormalize(g);
  ViewPair v;
  v.first = View{a_tilde, g.features, "original"};
  if (is_topological(spec.variant)) {
    DiffusionConfig cfg = spec.diffusion;
    cfg.kind = spec.variant == AugVariant::kPpr    ? DiffusionKind::kPpr
               : spec.variant == AugVariant::kHeat ? DiffusionKind::kHeat
                                                   : DiffusionKind::kKatz;
    v.second = View{diffusion_operator(g, cfg), g.features, to_string(cfg.kind) + " diffusion"};
    return v;
  }
  switch (spec.variant) {
    case AugVariant::kSplit: {
      auto [a, b] = split_features(g.features);
      v.first = View{a_tilde, std::move(a.matrix), a.provenance};
      v.second = View{a_tilde, std::move(b.matrix), b.provenance};
      break;
    }
    case AugVariant::kStandardize: {
      auto s = standardize(g.features);
      v.second = View{a_tilde, std::move(s.matrix), s.provenance};
      break;
    }
    case AugVariant::kLdp: {
      auto l = ldp_padded(g, g.num_features());
      v.second = View{a_tilde, std::move(l.matrix), l.provenance};
      break;
    }
    case AugVariant::kPaste: {
      auto [a, b] = paste(g.features, g);
      v.first = View{a_tilde, std::move(a.matrix), a.provenance};
      v.second = View{a_tilde, std::move(b.matrix), b.provenance};
      break;
    }
    default:
      break;
  }
  return v;
}

void align_widths(ViewPair& views) {
  auto pad = [](DenseMatrix& x, Eigen::Index width) {
    if (x.cols() >= width) return;
    DenseMatrix out = DenseMatrix::Zero(x.rows(), width);
    out.leftCols(x.cols()) = x;
    x = std::move(out);
  };
  const Eigen::Index w = std::max(views.first.x.cols(), views.second.x.cols());
  pad(views.first.x, w);
  pad(views.second.x, w);
}

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("train.epochs must be >= 1");
  if (!(lr >= 0.0)) throw ConfigError("train.lr must be >= 0");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("train.dropout must be in [0, 1)");
  if (!(tau >= 0.0 && tau <= 1.0)) throw ConfigError("train.tau must be in [0, 1]");
  if (eval_every < 0) throw ConfigError("train.eval_every must be >= 0");
  probe.validate();
}

Batch::Batch(ViewPair v, std::vector<int> node_ids)
    : op1(std::move(v.first.op)), op2(std::move(v.second.op)), views(std::move(v)), nodes(std::move(node_ids)) {
  align_widths(views);
  auto sparse_copy = [](const DenseMatrix& x) -> std::optional<ad::FixedOperator> {
    if (x.size() == 0) return std::nullopt;
    const auto nnz = (x.array() != 0.0).count();
    if (static_cast<double>(nnz) > kSparseFeatureDensity * static_cast<double>(x.size())) return std::nullopt;
    return ad::FixedOperator(SparseMatrix::from_dense(x));
  };
  x1_sparse = sparse_copy(views.first.x);
  x2_sparse = sparse_copy(views.second.x);
  const auto n = static_cast<Eigen::Index>(nodes.size());
  if (op1.forward.rows() != n || op2.forward.rows() != n || views.first.x.rows() != n || views.second.x.rows() != n) {
    throw ConfigError("Batch: views do not match the node count");
  }
}

Batch make_batch(const Graph& g, const AugSpec& spec) {
  std::vector<int> ids(static_cast<std::size_t>(g.num_nodes));
  std::iota(ids.begin(), ids.end(), 0);
  Batch b(make_views(g, spec), std::move(ids));
  b.pairing = spec.pairing;
  return b;
}

StepRngs::StepRngs(std::uint64_t seed)
    : student(Rng::substream(seed, "dropout")), teacher(Rng::substream(seed, "dropout-teacher")) {}

namespace {

struct Side {
  const ad::FixedOperator* op;
  const DenseMatrix* x;
  const ad::FixedOperator* x_sparse;  // null when x is kept dense
};

Side first_side(const Batch& b) { return {&b.op1, &b.views.first.x, b.x1_sparse ? &*b.x1_sparse : nullptr}; }
Side second_side(const Batch& b) { return {&b.op2, &b.views.second.x, b.x2_sparse ? &*b.x2_sparse : nullptr}; }

template <typename T, typename Enc>
ad::Tensor<T> encode(Enc& enc, Side side, const ForwardOptions& opt, Rng& rng, ParamBinder<T>& binder) {
  if (side.x_sparse) return encoder_forward(enc, *side.op, *side.x_sparse, opt, rng, binder);
  auto x = binder.tape().constant(side.x->template cast<T>());
  return encoder_forward(enc, *side.op, x, opt, rng, binder);
}

std::pair<Side, Side> student_teacher(const Batch& b, bool swap) {
  Side one = first_side(b);
  Side two = second_side(b);
  const bool augmented_first = b.pairing == Pairing::kStudentAugmented;
  if (augmented_first != swap) return {two, one};
  return {one, two};
}

template <typename T>
ad::Tensor<T> student_prediction(StudentParams<T>& s, Side side, const ForwardOptions& opt, Rng& rng,
                                 ParamBinder<T>& binder) {
  auto z = encode<T>(s.encoder, side, opt, rng, binder);
  if (s.projector) z = projector_forward(s.projector, z, opt, binder);
  return predictor_forward(s.predictor, z, opt, binder);
}

/// Teacher output on its own tape; no backward is ever run there.
template <typename T>
ad::Matrix<T> teacher_target(TeacherParams<T>& t, Side side, const ForwardOptions& opt, Rng& rng,
                             std::size_t& grad_buffers) {
  ad::Tape<T> tape;
  ParamBinder<T> binder(tape, false);
  auto z = encode<T>(t.encoder, side, opt, rng, binder);
  if (t.projector) z = projector_forward(t.projector, z, opt, binder);
  for (std::size_t id = 0; id < tape.size(); ++id) grad_buffers += tape.has_grad(static_cast<int>(id)) ? 1 : 0;
  return z.value();
}

}  // namespace

template <typename T>
StepStats train_step(ModelParams<T>& params, ad::Adam<T>& opt, const Batch& batch, const TrainConfig& cfg,
                     StepRngs& rngs, bool apply_ema) {
  ForwardOptions fo{ad::Mode::kTrain, cfg.dropout, cfg.model.activation};
  StepStats stats;
  ad::Tape<T> tape;
  ParamBinder<T> binder(tape, true);
  std::vector<ad::Tensor<T>> targets;

  auto one_direction = [&](bool swap) {
    auto [s, t] = student_teacher(batch, swap);
    auto p = student_prediction(params.student, s, fo, rngs.student, binder);
    auto z = tape.constant(teacher_target(params.teacher, t, fo, rngs.teacher, stats.teacher_grad_buffers));
    targets.push_back(z);
    return ad::cosine_mse_loss(p, z, cfg.loss);
  };
  auto loss = one_direction(false);
  if (cfg.symmetric) loss = ad::scale(ad::add(loss, one_direction(true)), T(0.5));
  stats.loss = static_cast<double>(loss.value()(0, 0));
  tape.backward(loss);
  for (auto z : targets) stats.teacher_grad_buffers += tape.has_grad(z) ? 1 : 0;

  std::unordered_map<const ad::Matrix<T>*, ad::Tensor<T>> leaves;
  for (const auto& [m, t] : binder.bound()) leaves.emplace(m, t);
  std::vector<ad::Matrix<T>*> ps;
  std::vector<const ad::Matrix<T>*> gs;
  std::deque<ad::Matrix<T>> zeros;  // stable addresses for unused parameters' zero gradients
  visit_student<T>(params.student, [&](const std::string&, ad::Matrix<T>& m) {
    ps.push_back(&m);
    auto it = leaves.find(&m);
    if (it != leaves.end() && tape.has_grad(it->second)) {
      gs.push_back(&tape.grad(it->second));
    } else {
      zeros.push_back(ad::Matrix<T>::Zero(m.rows(), m.cols()));
      gs.push_back(&zeros.back());
    }
  });
  opt.step(ps, gs);
  if (apply_ema) ema_update(params.student, params.teacher, cfg.tau);
  return stats;
}

template <typename T>
DenseMatrix embed(ModelParams<T>& params, const Batch& batch, const TrainConfig& cfg) {
  ForwardOptions fo{ad::Mode::kEval, 0.0, cfg.model.activation};
  Rng unused(0);
  auto run = [&](EncoderParams<T>& enc, Side side) {
    ad::Tape<T> tape;
    ParamBinder<T> binder(tape, false);
    auto z = encode<T>(enc, side, fo, unused, binder);
    return DenseMatrix(z.value().template cast<double>());
  };
  DenseMatrix a = run(params.student.encoder, first_side(batch));
  if (cfg.embed == EmbedMode::kStudent) return a;
  DenseMatrix b = run(params.teacher.encoder, second_side(batch));
  DenseMatrix out(a.rows(), a.cols() + b.cols());
  out << a, b;
  return out;
}

template <typename T>
DenseMatrix embed_batches(ModelParams<T>& params, const std::vector<Batch>& batches, int num_nodes,
                          const TrainConfig& cfg) {
  DenseMatrix out;
  std::vector<char> seen(static_cast<std::size_t>(num_nodes), 0);
  for (const auto& b : batches) {
    DenseMatrix e = embed(params, b, cfg);
    if (out.size() == 0) out = DenseMatrix::Zero(num_nodes, e.cols());
    for (int i = 0; i < b.size(); ++i) {
      const int id = b.nodes[static_cast<std::size_t>(i)];
      if (id < 0 || id >= num_nodes || seen[static_cast<std::size_t>(id)]) {
        throw ConfigError("embed_batches: batches do not form a disjoint cover of the nodes");
      }
      seen[static_cast<std::size_t>(id)] = 1;
      out.row(id) = e.row(i);
    }
  }
  for (char s : seen) {
    if (!s) throw ConfigError("embed_batches: batches do not cover every node");
  }
  return out;
}

template <typename T>
TrainResult<T> train_batches(const Graph& g, std::vector<Batch>& batches, const TrainConfig& cfg, bool shuffle) {
  cfg.validate();
  if (batches.empty()) throw ConfigError("train: no batches");
  const int input_dim = batches.front().input_dim();
  for (const auto& b : batches) {
    if (b.input_dim() != input_dim) throw ConfigError("train: batches disagree on feature width");
  }
  const bool probing = cfg.eval_every > 0;
  if (probing && (!g.has_labels() || !g.has_split())) {
    throw DataError("train: validation probing needs labels and a split (or set train.eval_every = 0)");
  }

  ModelConfig mc = cfg.model;
  mc.input_dim = input_dim;
  TrainResult<T> res;
  ModelParams<T> params = init_params<T>(mc, cfg.seed);
  ad::Adam<T> opt(cfg.lr);
  StepRngs rngs(cfg.seed);
  Rng order_rng = Rng::substream(cfg.seed, "batch-order");
  std::vector<std::size_t> order(batches.size());
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    if (shuffle) order_rng.shuffle(order);
    double total = 0.0;
    for (std::size_t i : order) {
      try {
        total += train_step(params, opt, batches[i], cfg, rngs).loss;
      } catch (const NumericError& e) {
        throw NumericError("epoch " + std::to_string(epoch) + ", batch " + std::to_string(i) + ": " + e.what());
      }
    }
    HistoryRow row{epoch, total / static_cast<double>(batches.size()), -1.0};
    if (probing && (epoch % cfg.eval_every == 0 || epoch == cfg.epochs)) {
      const DenseMatrix emb = embed_batches(params, batches, g.num_nodes, cfg);
      row.val_acc = split_probe(emb, g.labels, g.split, SplitTag::kTrain, SplitTag::kVal, cfg.probe).accuracy;
      if (row.val_acc > res.best_val_acc) {
        res.best_val_acc = row.val_acc;
        res.best_epoch = epoch;
        res.best = params;
      }
    }
    res.history.push_back(row);
  }
  res.last = std::move(params);
  if (!probing) {
    res.best = res.last;
    res.best_epoch = cfg.epochs;
  }
  return res;
}

template <typename T>
TrainResult<T> train(const Graph& g, const AugSpec& spec, const TrainConfig& cfg) {
  std::vector<Batch> batches;
  batches.push_back(make_batch(g, spec));
  return train_batches<T>(g, batches, cfg, false);
}

void write_history(const std::vector<HistoryRow>& history, const std::filesystem::path& path) {
  std::ostringstream os;
  os << "epoch\tloss\tval_acc\n";
  for (const auto& r : history) {
    os << r.epoch << '\t' << io::format_double(r.loss) << '\t'
       << (r.val_acc < 0.0 ? std::string("NA") : io::format_double(r.val_acc)) << '\n';
  }
  io::write_text(path, os.str());
}

#define SELFGNN_INSTANTIATE_TRAINER(T)                                                                            \
  template StepStats train_step<T>(ModelParams<T>&, ad::Adam<T>&, const Batch&, const TrainConfig&, StepRngs&,    \
                                   bool);                                                                         \
  template DenseMatrix embed<T>(ModelParams<T>&, const Batch&, const TrainConfig&);                               \
  template DenseMatrix embed_batches<T>(ModelParams<T>&, const std::vector<Batch>&, int, const TrainConfig&);     \
  template TrainResult<T> train_batches<T>(const Graph&, std::vector<Batch>&, const TrainConfig&, bool);          \
  template TrainResult<T> train<T>(const Graph&, const AugSpec&, const TrainConfig&);

SELFGNN_INSTANTIATE_TRAINER(float)
SELFGNN_INSTANTIATE_TRAINER(double)

}  // namespace selfgnn
