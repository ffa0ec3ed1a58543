#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "selfgnn/autodiff.hpp"
#include "selfgnn/diffusion.hpp"
#include "selfgnn/eval.hpp"
#include "selfgnn/graph.hpp"
#include "selfgnn/model.hpp"

namespace selfgnn {

enum class AugVariant { kPpr, kHeat, kKatz, kSplit, kStandardize, kLdp, kPaste };

std::string to_string(AugVariant v);
AugVariant parse_aug_variant(const std::string& s);
bool is_topological(AugVariant v);

/// Which view feeds the student. The teacher always gets the other one.
enum class Pairing { kStudentOriginal, kStudentAugmented };

struct AugSpec {
  AugVariant variant = AugVariant::kPpr;
  DiffusionConfig diffusion;
  Pairing pairing = Pairing::kStudentOriginal;
};

/// A propagation operator and the features it acts on.
struct View {
  SparseMatrix op;
  DenseMatrix x;
  std::string provenance;
};

/// View1 is the original graph (or the first feature half); View2 the augmented one.
struct ViewPair {
  View first;
  View second;
};

ViewPair make_views(const Graph& g, const AugSpec& spec);

/// Zero-pads the narrower feature matrix on the right so both views share
/// one encoder shape.
void align_widths(ViewPair& views);

enum class EmbedMode { kStudent, kConcat };

struct TrainConfig {
  int epochs = 1000;
  double lr = 1e-4;
  double dropout = 0.2;
  double tau = 0.99;
  ad::LossMode loss = ad::LossMode::kMatrix;
  bool symmetric = false;  // also predict View1 from View2 and average
  std::uint64_t seed = 0;
  int eval_every = 25;     // 0: no validation probing, keep the last epoch
  EmbedMode embed = EmbedMode::kStudent;
  ModelConfig model;
  ProbeConfig probe;

  void validate() const;
};

/// Views prepared for training on one (sub)graph. Feature widths are aligned.
struct Batch {
  Batch(ViewPair v, std::vector<int> node_ids);

  ad::FixedOperator op1;  // takes over views.first.op
  ad::FixedOperator op2;  // takes over views.second.op
  ViewPair views;         // features and provenance; the ops are moved out
  std::optional<ad::FixedOperator> x1_sparse;  // CSR copy of views.first.x when it is sparse enough
  std::optional<ad::FixedOperator> x2_sparse;
  std::vector<int> nodes;  // global id of each local row
  Pairing pairing = Pairing::kStudentOriginal;

  int size() const { return static_cast<int>(nodes.size()); }
  int input_dim() const { return static_cast<int>(views.first.x.cols()); }
};

/// Feature matrices at or below this fill ratio are multiplied in CSR form.
inline constexpr double kSparseFeatureDensity = 0.25;

Batch make_batch(const Graph& g, const AugSpec& spec);

/// The dropout streams of a run. Student and teacher draw from separate
/// named substreams so their masks never depend on each other.
struct StepRngs {
  explicit StepRngs(std::uint64_t seed);
  Rng student;
  Rng teacher;
};

struct StepStats {
  double loss = 0.0;
  std::size_t teacher_grad_buffers = 0;  // gradient buffers found on the teacher side after backward
};

/// One student update. Adam moves the student only; ema_update follows when
/// apply_ema is set.
template <typename T>
StepStats train_step(ModelParams<T>& params, ad::Adam<T>& opt, const Batch& batch, const TrainConfig& cfg,
                     StepRngs& rngs, bool apply_ema = true);

/// Eval-mode embeddings of one batch (student on View1, or student|teacher).
template <typename T>
DenseMatrix embed(ModelParams<T>& params, const Batch& batch, const TrainConfig& cfg);

/// Embeds every batch and scatters rows back to global ids.
template <typename T>
DenseMatrix embed_batches(ModelParams<T>& params, const std::vector<Batch>& batches, int num_nodes,
                          const TrainConfig& cfg);

struct HistoryRow {
  int epoch = 0;
  double loss = 0.0;
  double val_acc = -1.0;  // negative when the epoch was not probed
};

template <typename T>
struct TrainResult {
  ModelParams<T> best;
  ModelParams<T> last;
  int best_epoch = 0;
  double best_val_acc = -1.0;
  std::vector<HistoryRow> history;
};

/// Epoch loop over prepared batches. With shuffle, batch order is redrawn
/// every epoch from the "batch-order" substream. Validation probes run every
/// eval_every epochs and at the final epoch.
template <typename T>
TrainResult<T> train_batches(const Graph& g, std::vector<Batch>& batches, const TrainConfig& cfg, bool shuffle);

/// Full-batch training on the whole graph.
template <typename T>
TrainResult<T> train(const Graph& g, const AugSpec& spec, const TrainConfig& cfg);

void write_history(const std::vector<HistoryRow>& history, const std::filesystem::path& path);

}  // namespace selfgnn
