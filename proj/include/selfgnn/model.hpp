#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "selfgnn/autodiff.hpp"
#include "selfgnn/rng.hpp"

namespace selfgnn {

enum class Activation { kPrelu, kRelu };

struct ModelConfig {
  int input_dim = 0;
  std::vector<int> layers{512, 128};
  int predictor_hidden = 512;
  Activation activation = Activation::kPrelu;
  bool projector = false;
  int projector_hidden = 512;

  int embedding_dim() const { return layers.empty() ? input_dim : layers.back(); }
  /// Checks widths and the input dimension.
  void validate() const;
  /// Checks widths only (the input dimension comes from the data).
  void validate_widths() const;
};

/// One graph-convolution block: H X W -> batch norm -> activation -> dropout.
template <typename T>
struct EncoderLayer {
  ad::Matrix<T> weight;  // fan_in x fan_out, no bias (batch norm's beta covers it)
  ad::BatchNormState<T> bn;
  ad::Matrix<T> slope;  // 1x1 PReLU slope; unused under ReLU
};

template <typename T>
struct EncoderParams {
  std::vector<EncoderLayer<T>> layers;
};

/// Linear -> batch norm -> activation -> Linear. Used for the predictor and
/// the optional projection head.
template <typename T>
struct MlpParams {
  ad::Matrix<T> w1, b1;
  ad::BatchNormState<T> bn;
  ad::Matrix<T> slope;
  ad::Matrix<T> w2, b2;
};

template <typename T>
struct StudentParams {
  EncoderParams<T> encoder;
  MlpParams<T> predictor;
  std::optional<MlpParams<T>> projector;
};

template <typename T>
struct TeacherParams {
  EncoderParams<T> encoder;
  std::optional<MlpParams<T>> projector;
};

template <typename T>
struct ModelParams {
  StudentParams<T> student;
  TeacherParams<T> teacher;
};

/// Named visit over learned parameters (not batch-norm running statistics).
template <typename T>
using ParamVisitor = std::function<void(const std::string& name, ad::Matrix<T>& value)>;

template <typename T>
void visit_encoder(EncoderParams<T>& p, const std::string& prefix, const ParamVisitor<T>& fn, bool buffers = false);
template <typename T>
void visit_mlp(MlpParams<T>& p, const std::string& prefix, const ParamVisitor<T>& fn, bool buffers = false);

/// Student parameters in a fixed order: encoder, predictor, projector.
template <typename T>
void visit_student(StudentParams<T>& p, const ParamVisitor<T>& fn, bool buffers = false);
/// Teacher parameters with the same names as the matching student entries.
template <typename T>
void visit_teacher(TeacherParams<T>& p, const ParamVisitor<T>& fn, bool buffers = false);
/// Everything, prefixed "student." / "teacher.", including running statistics.
template <typename T>
void visit_all(ModelParams<T>& p, const ParamVisitor<T>& fn);

/// Glorot-uniform weights, zero biases, PReLU slopes 0.25, batch norm at
/// gamma=1, beta=0. The teacher starts as an exact copy of the student.
template <typename T>
ModelParams<T> init_params(const ModelConfig& cfg, std::uint64_t seed);

/// Maps parameter matrices onto a tape. Trainable binders create
/// gradient-requiring leaves and remember them so gradients can be read back;
/// frozen binders create constants. A matrix bound twice reuses its leaf.
template <typename T>
class ParamBinder {
 public:
  ParamBinder(ad::Tape<T>& tape, bool trainable) : tape_(tape), trainable_(trainable) {}

  ad::Tensor<T> bind(ad::Matrix<T>& m) {
    if (auto it = index_.find(&m); it != index_.end()) return bound_[it->second].second;
    auto t = trainable_ ? tape_.leaf(m, true) : tape_.constant(m);
    index_.emplace(&m, bound_.size());
    bound_.emplace_back(&m, t);
    return t;
  }

  ad::Tape<T>& tape() { return tape_; }
  bool trainable() const { return trainable_; }
  const std::vector<std::pair<ad::Matrix<T>*, ad::Tensor<T>>>& bound() const { return bound_; }

 private:
  ad::Tape<T>& tape_;
  bool trainable_;
  std::unordered_map<const ad::Matrix<T>*, std::size_t> index_;
  std::vector<std::pair<ad::Matrix<T>*, ad::Tensor<T>>> bound_;
};

/// Per-call options for a forward pass.
struct ForwardOptions {
  ad::Mode mode = ad::Mode::kTrain;
  double dropout = 0.0;
  Activation activation = Activation::kPrelu;
};

template <typename T>
ad::Tensor<T> encoder_forward(EncoderParams<T>& p, const ad::FixedOperator& h, ad::Tensor<T> x,
                              const ForwardOptions& opt, Rng& rng, ParamBinder<T>& binder);

/// Same as encoder_forward for a constant input held in sparse form; the
/// first product X W runs through the CSR kernel (gradient reaches W only).
template <typename T>
ad::Tensor<T> encoder_forward(EncoderParams<T>& p, const ad::FixedOperator& h, const ad::FixedOperator& x,
                              const ForwardOptions& opt, Rng& rng, ParamBinder<T>& binder);

template <typename T>
ad::Tensor<T> mlp_forward(MlpParams<T>& p, ad::Tensor<T> z, const ForwardOptions& opt, ParamBinder<T>& binder);

template <typename T>
ad::Tensor<T> predictor_forward(MlpParams<T>& p, ad::Tensor<T> z, const ForwardOptions& opt, ParamBinder<T>& binder) {
  return mlp_forward(p, z, opt, binder);
}

/// Applies the projection head; throws ConfigError when it is disabled.
template <typename T>
ad::Tensor<T> projector_forward(std::optional<MlpParams<T>>& p, ad::Tensor<T> z, const ForwardOptions& opt,
                                ParamBinder<T>& binder);

/// phi <- tau * phi + (1 - tau) * theta over encoder (and projector) parameters.
template <typename T>
void ema_update(StudentParams<T>& theta, TeacherParams<T>& phi, double tau);

/// Glorot-uniform limit sqrt(6 / (fan_in + fan_out)).
double glorot_limit(int fan_in, int fan_out);

}  // namespace selfgnn
