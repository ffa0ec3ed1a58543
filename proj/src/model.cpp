#include "selfgnn/model.hpp"

#include <cmath>

namespace selfgnn {

void ModelConfig::validate() const {
  if (input_dim < 1) throw ConfigError("model: input dimension must be >= 1");
  validate_widths();
}

void ModelConfig::validate_widths() const {
  if (layers.empty()) throw ConfigError("model.layers must list at least one width");
  for (int w : layers) {
    if (w < 1) throw ConfigError("model.layers: widths must be >= 1");
  }
  if (predictor_hidden < 1) throw ConfigError("model.predictor_hidden must be >= 1");
  if (projector && projector_hidden < 1) throw ConfigError("model.projector_hidden must be >= 1");
}

double glorot_limit(int fan_in, int fan_out) { return std::sqrt(6.0 / static_cast<double>(fan_in + fan_out)); }

namespace {

template <typename T>
ad::Matrix<T> glorot(int fan_in, int fan_out, Rng& rng) {
  const double limit = glorot_limit(fan_in, fan_out);
  ad::Matrix<T> w(fan_in, fan_out);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = static_cast<T>(rng.uniform(-limit, limit));
  return w;
}

template <typename T>
ad::Matrix<T> slope_init() {
  return ad::Matrix<T>::Constant(1, 1, T(0.25));
}

template <typename T>
MlpParams<T> init_mlp(int width, int hidden, Rng& rng) {
  MlpParams<T> m;
  m.w1 = glorot<T>(width, hidden, rng);
  m.b1 = ad::Matrix<T>::Zero(1, hidden);
  m.bn = ad::BatchNormState<T>::init(hidden);
  m.slope = slope_init<T>();
  m.w2 = glorot<T>(hidden, width, rng);
  m.b2 = ad::Matrix<T>::Zero(1, width);
  return m;
}

template <typename T>
ad::Tensor<T> activate(ad::Tensor<T> x, ad::Matrix<T>& slope, Activation act, ParamBinder<T>& binder) {
  if (act == Activation::kRelu) return ad::relu(x);
  return ad::prelu(x, binder.bind(slope));
}

template <typename T>
void visit_bn(ad::BatchNormState<T>& bn, const std::string& prefix, const ParamVisitor<T>& fn, bool buffers) {
  fn(prefix + "gamma", bn.gamma);
  fn(prefix + "beta", bn.beta);
  if (buffers) {
    fn(prefix + "running_mean", bn.running_mean);
    fn(prefix + "running_var", bn.running_var);
  }
}

}  // namespace

template <typename T>
void visit_encoder(EncoderParams<T>& p, const std::string& prefix, const ParamVisitor<T>& fn, bool buffers) {
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    const std::string base = prefix + std::to_string(l) + ".";
    auto& layer = p.layers[l];
    fn(base + "W", layer.weight);
    visit_bn(layer.bn, base + "bn.", fn, buffers);
    fn(base + "act.slope", layer.slope);
  }
}

template <typename T>
void visit_mlp(MlpParams<T>& p, const std::string& prefix, const ParamVisitor<T>& fn, bool buffers) {
  fn(prefix + "fc1.W", p.w1);
  fn(prefix + "fc1.b", p.b1);
  visit_bn(p.bn, prefix + "bn.", fn, buffers);
  fn(prefix + "act.slope", p.slope);
  fn(prefix + "fc2.W", p.w2);
  fn(prefix + "fc2.b", p.b2);
}

template <typename T>
void visit_student(StudentParams<T>& p, const ParamVisitor<T>& fn, bool buffers) {
  visit_encoder(p.encoder, "enc.", fn, buffers);
  visit_mlp(p.predictor, "pred.", fn, buffers);
  if (p.projector) visit_mlp(*p.projector, "proj.", fn, buffers);
}

template <typename T>
void visit_teacher(TeacherParams<T>& p, const ParamVisitor<T>& fn, bool buffers) {
  visit_encoder(p.encoder, "enc.", fn, buffers);
  if (p.projector) visit_mlp(*p.projector, "proj.", fn, buffers);
}

template <typename T>
void visit_all(ModelParams<T>& p, const ParamVisitor<T>& fn) {
  visit_student<T>(p.student, [&](const std::string& n, ad::Matrix<T>& m) { fn("student." + n, m); }, true);
  visit_teacher<T>(p.teacher, [&](const std::string& n, ad::Matrix<T>& m) { fn("teacher." + n, m); }, true);
}

template <typename T>
ModelParams<T> init_params(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng = Rng::substream(seed, "init");
  ModelParams<T> p;
  int fan_in = cfg.input_dim;
  for (int width : cfg.layers) {
    EncoderLayer<T> layer;
    layer.weight = glorot<T>(fan_in, width, rng);
    layer.bn = ad::BatchNormState<T>::init(width);
    layer.slope = slope_init<T>();
    p.student.encoder.layers.push_back(std::move(layer));
    fan_in = width;
  }
  const int d = cfg.embedding_dim();
  if (cfg.projector) p.student.projector = init_mlp<T>(d, cfg.projector_hidden, rng);
  p.student.predictor = init_mlp<T>(d, cfg.predictor_hidden, rng);
  p.teacher.encoder = p.student.encoder;
  p.teacher.projector = p.student.projector;
  return p;
}

namespace {

/// Runs every layer; `first` computes X W for the first layer's weight.
template <typename T, typename First>
ad::Tensor<T> encoder_layers(EncoderParams<T>& p, const ad::FixedOperator& h, First first, const ForwardOptions& opt,
                             Rng& rng, ParamBinder<T>& binder) {
  ad::Tensor<T> cur{};
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    auto& layer = p.layers[l];
    // H (X W) costs less than (H X) W whenever the layer narrows the width.
    auto xw = l == 0 ? first(binder.bind(layer.weight)) : ad::matmul(cur, binder.bind(layer.weight));
    auto hx = ad::spmm_fixed(h, xw);
    auto bn = ad::batch_norm(hx, binder.bind(layer.bn.gamma), binder.bind(layer.bn.beta), layer.bn, opt.mode);
    auto act = activate(bn, layer.slope, opt.activation, binder);
    cur = ad::dropout(act, opt.dropout, opt.mode, rng);
  }
  return cur;
}

template <typename T>
void check_input(const EncoderParams<T>& p, Eigen::Index width) {
  if (p.layers.empty()) throw ConfigError("encoder_forward: encoder has no layers");
  if (width != p.layers.front().weight.rows()) {
    throw ConfigError("encoder_forward: input width " + std::to_string(width) + " != encoder fan-in " +
                      std::to_string(p.layers.front().weight.rows()));
  }
}

}  // namespace

template <typename T>
ad::Tensor<T> encoder_forward(EncoderParams<T>& p, const ad::FixedOperator& h, ad::Tensor<T> x,
                              const ForwardOptions& opt, Rng& rng, ParamBinder<T>& binder) {
  check_input(p, x.cols());
  return encoder_layers(p, h, [&](ad::Tensor<T> w) { return ad::matmul(x, w); }, opt, rng, binder);
}

template <typename T>
ad::Tensor<T> encoder_forward(EncoderParams<T>& p, const ad::FixedOperator& h, const ad::FixedOperator& x,
                              const ForwardOptions& opt, Rng& rng, ParamBinder<T>& binder) {
  check_input(p, x.forward.cols());
  return encoder_layers(p, h, [&](ad::Tensor<T> w) { return ad::spmm_fixed(x, w); }, opt, rng, binder);
}

template <typename T>
ad::Tensor<T> mlp_forward(MlpParams<T>& p, ad::Tensor<T> z, const ForwardOptions& opt, ParamBinder<T>& binder) {
  if (z.cols() != p.w1.rows()) {
    throw ConfigError("mlp_forward: input width " + std::to_string(z.cols()) + " != " + std::to_string(p.w1.rows()));
  }
  auto h = ad::add_bias(ad::matmul(z, binder.bind(p.w1)), binder.bind(p.b1));
  h = ad::batch_norm(h, binder.bind(p.bn.gamma), binder.bind(p.bn.beta), p.bn, opt.mode);
  h = activate(h, p.slope, opt.activation, binder);
  return ad::add_bias(ad::matmul(h, binder.bind(p.w2)), binder.bind(p.b2));
}

template <typename T>
ad::Tensor<T> projector_forward(std::optional<MlpParams<T>>& p, ad::Tensor<T> z, const ForwardOptions& opt,
                                ParamBinder<T>& binder) {
  if (!p) throw ConfigError("projector_forward: projection head is disabled");
  return mlp_forward(*p, z, opt, binder);
}

template <typename T>
void ema_update(StudentParams<T>& theta, TeacherParams<T>& phi, double tau) {
  if (!(tau >= 0.0 && tau <= 1.0)) throw ConfigError("ema_update: tau must be in [0, 1]");
  if (theta.projector.has_value() != phi.projector.has_value()) throw ConfigError("ema_update: projector mismatch");
  std::vector<ad::Matrix<T>*> src;
  visit_encoder<T>(theta.encoder, "", [&](const std::string&, ad::Matrix<T>& m) { src.push_back(&m); });
  if (theta.projector) visit_mlp<T>(*theta.projector, "", [&](const std::string&, ad::Matrix<T>& m) { src.push_back(&m); });
  std::size_t k = 0;
  const T a = static_cast<T>(tau);
  const T b = static_cast<T>(1.0 - tau);
  auto blend = [&](const std::string& name, ad::Matrix<T>& m) {
    if (k >= src.size()) throw ConfigError("ema_update: teacher has more parameters than student");
    const ad::Matrix<T>& s = *src[k++];
    if (s.rows() != m.rows() || s.cols() != m.cols()) throw ConfigError("ema_update: shape mismatch at " + name);
    m = a * m + b * s;
  };
  visit_encoder<T>(phi.encoder, "", blend);
  if (phi.projector) visit_mlp<T>(*phi.projector, "", blend);
  if (k != src.size()) throw ConfigError("ema_update: teacher has fewer parameters than student");
}

#define SELFGNN_INSTANTIATE_MODEL(T)                                                                             \
  template void visit_encoder<T>(EncoderParams<T>&, const std::string&, const ParamVisitor<T>&, bool);           \
  template void visit_mlp<T>(MlpParams<T>&, const std::string&, const ParamVisitor<T>&, bool);                   \
  template void visit_student<T>(StudentParams<T>&, const ParamVisitor<T>&, bool);                               \
  template void visit_teacher<T>(TeacherParams<T>&, const ParamVisitor<T>&, bool);                               \
  template void visit_all<T>(ModelParams<T>&, const ParamVisitor<T>&);                                           \
  template ModelParams<T> init_params<T>(const ModelConfig&, std::uint64_t);                                     \
  template ad::Tensor<T> encoder_forward<T>(EncoderParams<T>&, const ad::FixedOperator&, ad::Tensor<T>,          \
                                            const ForwardOptions&, Rng&, ParamBinder<T>&);                       \
  template ad::Tensor<T> encoder_forward<T>(EncoderParams<T>&, const ad::FixedOperator&, const ad::FixedOperator&, \
                                            const ForwardOptions&, Rng&, ParamBinder<T>&);                       \
  template ad::Tensor<T> mlp_forward<T>(MlpParams<T>&, ad::Tensor<T>, const ForwardOptions&, ParamBinder<T>&);   \
  template ad::Tensor<T> projector_forward<T>(std::optional<MlpParams<T>>&, ad::Tensor<T>, const ForwardOptions&, \
                                              ParamBinder<T>&);                                                  \
  template void ema_update<T>(StudentParams<T>&, TeacherParams<T>&, double);

SELFGNN_INSTANTIATE_MODEL(float)
SELFGNN_INSTANTIATE_MODEL(double)

}  // namespace selfgnn
