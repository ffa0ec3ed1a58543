#include "selfgnn/config.hpp"

#include <charconv>
#include <functional>
#include <map>
#include <sstream>

#include "selfgnn/errors.hpp"
#include "selfgnn/io.hpp"

namespace selfgnn {

namespace {

double as_double(const std::string& key, const std::string& v) {
  try {
    return io::parse_double(v, key);
  } catch (const DataError& e) {
    throw ConfigError(e.what());
  }
}

long long as_int(const std::string& key, const std::string& v) {
  try {
    return io::parse_int(v, key);
  } catch (const DataError& e) {
    throw ConfigError(e.what());
  }
}

int as_int32(const std::string& key, const std::string& v) {
  const long long x = as_int(key, v);
  if (x < std::numeric_limits<int>::min() || x > std::numeric_limits<int>::max()) {
    throw ConfigError(key + ": value out of range");
  }
  return static_cast<int>(x);
}

std::uint64_t as_u64(const std::string& key, const std::string& v) {
  std::uint64_t x = 0;
  const auto* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, x);
  if (ec != std::errc() || p != end || v.empty()) throw ConfigError(key + ": expected an unsigned integer, got '" + v + "'");
  return x;
}

bool as_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError(key + ": expected true or false, got '" + v + "'");
}

template <typename E>
E as_enum(const std::string& key, const std::string& v, std::initializer_list<std::pair<const char*, E>> options) {
  std::string names;
  for (const auto& [name, e] : options) {
    if (v == name) return e;
    names += names.empty() ? name : std::string("|") + name;
  }
  throw ConfigError(key + ": expected one of " + names + ", got '" + v + "'");
}

std::vector<int> as_widths(const std::string& key, const std::string& v) {
  std::vector<int> out;
  std::stringstream ss(v);
  std::string tok;
  while (std::getline(ss, tok, ',')) out.push_back(as_int32(key, std::string(io::trim(tok))));
  if (out.empty()) throw ConfigError(key + ": expected a comma-separated list of widths");
  return out;
}

const char* name(Precision p) { return p == Precision::kF32 ? "f32" : "f64"; }
const char* name(RunMode m) { return m == RunMode::kFull ? "full" : "cluster"; }
const char* name(Pairing p) { return p == Pairing::kStudentOriginal ? "student_original" : "student_augmented"; }
const char* name(SolverKind s) { return s == SolverKind::kDense ? "dense" : "iterative"; }
const char* name(IsolatedPolicy p) { return p == IsolatedPolicy::kZero ? "zero" : "reject"; }
const char* name(ad::LossMode m) { return m == ad::LossMode::kMatrix ? "matrix" : "per_node"; }
const char* name(EmbedMode m) { return m == EmbedMode::kStudent ? "student" : "concat"; }
const char* name(Activation a) { return a == Activation::kPrelu ? "prelu" : "relu"; }
const char* name(SparsifyMode m) {
  switch (m) {
    case SparsifyMode::kNone: return "none";
    case SparsifyMode::kEpsilon: return "epsilon";
    case SparsifyMode::kTopK: return "top_k";
  }
  return "?";
}
const char* name(bool b) { return b ? "true" : "false"; }

std::string widths_text(const std::vector<int>& w) {
  std::string s;
  for (std::size_t i = 0; i < w.size(); ++i) s += (i ? "," : "") + std::to_string(w[i]);
  return s;
}

struct Field {
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

const std::vector<std::pair<std::string, Field>>& fields() {
  using R = RunConfig;
  using S = const std::string&;
  static const std::vector<std::pair<std::string, Field>> table = {
      {"data", {[](R& c, S, S v) { c.data = v; }, [](const R& c) { return c.data; }}},
      {"out", {[](R& c, S, S v) { c.out = v; }, [](const R& c) { return c.out; }}},
      {"seed", {[](R& c, S k, S v) { c.seed = as_u64(k, v); }, [](const R& c) { return std::to_string(c.seed); }}},
      {"precision",
       {[](R& c, S k, S v) {
          c.precision = as_enum<Precision>(k, v, {{"f32", Precision::kF32}, {"f64", Precision::kF64}});
        },
        [](const R& c) { return std::string(name(c.precision)); }}},
      {"threads",
       {[](R& c, S k, S v) { c.threads = as_int32(k, v); }, [](const R& c) { return std::to_string(c.threads); }}},
      {"mode",
       {[](R& c, S k, S v) { c.mode = as_enum<RunMode>(k, v, {{"full", RunMode::kFull}, {"cluster", RunMode::kCluster}}); },
        [](const R& c) { return std::string(name(c.mode)); }}},
      {"aug.variant",
       {[](R& c, S, S v) { c.aug.variant = parse_aug_variant(v); }, [](const R& c) { return to_string(c.aug.variant); }}},
      {"aug.pairing",
       {[](R& c, S k, S v) {
          c.aug.pairing = as_enum<Pairing>(
              k, v, {{"student_original", Pairing::kStudentOriginal}, {"student_augmented", Pairing::kStudentAugmented}});
        },
        [](const R& c) { return std::string(name(c.aug.pairing)); }}},
      {"diffusion.alpha",
       {[](R& c, S k, S v) { c.aug.diffusion.alpha = as_double(k, v); },
        [](const R& c) { return io::format_double(c.aug.diffusion.alpha); }}},
      {"diffusion.t",
       {[](R& c, S k, S v) { c.aug.diffusion.t = as_double(k, v); },
        [](const R& c) { return io::format_double(c.aug.diffusion.t); }}},
      {"diffusion.beta",
       {[](R& c, S k, S v) { c.aug.diffusion.beta = as_double(k, v); },
        [](const R& c) { return io::format_double(c.aug.diffusion.beta); }}},
      {"diffusion.solver",
       {[](R& c, S k, S v) {
          c.aug.diffusion.solver =
              as_enum<SolverKind>(k, v, {{"dense", SolverKind::kDense}, {"iterative", SolverKind::kIterative}});
        },
        [](const R& c) { return std::string(name(c.aug.diffusion.solver)); }}},
      {"diffusion.tol",
       {[](R& c, S k, S v) { c.aug.diffusion.tol = as_double(k, v); },
        [](const R& c) { return io::format_double(c.aug.diffusion.tol); }}},
      {"diffusion.max_terms",
       {[](R& c, S k, S v) { c.aug.diffusion.max_terms = as_int32(k, v); },
        [](const R& c) { return std::to_string(c.aug.diffusion.max_terms); }}},
      {"diffusion.sparsify",
       {[](R& c, S k, S v) {
          c.aug.diffusion.sparsify = as_enum<SparsifyMode>(
              k, v, {{"none", SparsifyMode::kNone}, {"epsilon", SparsifyMode::kEpsilon}, {"top_k", SparsifyMode::kTopK}});
        },
        [](const R& c) { return std::string(name(c.aug.diffusion.sparsify)); }}},
      {"diffusion.epsilon",
       {[](R& c, S k, S v) { c.aug.diffusion.epsilon = as_double(k, v); },
        [](const R& c) { return io::format_double(c.aug.diffusion.epsilon); }}},
      {"diffusion.top_k",
       {[](R& c, S k, S v) { c.aug.diffusion.top_k = as_int32(k, v); },
        [](const R& c) { return std::to_string(c.aug.diffusion.top_k); }}},
      {"diffusion.isolated",
       {[](R& c, S k, S v) {
          c.aug.diffusion.isolated =
              as_enum<IsolatedPolicy>(k, v, {{"zero", IsolatedPolicy::kZero}, {"reject", IsolatedPolicy::kReject}});
        },
        [](const R& c) { return std::string(name(c.aug.diffusion.isolated)); }}},
      {"diffusion.renormalize",
       {[](R& c, S k, S v) { c.aug.diffusion.renormalize = as_bool(k, v); },
        [](const R& c) { return std::string(name(c.aug.diffusion.renormalize)); }}},
      {"train.epochs",
       {[](R& c, S k, S v) { c.train.epochs = as_int32(k, v); }, [](const R& c) { return std::to_string(c.train.epochs); }}},
      {"train.lr",
       {[](R& c, S k, S v) { c.train.lr = as_double(k, v); }, [](const R& c) { return io::format_double(c.train.lr); }}},
      {"train.dropout",
       {[](R& c, S k, S v) { c.train.dropout = as_double(k, v); },
        [](const R& c) { return io::format_double(c.train.dropout); }}},
      {"train.tau",
       {[](R& c, S k, S v) { c.train.tau = as_double(k, v); }, [](const R& c) { return io::format_double(c.train.tau); }}},
      {"train.loss",
       {[](R& c, S k, S v) {
          c.train.loss = as_enum<ad::LossMode>(k, v, {{"matrix", ad::LossMode::kMatrix}, {"per_node", ad::LossMode::kPerNode}});
        },
        [](const R& c) { return std::string(name(c.train.loss)); }}},
      {"train.symmetric",
       {[](R& c, S k, S v) { c.train.symmetric = as_bool(k, v); },
        [](const R& c) { return std::string(name(c.train.symmetric)); }}},
      {"train.eval_every",
       {[](R& c, S k, S v) { c.train.eval_every = as_int32(k, v); },
        [](const R& c) { return std::to_string(c.train.eval_every); }}},
      {"train.embed",
       {[](R& c, S k, S v) {
          c.train.embed = as_enum<EmbedMode>(k, v, {{"student", EmbedMode::kStudent}, {"concat", EmbedMode::kConcat}});
        },
        [](const R& c) { return std::string(name(c.train.embed)); }}},
      {"model.layers",
       {[](R& c, S k, S v) { c.train.model.layers = as_widths(k, v); },
        [](const R& c) { return widths_text(c.train.model.layers); }}},
      {"model.predictor_hidden",
       {[](R& c, S k, S v) { c.train.model.predictor_hidden = as_int32(k, v); },
        [](const R& c) { return std::to_string(c.train.model.predictor_hidden); }}},
      {"model.activation",
       {[](R& c, S k, S v) {
          c.train.model.activation = as_enum<Activation>(k, v, {{"prelu", Activation::kPrelu}, {"relu", Activation::kRelu}});
        },
        [](const R& c) { return std::string(name(c.train.model.activation)); }}},
      {"model.projector",
       {[](R& c, S k, S v) { c.train.model.projector = as_bool(k, v); },
        [](const R& c) { return std::string(name(c.train.model.projector)); }}},
      {"model.projector_hidden",
       {[](R& c, S k, S v) { c.train.model.projector_hidden = as_int32(k, v); },
        [](const R& c) { return std::to_string(c.train.model.projector_hidden); }}},
      {"probe.l2",
       {[](R& c, S k, S v) { c.train.probe.l2 = as_double(k, v); },
        [](const R& c) { return io::format_double(c.train.probe.l2); }}},
      {"probe.max_iter",
       {[](R& c, S k, S v) { c.train.probe.max_iter = as_int32(k, v); },
        [](const R& c) { return std::to_string(c.train.probe.max_iter); }}},
      {"probe.lr",
       {[](R& c, S k, S v) { c.train.probe.lr = as_double(k, v); },
        [](const R& c) { return io::format_double(c.train.probe.lr); }}},
      {"probe.tol",
       {[](R& c, S k, S v) { c.train.probe.tol = as_double(k, v); },
        [](const R& c) { return io::format_double(c.train.probe.tol); }}},
      {"probe.folds",
       {[](R& c, S k, S v) { c.train.probe.folds = as_int32(k, v); },
        [](const R& c) { return std::to_string(c.train.probe.folds); }}},
      {"probe.seed",
       {[](R& c, S k, S v) { c.train.probe.seed = as_u64(k, v); },
        [](const R& c) { return std::to_string(c.train.probe.seed); }}},
      {"split.seed",
       {[](R& c, S k, S v) { c.split_seed = as_u64(k, v); }, [](const R& c) { return std::to_string(c.split_seed); }}},
      {"cluster.k",
       {[](R& c, S k, S v) { c.cluster.clusters = as_int32(k, v); },
        [](const R& c) { return std::to_string(c.cluster.clusters); }}},
      {"cluster.b",
       {[](R& c, S k, S v) { c.cluster.batches = as_int32(k, v); },
        [](const R& c) { return std::to_string(c.cluster.batches); }}},
      {"cluster.partition",
       {[](R& c, S, S v) {
          if (v.empty()) {
            c.cluster.partition_file.reset();
          } else {
            c.cluster.partition_file = v;
          }
        },
        [](const R& c) { return c.cluster.partition_file ? c.cluster.partition_file->string() : std::string(); }}},
      {"report.wall_time",
       {[](R& c, S k, S v) { c.report_wall_time = as_bool(k, v); },
        [](const R& c) { return std::string(name(c.report_wall_time)); }}},
  };
  return table;
}

}  // namespace

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> k = [] {
    std::vector<std::string> out;
    for (const auto& [key, f] : fields()) out.push_back(key);
    return out;
  }();
  return k;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  for (const auto& [k, f] : fields()) {
    if (k == key) {
      f.set(*this, key, value);
      if (key == "seed") train.seed = seed;
      return;
    }
  }
  throw ConfigError("unknown config key '" + key + "'");
}

void RunConfig::apply_text(const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    if (!raw.empty() && raw.back() == '\r') raw.pop_back();
    auto line = io::trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string key(io::trim(line.substr(0, eq)));
    const std::string value(io::trim(line.substr(eq + 1)));
    try {
      set(key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

void RunConfig::apply_file(const std::filesystem::path& path) {
  std::string text;
  try {
    text = io::read_text(path);
  } catch (const DataError&) {
    throw ConfigError("cannot read config file " + path.string());
  }
  apply_text(text, path.string());
}

std::string RunConfig::to_text() const {
  std::ostringstream os;
  for (const auto& [key, f] : fields()) os << key << " = " << f.get(*this) << '\n';
  return os.str();
}

void RunConfig::validate() const {
  if (threads < 1) throw ConfigError("threads must be >= 1");
  aug.diffusion.validate();
  train.validate();
  train.model.validate_widths();
  if (cluster.clusters < 1) throw ConfigError("cluster.k must be >= 1");
  if (cluster.batches < 0) throw ConfigError("cluster.b must be >= 0");
  if (mode == RunMode::kCluster && cluster.resolved_batches() > cluster.clusters && !cluster.partition_file) {
    throw ConfigError("cluster.b must not exceed cluster.k");
  }
}

}  // namespace selfgnn
