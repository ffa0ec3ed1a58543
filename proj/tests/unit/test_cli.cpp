#include <gtest/gtest.h>

#include <sstream>

#include "selfgnn/checkpoint.hpp"
#include "selfgnn/cli.hpp"
#include "selfgnn/config.hpp"
#include "selfgnn/io.hpp"
#include "synthetic.hpp"
#include "tempdir.hpp"

using namespace selfgnn;
namespace st = selfgnn::testing;

namespace {

struct CliRun {
  int code;
  std::string out;
  std::string err;
};

CliRun cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    st::CitationSpec spec;
    spec.nodes = 60;
    spec.features = 16;
    save_graph_bundle(st::citation_graph(spec), data_.path());
  }

  std::vector<std::string> base(const std::string& out) const {
    return {"--data", data_.path().string(), "--out", (work_ / out).string(), "--set", "train.epochs=3", "--set",
            "model.layers=8,4", "--set", "model.predictor_hidden=8", "--set", "train.eval_every=2"};
  }

  std::vector<std::string> with(std::vector<std::string> a, std::initializer_list<std::string> more) const {
    a.insert(a.end(), more);
    return a;
  }

  st::TempDir data_{"data"};
  st::TempDir work_{"work"};
};

std::size_t count_lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

TEST(Config, RoundTripThroughText) {
  RunConfig a;
  a.set("diffusion.alpha", "0.2");
  a.set("model.layers", "64,32");
  a.set("train.symmetric", "true");
  a.set("aug.variant", "heat");
  a.set("seed", "12");
  RunConfig b;
  b.apply_text(a.to_text(), "snapshot");
  EXPECT_EQ(b.to_text(), a.to_text());
  EXPECT_EQ(b.train.seed, 12u);
  EXPECT_EQ(b.train.model.layers, (std::vector<int>{64, 32}));
}

TEST(Config, CommentsAndBlankLines) {
  RunConfig c;
  c.apply_text("# header\n\n  train.lr = 0.5  \n   # indented comment\n", "inline");
  EXPECT_EQ(c.train.lr, 0.5);
}

TEST(Config, UnknownKeyAndBadValue) {
  RunConfig c;
  EXPECT_THROW(c.set("train.learning_rate", "1"), ConfigError);
  EXPECT_THROW(c.set("train.lr", "fast"), ConfigError);
  EXPECT_THROW(c.apply_text("train.lr 0.1\n", "inline"), ConfigError);
  c.set("diffusion.alpha", "0");
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Config, EveryKeyAppearsInSnapshot) {
  const std::string text = RunConfig{}.to_text();
  for (const auto& k : RunConfig::keys()) EXPECT_NE(text.find(k + " = "), std::string::npos) << k;
}

TEST(Checkpoint, RoundTripBothPrecisions) {
  ModelConfig mc;
  mc.input_dim = 5;
  mc.layers = {6, 3};
  mc.predictor_hidden = 4;
  mc.projector = true;
  mc.projector_hidden = 4;
  st::TempDir dir("ckpt");
  auto a = init_params<float>(mc, 1);
  a.student.encoder.layers[0].bn.running_var.setConstant(2.5f);
  save_params(dir / "a.sgnn", a);
  auto b = init_params<float>(mc, 2);
  load_params(dir / "a.sgnn", b);
  EXPECT_EQ(to_sections(b).size(), to_sections(a).size());
  EXPECT_EQ(b.student.encoder.layers[0].weight, a.student.encoder.layers[0].weight);
  EXPECT_EQ(b.student.encoder.layers[0].bn.running_var, a.student.encoder.layers[0].bn.running_var);
  EXPECT_EQ(b.teacher.projector->w2, a.teacher.projector->w2);

  auto d = init_params<double>(mc, 3);
  save_params(dir / "d.sgnn", d);
  auto e = init_params<double>(mc, 4);
  load_params(dir / "d.sgnn", e);
  EXPECT_EQ(e.student.predictor.w1, d.student.predictor.w1);
}

TEST(Checkpoint, RejectsMismatches) {
  ModelConfig mc;
  mc.input_dim = 5;
  mc.layers = {6, 3};
  mc.predictor_hidden = 4;
  st::TempDir dir("ckpt");
  auto a = init_params<double>(mc, 1);
  save_params(dir / "a.sgnn", a);
  mc.layers = {7, 3};
  auto wrong = init_params<double>(mc, 1);
  EXPECT_THROW(load_params(dir / "a.sgnn", wrong), ConfigError);
  io::write_text(dir / "bad.sgnn", "NOTACKPT");
  EXPECT_THROW(read_checkpoint(dir / "bad.sgnn"), DataError);
}

TEST_F(CliTest, MissingDatasetIsExitTwo) {
  const auto r = cli({"train", "--data", "/nonexistent/selfgnn", "--out", (work_ / "x").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(count_lines(r.err), 1u);
}

TEST_F(CliTest, ConfigErrorIsExitOne) {
  EXPECT_EQ(cli(with(base("x"), {"--set", "no.such.key=1", "train"})).code, 1);
  EXPECT_EQ(cli(with(base("x"), {"--set", "train.tau=2", "train"})).code, 1);
  EXPECT_EQ(cli({"frobnicate"}).code, 1);
}

TEST_F(CliTest, NumericFailureIsExitThree) {
  const auto r = cli(with(base("x"), {"--precision", "f32", "--set", "train.lr=1e30", "--set", "train.epochs=20", "train"}));
  EXPECT_EQ(r.code, 3) << r.err;
}

TEST_F(CliTest, TrainTwiceIdenticalHistory) {
  ASSERT_EQ(cli(with(base("a"), {"train"})).code, 0);
  ASSERT_EQ(cli(with(base("b"), {"train"})).code, 0);
  EXPECT_EQ(io::read_text(work_ / "a/history.tsv"), io::read_text(work_ / "b/history.tsv"));
  EXPECT_EQ(io::read_text(work_ / "a/checkpoint.sgnn"), io::read_text(work_ / "b/checkpoint.sgnn"));
  EXPECT_EQ(count_lines(io::read_text(work_ / "a/history.tsv")), 4u);
}

TEST_F(CliTest, ResolvedConfigReproducesRun) {
  ASSERT_EQ(cli(with(base("a"), {"--seed", "5", "--set", "diffusion.alpha=0.2", "train"})).code, 0);
  const auto cfg = (work_ / "a/resolved.cfg").string();
  ASSERT_EQ(cli({"--config", cfg, "--out", (work_ / "b").string(), "train"}).code, 0);
  EXPECT_EQ(io::read_text(work_ / "a/history.tsv"), io::read_text(work_ / "b/history.tsv"));
  EXPECT_EQ(io::read_text(work_ / "a/checkpoint.sgnn"), io::read_text(work_ / "b/checkpoint.sgnn"));
}

TEST_F(CliTest, TrainEmbedEvaluate) {
  ASSERT_EQ(cli(with(base("a"), {"train"})).code, 0);
  ASSERT_EQ(cli(with(base("a"), {"embed"})).code, 0);
  const auto emb = read_matrix_tsv(work_ / "a/embeddings.tsv");
  EXPECT_EQ(emb.rows(), 60);
  EXPECT_EQ(emb.cols(), 4);
  ASSERT_EQ(cli(with(base("a"), {"evaluate"})).code, 0);
  const std::string report = io::read_text(work_ / "a/report.tsv");
  EXPECT_EQ(count_lines(report), 3u);
  EXPECT_NE(report.find("\tA\t"), std::string::npos);
  EXPECT_NE(report.find("\tB\t"), std::string::npos);
  EXPECT_NE(report.find("\tNA\n"), std::string::npos);
}

TEST_F(CliTest, ReportMatchesStepwisePipeline) {
  ASSERT_EQ(cli(with(base("a"), {"report"})).code, 0);
  ASSERT_EQ(cli(with(base("b"), {"train"})).code, 0);
  ASSERT_EQ(cli(with(base("b"), {"embed"})).code, 0);
  EXPECT_EQ(io::read_text(work_ / "a/embeddings.tsv"), io::read_text(work_ / "b/embeddings.tsv"));
}

TEST_F(CliTest, AblateSplitPermRowCount) {
  ASSERT_EQ(cli(with(base("a"), {"ablate", "--what", "split-perm", "--trials", "5"})).code, 0);
  const std::string t = io::read_text(work_ / "a/ablation.tsv");
  EXPECT_EQ(count_lines(t), 7u);  // header + baseline + 5 permutations
  EXPECT_NE(t.find("\tsplit-perm-5\t"), std::string::npos);
}

TEST_F(CliTest, AblateProjection) {
  ASSERT_EQ(cli(with(base("a"), {"ablate", "--what", "projection"})).code, 0);
  const std::string t = io::read_text(work_ / "a/ablation.tsv");
  EXPECT_EQ(count_lines(t), 3u);
  EXPECT_NE(t.find("ppr-projector"), std::string::npos);
}

TEST_F(CliTest, ClusterModeWritesPartition) {
  ASSERT_EQ(cli(with(base("a"), {"--clusters", "4", "--batches", "2", "train"})).code, 0);
  EXPECT_EQ(count_lines(io::read_text(work_ / "a/partition.tsv")), 60u);
  ASSERT_EQ(cli(with(base("b"), {"--import-partition", (work_ / "a/partition.tsv").string(), "--batches", "2", "train"}))
                .code,
            0);
  EXPECT_EQ(io::read_text(work_ / "a/history.tsv"), io::read_text(work_ / "b/history.tsv"));
}

TEST_F(CliTest, AugmentOutputs) {
  ASSERT_EQ(cli(with(base("a"), {"augment"})).code, 0);
  const std::string op = io::read_text(work_ / "a/operator.tsv");
  EXPECT_EQ(op.rfind("# ", 0), 0u);
  EXPECT_NE(op.find("diffusion.alpha=0.15"), std::string::npos);
  ASSERT_EQ(cli(with(base("b"), {"augment", "--feature", "split"})).code, 0);
  EXPECT_EQ(read_matrix_tsv(work_ / "b/view1.tsv").cols(), 8);
  EXPECT_EQ(read_matrix_tsv(work_ / "b/view2.tsv").cols(), 8);
}

TEST_F(CliTest, ThreadsFromEnvironment) {
  ::setenv("SELFGNN_THREADS", "2", 1);
  ASSERT_EQ(cli(with(base("a"), {"train"})).code, 0);
  ::unsetenv("SELFGNN_THREADS");
  EXPECT_NE(io::read_text(work_ / "a/resolved.cfg").find("threads = 2"), std::string::npos);
  ASSERT_EQ(cli(with(base("b"), {"train"})).code, 0);
  EXPECT_EQ(io::read_text(work_ / "a/history.tsv"), io::read_text(work_ / "b/history.tsv"));
}
