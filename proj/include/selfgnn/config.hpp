#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "selfgnn/cluster.hpp"
#include "selfgnn/trainer.hpp"

namespace selfgnn {

enum class Precision { kF32, kF64 };
enum class RunMode { kFull, kCluster };

/// Everything a run needs. Serialized as flat "key = value" lines.
struct RunConfig {
  std::string data;
  std::string out = "out";
  std::uint64_t seed = 0;
  Precision precision = Precision::kF32;
  int threads = 1;
  RunMode mode = RunMode::kFull;
  AugSpec aug;
  TrainConfig train;
  ClusterConfig cluster;
  std::uint64_t split_seed = 0;  // used when the bundle has no split.tsv
  bool report_wall_time = false;

  /// Sets one dotted key. Unknown keys and malformed values throw ConfigError.
  void set(const std::string& key, const std::string& value);

  /// Applies a config file: '#' comments, blank lines, "key = value".
  void apply_file(const std::filesystem::path& path);
  void apply_text(const std::string& text, const std::string& origin);

  /// Every key with its current value, in a fixed order. Feeding the output
  /// back through apply_text reproduces this config exactly.
  std::string to_text() const;

  void validate() const;

  static const std::vector<std::string>& keys();
};

}  // namespace selfgnn
