#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "selfgnn/model.hpp"

namespace selfgnn {

enum class DType : std::uint8_t { kF32 = 1, kF64 = 2 };

/// One named tensor as stored on disk. Values are widened to double.
struct CheckpointSection {
  std::string name;
  DType dtype = DType::kF64;
  std::vector<std::uint64_t> dims;
  std::vector<double> values;
};

inline constexpr char kCheckpointMagic[8] = {'S', 'G', 'N', 'N', 'C', 'K', 'P', 'T'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<CheckpointSection> read_checkpoint(const std::filesystem::path& path);
void write_checkpoint(const std::filesystem::path& path, const std::vector<CheckpointSection>& sections);

/// Serializes every student and teacher tensor, running statistics included.
template <typename T>
std::vector<CheckpointSection> to_sections(ModelParams<T>& params);

/// Copies sections into params, which must already have the right structure.
/// Every parameter must be present with a matching shape.
template <typename T>
void from_sections(const std::vector<CheckpointSection>& sections, ModelParams<T>& params);

template <typename T>
void save_params(const std::filesystem::path& path, ModelParams<T>& params) {
  write_checkpoint(path, to_sections(params));
}

template <typename T>
void load_params(const std::filesystem::path& path, ModelParams<T>& params) {
  from_sections(read_checkpoint(path), params);
}

}  // namespace selfgnn
