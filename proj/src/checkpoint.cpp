#include "selfgnn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>

#include "selfgnn/errors.hpp"

namespace selfgnn {

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

class Writer {
 public:
  explicit Writer(const std::filesystem::path& path) : out_(path, std::ios::binary | std::ios::trunc) {
    if (!out_) throw DataError("cannot write checkpoint " + path.string());
  }
  template <typename V>
  void put(V v) {
    out_.write(reinterpret_cast<const char*>(&v), sizeof(V));
  }
  void bytes(const void* p, std::size_t n) { out_.write(static_cast<const char*>(p), static_cast<std::streamsize>(n)); }
  void finish(const std::filesystem::path& path) {
    out_.flush();
    if (!out_) throw DataError("failed writing checkpoint " + path.string());
  }

 private:
  std::ofstream out_;
};

class Reader {
 public:
  explicit Reader(const std::filesystem::path& path) : path_(path), in_(path, std::ios::binary) {
    if (!in_) throw DataError("cannot open checkpoint " + path.string());
  }
  template <typename V>
  V get() {
    V v{};
    bytes(&v, sizeof(V));
    return v;
  }
  void bytes(void* p, std::size_t n) {
    in_.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) throw DataError("truncated checkpoint " + path_.string());
  }
  bool at_end() { return in_.peek() == std::char_traits<char>::eof(); }

 private:
  std::filesystem::path path_;
  std::ifstream in_;
};

template <typename T>
constexpr DType dtype_of() {
  return sizeof(T) == 4 ? DType::kF32 : DType::kF64;
}

}  // namespace

void write_checkpoint(const std::filesystem::path& path, const std::vector<CheckpointSection>& sections) {
  Writer w(path);
  w.bytes(kCheckpointMagic, sizeof(kCheckpointMagic));
  w.put<std::uint32_t>(kCheckpointVersion);
  for (const auto& s : sections) {
    std::uint64_t count = 1;
    for (auto d : s.dims) count *= d;
    if (count != s.values.size()) throw ConfigError("checkpoint section " + s.name + ": dims do not match value count");
    w.put<std::uint32_t>(static_cast<std::uint32_t>(s.name.size()));
    w.bytes(s.name.data(), s.name.size());
    w.put<std::uint8_t>(static_cast<std::uint8_t>(s.dtype));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(s.dims.size()));
    for (auto d : s.dims) w.put<std::uint64_t>(d);
    if (s.dtype == DType::kF32) {
      for (double v : s.values) w.put<float>(static_cast<float>(v));
    } else {
      w.bytes(s.values.data(), s.values.size() * sizeof(double));
    }
  }
  w.finish(path);
}

std::vector<CheckpointSection> read_checkpoint(const std::filesystem::path& path) {
  Reader r(path);
  char magic[8];
  r.bytes(magic, sizeof(magic));
  if (std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) throw DataError(path.string() + " is not a checkpoint");
  const auto version = r.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw DataError("unsupported checkpoint version " + std::to_string(version) + " in " + path.string());
  }
  std::vector<CheckpointSection> out;
  while (!r.at_end()) {
    CheckpointSection s;
    const auto name_len = r.get<std::uint32_t>();
    if (name_len > 4096) throw DataError("corrupt checkpoint section name in " + path.string());
    s.name.resize(name_len);
    r.bytes(s.name.data(), name_len);
    const auto tag = r.get<std::uint8_t>();
    if (tag != static_cast<std::uint8_t>(DType::kF32) && tag != static_cast<std::uint8_t>(DType::kF64)) {
      throw DataError("unknown dtype tag in checkpoint section " + s.name);
    }
    s.dtype = static_cast<DType>(tag);
    const auto rank = r.get<std::uint32_t>();
    if (rank > 8) throw DataError("corrupt rank in checkpoint section " + s.name);
    std::uint64_t count = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
      s.dims.push_back(r.get<std::uint64_t>());
      count *= s.dims.back();
    }
    if (count > (std::uint64_t{1} << 34)) throw DataError("corrupt dims in checkpoint section " + s.name);
    s.values.resize(count);
    if (s.dtype == DType::kF32) {
      for (auto& v : s.values) v = r.get<float>();
    } else {
      r.bytes(s.values.data(), count * sizeof(double));
    }
    out.push_back(std::move(s));
  }
  return out;
}

template <typename T>
std::vector<CheckpointSection> to_sections(ModelParams<T>& params) {
  std::vector<CheckpointSection> out;
  visit_all<T>(params, [&](const std::string& name, ad::Matrix<T>& m) {
    CheckpointSection s;
    s.name = name;
    s.dtype = dtype_of<T>();
    s.dims = {static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols())};
    s.values.assign(m.data(), m.data() + m.size());
    out.push_back(std::move(s));
  });
  return out;
}

template <typename T>
void from_sections(const std::vector<CheckpointSection>& sections, ModelParams<T>& params) {
  std::map<std::string, const CheckpointSection*> by_name;
  for (const auto& s : sections) by_name[s.name] = &s;
  std::size_t used = 0;
  visit_all<T>(params, [&](const std::string& name, ad::Matrix<T>& m) {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw DataError("checkpoint is missing " + name);
    const auto& s = *it->second;
    if (s.dims.size() != 2 || s.dims[0] != static_cast<std::uint64_t>(m.rows()) ||
        s.dims[1] != static_cast<std::uint64_t>(m.cols())) {
      throw ConfigError("checkpoint shape mismatch for " + name);
    }
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<T>(s.values[static_cast<std::size_t>(i)]);
    ++used;
  });
  if (used != by_name.size()) throw ConfigError("checkpoint holds tensors the configured model does not have");
}

template std::vector<CheckpointSection> to_sections<float>(ModelParams<float>&);
template std::vector<CheckpointSection> to_sections<double>(ModelParams<double>&);
template void from_sections<float>(const std::vector<CheckpointSection>&, ModelParams<float>&);
template void from_sections<double>(const std::vector<CheckpointSection>&, ModelParams<double>&);

}  // namespace selfgnn
