#include "v2g/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace v2g::nn {

static_assert(std::endian::native == std::endian::little, "checkpoint format assumes little-endian");

namespace {

constexpr char kMagic[8] = {'V', '2', 'G', 'C', 'K', 'P', 'T', '\0'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ofstream& f, const T& v) {
  f.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::ifstream& f, const char* what) {
  T v{};
  f.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!f) throw std::runtime_error(std::string("checkpoint: truncated file while reading ") + what);
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path,
                     const std::vector<std::pair<std::string, const TensorData*>>& tensors) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("checkpoint: cannot open '" + path + "' for writing");
  f.write(kMagic, sizeof(kMagic));
  write_pod(f, kVersion);
  write_pod(f, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    write_pod(f, static_cast<std::uint32_t>(name.size()));
    f.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_pod(f, static_cast<std::uint32_t>(t->shape.size()));
    for (int d : t->shape) write_pod(f, static_cast<std::int64_t>(d));
    f.write(reinterpret_cast<const char*>(t->data.data()),
            static_cast<std::streamsize>(t->data.size() * sizeof(double)));
  }
  if (!f) throw std::runtime_error("checkpoint: write failed for '" + path + "'");
}

void save_checkpoint(const std::string& path, const ParamStore& params) {
  std::vector<std::pair<std::string, const TensorData*>> tensors;
  tensors.reserve(params.names().size());
  for (const auto& name : params.names()) tensors.emplace_back(name, params.get(name).get());
  save_checkpoint(path, tensors);
}

std::vector<std::pair<std::string, TensorData>> load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("checkpoint: cannot open '" + path + "'");
  char magic[8];
  f.read(magic, sizeof(magic));
  if (!f || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw std::runtime_error("checkpoint: bad magic in '" + path + "'");
  const auto version = read_pod<std::uint32_t>(f, "version");
  if (version != kVersion)
    throw std::runtime_error("checkpoint: version " + std::to_string(version) + " unsupported (want " +
                             std::to_string(kVersion) + ")");
  const auto count = read_pod<std::uint32_t>(f, "record count");
  std::vector<std::pair<std::string, TensorData>> out;
  out.reserve(count);
  for (std::uint32_t r = 0; r < count; ++r) {
    const auto name_len = read_pod<std::uint32_t>(f, "name length");
    std::string name(name_len, '\0');
    f.read(name.data(), name_len);
    if (!f) throw std::runtime_error("checkpoint: truncated file while reading name");
    const auto ndim = read_pod<std::uint32_t>(f, "rank");
    TensorData t;
    t.shape.resize(ndim);
    std::size_t n = 1;
    for (std::uint32_t d = 0; d < ndim; ++d) {
      const auto dim = read_pod<std::int64_t>(f, "dimension");
      if (dim < 0) throw std::runtime_error("checkpoint: negative dimension in '" + name + "'");
      t.shape[d] = static_cast<int>(dim);
      n *= static_cast<std::size_t>(dim);
    }
    t.data.resize(n);
    f.read(reinterpret_cast<char*>(t.data.data()), static_cast<std::streamsize>(n * sizeof(double)));
    if (!f) throw std::runtime_error("checkpoint: truncated payload in '" + name + "'");
    out.emplace_back(std::move(name), std::move(t));
  }
  return out;
}

}  // namespace v2g::nn
