#include "mccsod/archive.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include <torch/torch.h>

#include "mccsod/errors.hpp"

namespace mccsod {

static_assert(std::endian::native == std::endian::little,
              "archive I/O assumes a little-endian host");

namespace {

enum class DType : std::uint8_t { kFloat32 = 1, kFloat64 = 2, kInt64 = 3 };

DType dtype_of(const torch::Tensor& t) {
  switch (t.scalar_type()) {
    case torch::kFloat32: return DType::kFloat32;
    case torch::kFloat64: return DType::kFloat64;
    case torch::kInt64: return DType::kInt64;
    default:
      throw ContractError("archive: unsupported dtype " +
                          std::string(c10::toString(t.scalar_type())));
  }
}

torch::ScalarType scalar_type_of(DType d) {
  switch (d) {
    case DType::kFloat32: return torch::kFloat32;
    case DType::kFloat64: return torch::kFloat64;
    case DType::kInt64: return torch::kInt64;
  }
  throw IoError("archive: corrupt dtype tag");
}

template <typename T>
void write_pod(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T read_pod(std::istream& is) {
  T v{};
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw IoError("archive: truncated file");
  return v;
}

std::string read_string(std::istream& is, std::uint64_t n) {
  std::string s(n, '\0');
  is.read(s.data(), static_cast<std::streamsize>(n));
  if (!is) throw IoError("archive: truncated file");
  return s;
}

}  // namespace

void TensorArchive::put(const std::string& name, const torch::Tensor& value) {
  dtype_of(value);
  arrays_[name] = value.detach().to(torch::kCPU).contiguous().clone();
}

const torch::Tensor& TensorArchive::at(const std::string& name) const {
  auto it = arrays_.find(name);
  if (it == arrays_.end()) throw MissingWeightError("archive has no entry '" + name + "'");
  return it->second;
}

void TensorArchive::save(const std::filesystem::path& path) const {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  os.write(kArchiveMagic, sizeof(kArchiveMagic));
  write_pod(os, kArchiveVersion);
  write_pod(os, static_cast<std::uint64_t>(metadata_.size()));
  os.write(metadata_.data(), static_cast<std::streamsize>(metadata_.size()));
  write_pod(os, static_cast<std::uint32_t>(arrays_.size()));
  for (const auto& [name, t] : arrays_) {
    write_pod(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_pod(os, static_cast<std::uint8_t>(dtype_of(t)));
    write_pod(os, static_cast<std::uint32_t>(t.dim()));
    for (auto d : t.sizes()) write_pod(os, static_cast<std::int64_t>(d));
    os.write(static_cast<const char*>(t.data_ptr()),
             static_cast<std::streamsize>(t.numel() * t.element_size()));
  }
  if (!os) throw IoError("write failed for " + path.string());
}

TensorArchive TensorArchive::load(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  char magic[sizeof(kArchiveMagic)];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kArchiveMagic, sizeof(magic)) != 0)
    throw IoError(path.string() + " is not a mccsod archive (bad magic)");
  const auto version = read_pod<std::uint32_t>(is);
  if (version != kArchiveVersion)
    throw IoError("unsupported archive version " + std::to_string(version));

  TensorArchive ar;
  ar.metadata_ = read_string(is, read_pod<std::uint64_t>(is));
  const auto count = read_pod<std::uint32_t>(is);
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = read_string(is, read_pod<std::uint32_t>(is));
    const auto dtype = scalar_type_of(static_cast<DType>(read_pod<std::uint8_t>(is)));
    const auto ndim = read_pod<std::uint32_t>(is);
    std::vector<std::int64_t> dims(ndim);
    for (auto& d : dims) {
      d = read_pod<std::int64_t>(is);
      if (d < 0) throw IoError("archive: negative dimension in '" + name + "'");
    }
    auto t = torch::empty(dims, torch::TensorOptions().dtype(dtype));
    is.read(static_cast<char*>(t.data_ptr()), static_cast<std::streamsize>(t.numel() * t.element_size()));
    if (!is) throw IoError("archive: truncated payload for '" + name + "'");
    ar.arrays_.emplace(std::move(name), std::move(t));
  }
  return ar;
}

}  // namespace mccsod
