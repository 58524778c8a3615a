#pragma once

// Flat named-array container used for pretrained encoder weights and
// checkpoints.
//
// Layout (all integers little-endian):
//   magic      8 bytes  "MCCSODAR"
//   version    u32      (currently 1)
//   meta_len   u64      followed by meta_len bytes of UTF-8 text (JSON or empty)
//   count      u32
//   count x entry:
//     name_len u32, name bytes
//     dtype    u8       1 = float32, 2 = float64, 3 = int64
//     ndim     u32, dims i64[ndim]
//     payload  prod(dims) * sizeof(dtype) bytes, little-endian, row-major

#include <filesystem>
#include <map>
#include <string>

#include <torch/types.h>

namespace mccsod {

inline constexpr char kArchiveMagic[8] = {'M', 'C', 'C', 'S', 'O', 'D', 'A', 'R'};
inline constexpr std::uint32_t kArchiveVersion = 1;

class TensorArchive {
 public:
  void put(const std::string& name, const torch::Tensor& value);
  bool contains(const std::string& name) const { return arrays_.count(name) != 0; }
  // Throws MissingWeightError when absent.
  const torch::Tensor& at(const std::string& name) const;

  const std::map<std::string, torch::Tensor>& arrays() const { return arrays_; }
  std::size_t size() const { return arrays_.size(); }

  const std::string& metadata() const { return metadata_; }
  void set_metadata(std::string text) { metadata_ = std::move(text); }

  void save(const std::filesystem::path& path) const;
  static TensorArchive load(const std::filesystem::path& path);

 private:
  std::map<std::string, torch::Tensor> arrays_;
  std::string metadata_;
};

}  // namespace mccsod
