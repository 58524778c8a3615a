#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <opencv2/core/mat.hpp>
#include <torch/types.h>

#include "mccsod/errors.hpp"
#include "mccsod/network.hpp"

namespace mccsod {

class EmptyManifestError : public Error {
 public:
  using Error::Error;
};

/// Paired image / ground-truth files of one split, sorted by stem.
///
/// Layout: <root>/<split>/image/<stem>.{png,jpg,...} and <root>/<split>/GT/<stem>.png
struct DatasetManifest {
  std::filesystem::path root;
  std::string split;
  std::vector<std::string> ids;
  std::vector<std::filesystem::path> images;
  std::vector<std::filesystem::path> gts;

  std::size_t size() const { return ids.size(); }
};

/// Throws PairingError naming every unpaired stem, EmptyManifestError when the
/// split holds no pairs, IoError when the directories are missing.
DatasetManifest load_dataset(const std::filesystem::path& root, const std::string& split);

/// Image files (png, jpg, jpeg, bmp, tif, tiff) directly inside `dir`, sorted
/// by stem. Throws IoError when the directory is missing.
std::vector<std::filesystem::path> list_images(const std::filesystem::path& dir);

struct Sample {
  torch::Tensor image;    // (3, s, s) float32, normalized
  torch::Tensor gt;       // (1, s, s) float32 in {0,1}
  torch::Tensor edge_gt;  // (1, s, s) float32 in {0,1}
  std::string id;
};

struct PrepareOptions {
  std::int64_t size = 256;
  Normalization normalization = Normalization::imagenet();
  /// Width in pixels of the boundary band marked by edge_ground_truth.
  int edge_band = 1;
};

/// Bilinear resize of the image, nearest-neighbour resize of the mask,
/// binarization at 0.5, normalization and edge extraction. `bgr` is 8-bit
/// 3-channel (grayscale is expanded), `gt` 8-bit single-channel of equal size.
Sample prepare(const cv::Mat& bgr, const cv::Mat& gt, const PrepareOptions& opts, std::string id = {});

/// Reads and prepares item `index` of the manifest. Throws IoError for
/// undecodable files.
Sample load_sample(const DatasetManifest& manifest, std::size_t index, const PrepareOptions& opts);

/// Boundary band of a binary mask (CV_8U, values 0/1): mask minus its erosion
/// by a 3x3 cross, repeated `band` times, with everything outside the image
/// treated as background. Returns CV_8U 0/1.
cv::Mat edge_ground_truth(const cv::Mat& mask, int band = 1);
/// Same on a (..., h, w) {0,1} tensor.
torch::Tensor edge_ground_truth(const torch::Tensor& mask, int band = 1);

/// Element of the 8-element dihedral group acting on the last two axes:
/// optional horizontal flip, then `quarter_turns` counter-clockwise rotations.
struct Dihedral {
  int quarter_turns = 0;  // 0..3
  bool flip = false;

  torch::Tensor apply(const torch::Tensor& x) const;
  Dihedral inverse() const;
  /// (*this) after `first`: x -> this->apply(first.apply(x)).
  Dihedral after(const Dihedral& first) const;
  /// 0..7, identity first; flip-free elements occupy 0..3.
  int index() const { return (flip ? 4 : 0) + quarter_turns; }

  bool operator==(const Dihedral&) const = default;
};

/// Identity, 90, 180, 270, then the same four preceded by a horizontal flip.
std::array<Dihedral, 8> dihedral_group();

Sample transform(const Sample& s, const Dihedral& d);
/// The eight dihedral variants; element 0 is the input itself.
std::vector<Sample> augment(const Sample& s);

/// Converts a (1|h, w) map or CV_64F image in [0,1] to 8-bit and writes a PNG.
void write_saliency_png(const std::filesystem::path& path, const cv::Mat& map);
cv::Mat tensor_to_mat(const torch::Tensor& map);

}  // namespace mccsod
