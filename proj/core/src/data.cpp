#include "mccsod/data.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <set>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>
#include <torch/torch.h>

namespace mccsod {

namespace fs = std::filesystem;

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

bool is_image_ext(const fs::path& p) {
  static const std::set<std::string> exts{".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff"};
  return exts.count(lower(p.extension().string())) != 0;
}

std::map<std::string, fs::path> index_dir(const fs::path& dir, bool png_only) {
  if (!fs::is_directory(dir)) throw IoError("missing directory " + dir.string());
  std::map<std::string, fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const auto& p = e.path();
    if (png_only ? lower(p.extension().string()) != ".png" : !is_image_ext(p)) continue;
    out.emplace(p.stem().string(), p);
  }
  return out;
}

cv::Mat binarize(const cv::Mat& gray8) {
  cv::Mat b;
  cv::threshold(gray8, b, 127, 1, cv::THRESH_BINARY);
  return b;
}

torch::Tensor mask_to_tensor(const cv::Mat& m01) {
  cv::Mat f;
  m01.convertTo(f, CV_32F);
  return torch::from_blob(f.data, {1, f.rows, f.cols}, torch::kFloat32).clone();
}

}  // namespace

std::vector<fs::path> list_images(const fs::path& dir) {
  std::vector<fs::path> out;
  for (auto& [stem, path] : index_dir(dir, false)) out.push_back(path);
  return out;
}

DatasetManifest load_dataset(const fs::path& root, const std::string& split) {
  const auto base = root / split;
  auto images = index_dir(base / "image", false);
  auto gts = index_dir(base / "GT", true);

  std::vector<std::string> unpaired;
  for (const auto& [stem, _] : images)
    if (!gts.count(stem)) unpaired.push_back(stem);
  for (const auto& [stem, _] : gts)
    if (!images.count(stem)) unpaired.push_back(stem);
  if (!unpaired.empty()) {
    std::sort(unpaired.begin(), unpaired.end());
    std::string msg = "unpaired files in " + base.string() + ":";
    for (const auto& s : unpaired) msg += " " + s;
    throw PairingError(msg, unpaired);
  }
  if (images.empty()) throw EmptyManifestError("no image/GT pairs under " + base.string());

  DatasetManifest m{root, split, {}, {}, {}};
  for (const auto& [stem, path] : images) {  // std::map iterates in lexicographic order
    m.ids.push_back(stem);
    m.images.push_back(path);
    m.gts.push_back(gts.at(stem));
  }
  return m;
}

Sample prepare(const cv::Mat& bgr_in, const cv::Mat& gt_in, const PrepareOptions& opts, std::string id) {
  if (bgr_in.empty() || gt_in.empty()) throw IoError("prepare: empty image or ground truth");
  if (bgr_in.size() != gt_in.size())
    throw DimensionError("prepare: image and ground truth differ in size (" + id + ")");
  cv::Mat bgr = bgr_in;
  if (bgr.channels() == 1) cv::cvtColor(bgr_in, bgr, cv::COLOR_GRAY2BGR);
  if (bgr.channels() == 4) cv::cvtColor(bgr_in, bgr, cv::COLOR_BGRA2BGR);
  cv::Mat gt = gt_in;
  if (gt.channels() != 1) cv::cvtColor(gt_in, gt, cv::COLOR_BGR2GRAY);
  if (gt.depth() != CV_8U) gt.convertTo(gt, CV_8U);

  const cv::Size target(static_cast<int>(opts.size), static_cast<int>(opts.size));
  if (gt.size() != target) cv::resize(gt, gt, target, 0, 0, cv::INTER_NEAREST);
  const cv::Mat mask = binarize(gt);

  Sample s;
  s.image = image_to_tensor(bgr, opts.size, opts.normalization).squeeze(0);
  s.gt = mask_to_tensor(mask);
  s.edge_gt = mask_to_tensor(edge_ground_truth(mask, opts.edge_band));
  s.id = std::move(id);
  return s;
}

Sample load_sample(const DatasetManifest& manifest, std::size_t index, const PrepareOptions& opts) {
  const auto& ip = manifest.images.at(index);
  const auto& gp = manifest.gts.at(index);
  cv::Mat img = cv::imread(ip.string(), cv::IMREAD_COLOR);
  if (img.empty()) throw IoError("cannot decode image " + ip.string());
  cv::Mat gt = cv::imread(gp.string(), cv::IMREAD_GRAYSCALE);
  if (gt.empty()) throw IoError("cannot decode ground truth " + gp.string());
  return prepare(img, gt, opts, manifest.ids.at(index));
}

cv::Mat edge_ground_truth(const cv::Mat& mask, int band) {
  if (mask.type() != CV_8U) throw DimensionError("edge_ground_truth: expected a CV_8U mask");
  if (band < 1) throw ConfigError("edge band must be at least one pixel");
  const auto cross = cv::getStructuringElement(cv::MORPH_CROSS, cv::Size(3, 3));
  cv::Mat eroded;
  cv::erode(mask, eroded, cross, cv::Point(-1, -1), band, cv::BORDER_CONSTANT, cv::Scalar(0));
  cv::Mat edge = mask - eroded;
  return edge;
}

torch::Tensor edge_ground_truth(const torch::Tensor& mask, int band) {
  if (mask.dim() < 2) throw DimensionError("edge_ground_truth: expected (..., h, w)");
  const auto h = mask.size(-2), w = mask.size(-1);
  auto flat = mask.detach().to(torch::kCPU).reshape({-1, h, w}).gt(0.5).to(torch::kUInt8).contiguous();
  auto out = torch::empty_like(flat);
  for (std::int64_t i = 0; i < flat.size(0); ++i) {
    cv::Mat m(static_cast<int>(h), static_cast<int>(w), CV_8U, flat[i].data_ptr<std::uint8_t>());
    cv::Mat e = edge_ground_truth(m, band);
    std::memcpy(out[i].data_ptr<std::uint8_t>(), e.data, static_cast<std::size_t>(h * w));
  }
  return out.to(mask.scalar_type()).reshape(mask.sizes());
}

torch::Tensor Dihedral::apply(const torch::Tensor& x) const {
  auto y = flip ? x.flip({-1}) : x;
  return quarter_turns % 4 == 0 ? y.clone() : torch::rot90(y, quarter_turns, {-2, -1});
}

Dihedral Dihedral::inverse() const {
  if (flip) return *this;  // reflections are involutions
  return {(4 - quarter_turns) % 4, false};
}

Dihedral Dihedral::after(const Dihedral& first) const {
  // R^a F^f R^b F^g = R^(a + (f ? -b : b)) F^(f xor g)
  const int b = flip ? (4 - first.quarter_turns) % 4 : first.quarter_turns;
  return {(quarter_turns + b) % 4, flip != first.flip};
}

std::array<Dihedral, 8> dihedral_group() {
  std::array<Dihedral, 8> g;
  for (int i = 0; i < 8; ++i) g[i] = {i % 4, i >= 4};
  return g;
}

Sample transform(const Sample& s, const Dihedral& d) {
  return {d.apply(s.image), d.apply(s.gt), d.apply(s.edge_gt), s.id};
}

std::vector<Sample> augment(const Sample& s) {
  std::vector<Sample> out;
  out.reserve(8);
  for (const auto& d : dihedral_group()) out.push_back(transform(s, d));
  return out;
}

cv::Mat tensor_to_mat(const torch::Tensor& map) {
  auto t = map.detach().to(torch::kCPU, torch::kFloat64).contiguous();
  while (t.dim() > 2) {
    if (t.size(0) != 1) throw DimensionError("tensor_to_mat: expected a single-channel map");
    t = t.squeeze(0);
  }
  if (t.dim() != 2) throw DimensionError("tensor_to_mat: expected a 2-D map");
  cv::Mat m(static_cast<int>(t.size(0)), static_cast<int>(t.size(1)), CV_64F);
  std::memcpy(m.data, t.data_ptr<double>(), sizeof(double) * m.total());
  return m;
}

void write_saliency_png(const fs::path& path, const cv::Mat& map) {
  cv::Mat m8;
  map.convertTo(m8, CV_8U, 255.0);  // saturating, rounds to nearest
  if (!cv::imwrite(path.string(), m8)) throw IoError("cannot write " + path.string());
}

}  // namespace mccsod
