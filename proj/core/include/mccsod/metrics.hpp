#pragma once

// Saliency evaluation: S-measure, F-measure (max/mean/adaptive), E-measure
// (max/mean/adaptive), MAE and the 256-threshold PR curve.
//
// All per-image functions take single-channel CV_64F maps of equal size: the
// prediction in [0,1] and the ground truth in {0,1}.

#include <array>
#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

#include <opencv2/core/mat.hpp>

namespace mccsod {

inline constexpr int kThresholdCount = 256;
/// Guard added to precision / recall / F denominators.
inline constexpr double kMetricEpsilon = 1e-8;
inline constexpr double kMetricBetaSquared = 0.3;
inline constexpr double kStructureAlpha = 0.5;

struct PrPoint {
  double precision = 0.0;
  double recall = 0.0;
};
using PrCurve = std::array<PrPoint, kThresholdCount>;

/// A pixel is positive at integer threshold t (0..255) when s*255 >= t; a
/// slack of 1e-9 keeps 8-bit inputs k/255 on level k.
int quantize_level(double s);
/// min(2 * mean(s), 1); pixels with s >= this value are positive.
double adaptive_threshold(const cv::Mat& s);

double mae(const cv::Mat& s, const cv::Mat& g);

struct FMeasureSuite {
  double max = 0.0;
  double mean = 0.0;
  double adaptive = 0.0;
  std::array<double, kThresholdCount> per_threshold{};
  PrCurve pr{};  // index = threshold
};
FMeasureSuite f_measure_suite(const cv::Mat& s, const cv::Mat& g);

struct EMeasureSuite {
  double max = 0.0;
  double mean = 0.0;
  double adaptive = 0.0;
  std::array<double, kThresholdCount> per_threshold{};
};
/// Enhanced-alignment measure of a binary foreground map (CV_64F in {0,1}),
/// including the all-background and all-foreground ground-truth cases. The
/// enhanced alignment matrix is averaged over all pixels.
double e_measure_binary(const cv::Mat& fm, const cv::Mat& g);
EMeasureSuite e_measure_suite(const cv::Mat& s, const cv::Mat& g);

/// alpha * S_object + (1 - alpha) * S_region, alpha = 0.5, clamped at 0.
double s_measure(const cv::Mat& s, const cv::Mat& g);
double s_object(const cv::Mat& s, const cv::Mat& g);
double s_region(const cv::Mat& s, const cv::Mat& g);

struct ImageMetrics {
  double s_alpha = 0.0;
  FMeasureSuite f;
  EMeasureSuite e;
  double mae = 0.0;
  bool empty_gt = false;
};
ImageMetrics evaluate_image(const cv::Mat& s, const cv::Mat& g);

struct MetricReport {
  double s_alpha = 0.0;
  double f_max = 0.0, f_mean = 0.0, f_adp = 0.0;
  double e_max = 0.0, e_mean = 0.0, e_adp = 0.0;
  double mae = 0.0;
  PrCurve pr{};
  std::size_t n_images = 0;
};

/// Arithmetic means of the per-image values; PR averaged pointwise.
MetricReport aggregate(const std::vector<ImageMetrics>& images);

struct EvalOptions {
  /// Score at each ground truth's own size (prediction resized bilinearly).
  /// When false both maps are brought to eval_size x eval_size.
  bool native_resolution = true;
  int eval_size = 256;
  /// Drop images whose ground truth has no foreground from the average.
  bool skip_empty_gt = false;
};

/// Pairs <pred_dir>/<stem>.png with <gt_dir>/<stem>.png. Throws PairingError
/// listing every unmatched stem, EmptyManifestError for an empty directory.
MetricReport evaluate_directory(const std::filesystem::path& pred_dir, const std::filesystem::path& gt_dir,
                                const EvalOptions& opts = {});

/// 8-bit (or any depth) single-channel image to CV_64F in [0,1].
cv::Mat to_unit_map(const cv::Mat& img);
/// Ground-truth image to CV_64F {0,1} (foreground where value >= half scale).
cv::Mat to_binary_mask(const cv::Mat& img);

std::string format_report_table(const MetricReport& r, const std::string& title = {});
/// "key = value" lines at full double precision.
void write_report(const std::filesystem::path& path, const MetricReport& r);
MetricReport read_report(const std::filesystem::path& path);
/// Header plus 256 rows: threshold,precision,recall.
void write_pr_csv(const std::filesystem::path& path, const PrCurve& pr);

}  // namespace mccsod
