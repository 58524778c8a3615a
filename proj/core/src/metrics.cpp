#include "mccsod/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "mccsod/data.hpp"
#include "mccsod/errors.hpp"

namespace mccsod {

namespace fs = std::filesystem;

namespace {

// Machine epsilon, as used inside the structure and alignment measures.
constexpr double kEps = std::numeric_limits<double>::epsilon();

void check_pair(const cv::Mat& s, const cv::Mat& g, const char* what) {
  if (s.empty() || g.empty() || s.size() != g.size() || s.type() != CV_64FC1 || g.type() != CV_64FC1)
    throw DimensionError(std::string(what) + ": expected two CV_64F single-channel maps of equal size");
}

double fbeta(double precision, double recall) {
  return (1.0 + kMetricBetaSquared) * precision * recall /
         (kMetricBetaSquared * precision + recall + kMetricEpsilon);
}

struct Counts {
  double tp = 0, fp = 0, fn = 0, tn = 0;
};

// Enhanced alignment summed over a binary map described only by its confusion
// counts; every pixel in one cell of the table has the same alignment value.
double e_measure_from_counts(const Counts& c) {
  const double n = c.tp + c.fp + c.fn + c.tn;
  const double fg = c.tp + c.fn;
  if (fg == 0) return (c.fn + c.tn) / n;  // 1 - FM averaged
  if (fg == n) return (c.tp + c.fp) / n;  // FM averaged
  const double mu_fm = (c.tp + c.fp) / n;
  const double mu_g = fg / n;
  auto enhanced = [&](double fm, double gv) {
    const double a = fm - mu_fm;
    const double b = gv - mu_g;
    const double align = 2.0 * a * b / (a * a + b * b + kEps);
    return (align + 1.0) * (align + 1.0) / 4.0;
  };
  const double sum = c.tp * enhanced(1, 1) + c.fp * enhanced(1, 0) + c.fn * enhanced(0, 1) + c.tn * enhanced(0, 0);
  return sum / n;
}

// Mean and (n-1)-normalized standard deviation of s over pixels where mask != 0.
double object_score(const cv::Mat& s, const cv::Mat& mask) {
  double sum = 0;
  std::size_t n = 0;
  for (int r = 0; r < s.rows; ++r) {
    const double* sp = s.ptr<double>(r);
    const double* mp = mask.ptr<double>(r);
    for (int c = 0; c < s.cols; ++c)
      if (mp[c] != 0) {
        sum += sp[c];
        ++n;
      }
  }
  if (n == 0) return 0.0;
  const double mean = sum / static_cast<double>(n);
  double ss = 0;
  for (int r = 0; r < s.rows; ++r) {
    const double* sp = s.ptr<double>(r);
    const double* mp = mask.ptr<double>(r);
    for (int c = 0; c < s.cols; ++c)
      if (mp[c] != 0) ss += (sp[c] - mean) * (sp[c] - mean);
  }
  const double sd = n > 1 ? std::sqrt(ss / static_cast<double>(n - 1)) : 0.0;
  return 2.0 * mean / (mean * mean + 1.0 + sd + kEps);
}

double region_ssim(const cv::Mat& s, const cv::Mat& g) {
  const double n = static_cast<double>(s.total());
  const double x = cv::mean(s)[0];
  const double y = cv::mean(g)[0];
  double sxx = 0, syy = 0, sxy = 0;
  for (int r = 0; r < s.rows; ++r) {
    const double* sp = s.ptr<double>(r);
    const double* gp = g.ptr<double>(r);
    for (int c = 0; c < s.cols; ++c) {
      const double dx = sp[c] - x, dy = gp[c] - y;
      sxx += dx * dx;
      syy += dy * dy;
      sxy += dx * dy;
    }
  }
  sxx /= (n - 1 + kEps);
  syy /= (n - 1 + kEps);
  sxy /= (n - 1 + kEps);
  const double alpha = 4 * x * y * sxy;
  const double beta = (x * x + y * y) * (sxx + syy);
  if (alpha != 0) return alpha / (beta + kEps);
  if (beta == 0) return 1.0;
  return 0.0;
}

}  // namespace

int quantize_level(double s) {
  const double v = std::floor(s * 255.0 + 1e-9);
  return static_cast<int>(std::clamp(v, 0.0, 255.0));
}

double adaptive_threshold(const cv::Mat& s) { return std::min(2.0 * cv::mean(s)[0], 1.0); }

double mae(const cv::Mat& s, const cv::Mat& g) {
  check_pair(s, g, "mae");
  return cv::norm(s, g, cv::NORM_L1) / static_cast<double>(s.total());
}

FMeasureSuite f_measure_suite(const cv::Mat& s, const cv::Mat& g) {
  check_pair(s, g, "f_measure_suite");
  // Histogram quantized levels separately for foreground and background pixels;
  // a suffix sum then gives TP/FP at every threshold.
  std::array<double, kThresholdCount> fg_hist{}, bg_hist{};
  const double thr = adaptive_threshold(s);
  Counts adp;
  double n_fg = 0;
  for (int r = 0; r < s.rows; ++r) {
    const double* sp = s.ptr<double>(r);
    const double* gp = g.ptr<double>(r);
    for (int c = 0; c < s.cols; ++c) {
      const bool fg = gp[c] > 0.5;
      const int level = quantize_level(sp[c]);
      (fg ? fg_hist : bg_hist)[level] += 1;
      n_fg += fg;
      if (sp[c] >= thr) (fg ? adp.tp : adp.fp) += 1;
    }
  }
  FMeasureSuite out;
  double tp = 0, fp = 0;
  for (int t = kThresholdCount - 1; t >= 0; --t) {
    tp += fg_hist[t];
    fp += bg_hist[t];
    const double p = tp / (tp + fp + kMetricEpsilon);
    const double rc = tp / (n_fg + kMetricEpsilon);
    out.pr[t] = {p, rc};
    out.per_threshold[t] = fbeta(p, rc);
  }
  out.max = *std::max_element(out.per_threshold.begin(), out.per_threshold.end());
  double sum = 0;
  for (double f : out.per_threshold) sum += f;
  out.mean = sum / kThresholdCount;
  out.adaptive = fbeta(adp.tp / (adp.tp + adp.fp + kMetricEpsilon), adp.tp / (n_fg + kMetricEpsilon));
  return out;
}

double e_measure_binary(const cv::Mat& fm, const cv::Mat& g) {
  check_pair(fm, g, "e_measure_binary");
  Counts c;
  for (int r = 0; r < fm.rows; ++r) {
    const double* fp = fm.ptr<double>(r);
    const double* gp = g.ptr<double>(r);
    for (int col = 0; col < fm.cols; ++col) {
      const bool pos = fp[col] > 0.5, fg = gp[col] > 0.5;
      (pos ? (fg ? c.tp : c.fp) : (fg ? c.fn : c.tn)) += 1;
    }
  }
  return e_measure_from_counts(c);
}

EMeasureSuite e_measure_suite(const cv::Mat& s, const cv::Mat& g) {
  check_pair(s, g, "e_measure_suite");
  std::array<double, kThresholdCount> fg_hist{}, bg_hist{};
  const double thr = adaptive_threshold(s);
  Counts adp;
  for (int r = 0; r < s.rows; ++r) {
    const double* sp = s.ptr<double>(r);
    const double* gp = g.ptr<double>(r);
    for (int c = 0; c < s.cols; ++c) {
      const bool fg = gp[c] > 0.5;
      (fg ? fg_hist : bg_hist)[quantize_level(sp[c])] += 1;
      const bool pos = sp[c] >= thr;
      (pos ? (fg ? adp.tp : adp.fp) : (fg ? adp.fn : adp.tn)) += 1;
    }
  }
  double n_fg = 0, n_bg = 0;
  for (int t = 0; t < kThresholdCount; ++t) {
    n_fg += fg_hist[t];
    n_bg += bg_hist[t];
  }
  EMeasureSuite out;
  Counts c;
  for (int t = kThresholdCount - 1; t >= 0; --t) {
    c.tp += fg_hist[t];
    c.fp += bg_hist[t];
    c.fn = n_fg - c.tp;
    c.tn = n_bg - c.fp;
    out.per_threshold[t] = e_measure_from_counts(c);
  }
  out.max = *std::max_element(out.per_threshold.begin(), out.per_threshold.end());
  double sum = 0;
  for (double e : out.per_threshold) sum += e;
  out.mean = sum / kThresholdCount;
  out.adaptive = e_measure_from_counts(adp);
  return out;
}

double s_object(const cv::Mat& s, const cv::Mat& g) {
  check_pair(s, g, "s_object");
  cv::Mat fg = s.mul(g);
  cv::Mat inv_g = 1.0 - g;
  cv::Mat bg = (1.0 - s).mul(inv_g);
  const double u = cv::mean(g)[0];
  return u * object_score(fg, g) + (1.0 - u) * object_score(bg, inv_g);
}

double s_region(const cv::Mat& s, const cv::Mat& g) {
  check_pair(s, g, "s_region");
  const int rows = g.rows, cols = g.cols;
  // Centroid in 1-based pixel coordinates, rounded half away from zero.
  double total = 0, sx = 0, sy = 0;
  for (int r = 0; r < rows; ++r) {
    const double* gp = g.ptr<double>(r);
    for (int c = 0; c < cols; ++c) {
      total += gp[c];
      sx += gp[c] * (c + 1);
      sy += gp[c] * (r + 1);
    }
  }
  int x, y;
  if (total == 0) {
    x = static_cast<int>(std::round(cols / 2.0));
    y = static_cast<int>(std::round(rows / 2.0));
  } else {
    x = static_cast<int>(std::round(sx / total));
    y = static_cast<int>(std::round(sy / total));
  }
  const double area = static_cast<double>(rows) * cols;
  // Quadrants LT = [0,y) x [0,x), RT, LB, RB; empty quadrants carry zero weight.
  const std::array<cv::Rect, 4> quads{cv::Rect(0, 0, x, y), cv::Rect(x, 0, cols - x, y),
                                      cv::Rect(0, y, x, rows - y), cv::Rect(x, y, cols - x, rows - y)};
  double q = 0;
  for (const auto& rc : quads) {
    if (rc.area() == 0) continue;
    q += (rc.area() / area) * region_ssim(s(rc), g(rc));
  }
  return q;
}

double s_measure(const cv::Mat& s, const cv::Mat& g) {
  check_pair(s, g, "s_measure");
  const double y = cv::mean(g)[0];
  if (y == 0) return 1.0 - cv::mean(s)[0];
  if (y == 1) return cv::mean(s)[0];
  const double q = kStructureAlpha * s_object(s, g) + (1.0 - kStructureAlpha) * s_region(s, g);
  return std::max(q, 0.0);
}

ImageMetrics evaluate_image(const cv::Mat& s, const cv::Mat& g) {
  ImageMetrics m;
  m.s_alpha = s_measure(s, g);
  m.f = f_measure_suite(s, g);
  m.e = e_measure_suite(s, g);
  m.mae = mae(s, g);
  m.empty_gt = cv::countNonZero(g) == 0;
  return m;
}

MetricReport aggregate(const std::vector<ImageMetrics>& images) {
  MetricReport r;
  r.n_images = images.size();
  if (images.empty()) return r;
  for (const auto& m : images) {
    r.s_alpha += m.s_alpha;
    r.f_max += m.f.max;
    r.f_mean += m.f.mean;
    r.f_adp += m.f.adaptive;
    r.e_max += m.e.max;
    r.e_mean += m.e.mean;
    r.e_adp += m.e.adaptive;
    r.mae += m.mae;
    for (int t = 0; t < kThresholdCount; ++t) {
      r.pr[t].precision += m.f.pr[t].precision;
      r.pr[t].recall += m.f.pr[t].recall;
    }
  }
  const double n = static_cast<double>(images.size());
  for (double* v : {&r.s_alpha, &r.f_max, &r.f_mean, &r.f_adp, &r.e_max, &r.e_mean, &r.e_adp, &r.mae}) *v /= n;
  for (auto& p : r.pr) {
    p.precision /= n;
    p.recall /= n;
  }
  return r;
}

cv::Mat to_unit_map(const cv::Mat& img) {
  if (img.empty()) throw IoError("empty map");
  cv::Mat gray = img;
  if (img.channels() == 3) cv::cvtColor(img, gray, cv::COLOR_BGR2GRAY);
  double scale = 1.0;
  switch (gray.depth()) {
    case CV_8U: scale = 1.0 / 255.0; break;
    case CV_16U: scale = 1.0 / 65535.0; break;
    default: break;
  }
  cv::Mat out;
  gray.convertTo(out, CV_64F, scale);
  return out;
}

cv::Mat to_binary_mask(const cv::Mat& img) {
  cv::Mat u = to_unit_map(img);
  cv::Mat out;
  cv::threshold(u, out, 0.5 - 1e-9, 1.0, cv::THRESH_BINARY);
  return out;
}

MetricReport evaluate_directory(const fs::path& pred_dir, const fs::path& gt_dir, const EvalOptions& opts) {
  auto index = [](const fs::path& dir) {
    if (!fs::is_directory(dir)) throw IoError("missing directory " + dir.string());
    std::map<std::string, fs::path> m;
    for (const auto& e : fs::directory_iterator(dir))
      if (e.is_regular_file() && e.path().extension() == ".png") m.emplace(e.path().stem().string(), e.path());
    return m;
  };
  const auto preds = index(pred_dir);
  const auto gts = index(gt_dir);
  std::vector<std::string> unpaired;
  for (const auto& [stem, _] : gts)
    if (!preds.count(stem)) unpaired.push_back(stem);
  for (const auto& [stem, _] : preds)
    if (!gts.count(stem)) unpaired.push_back(stem);
  if (!unpaired.empty()) {
    std::sort(unpaired.begin(), unpaired.end());
    std::string msg = "prediction/GT stems do not pair:";
    for (const auto& s : unpaired) msg += " " + s;
    throw PairingError(msg, unpaired);
  }
  if (gts.empty()) throw EmptyManifestError("no ground-truth PNGs in " + gt_dir.string());

  std::vector<ImageMetrics> per_image;
  for (const auto& [stem, gt_path] : gts) {
    cv::Mat gt_raw = cv::imread(gt_path.string(), cv::IMREAD_GRAYSCALE);
    cv::Mat pr_raw = cv::imread(preds.at(stem).string(), cv::IMREAD_GRAYSCALE);
    if (gt_raw.empty() || pr_raw.empty()) throw IoError("cannot decode pair '" + stem + "'");
    if (!opts.native_resolution) {
      const cv::Size target(opts.eval_size, opts.eval_size);
      if (gt_raw.size() != target) cv::resize(gt_raw, gt_raw, target, 0, 0, cv::INTER_NEAREST);
    }
    cv::Mat g = to_binary_mask(gt_raw);
    cv::Mat s = to_unit_map(pr_raw);
    if (s.size() != g.size()) cv::resize(s, s, g.size(), 0, 0, cv::INTER_LINEAR);
    s = cv::min(cv::max(s, 0.0), 1.0);
    auto m = evaluate_image(s, g);
    if (opts.skip_empty_gt && m.empty_gt) continue;
    per_image.push_back(std::move(m));
  }
  return aggregate(per_image);
}

std::string format_report_table(const MetricReport& r, const std::string& title) {
  std::ostringstream os;
  char buf[256];
  if (!title.empty()) os << title << "\n";
  std::snprintf(buf, sizeof(buf), "%-8s %-8s %-8s %-8s %-8s %-8s %-8s %-8s %s\n", "S_alpha", "F_max", "F_mean",
                "F_adp", "E_max", "E_mean", "E_adp", "MAE", "images");
  os << buf;
  std::snprintf(buf, sizeof(buf), "%-8.4f %-8.4f %-8.4f %-8.4f %-8.4f %-8.4f %-8.4f %-8.4f %zu\n", r.s_alpha, r.f_max,
                r.f_mean, r.f_adp, r.e_max, r.e_mean, r.e_adp, r.mae, r.n_images);
  os << buf;
  return os.str();
}

void write_report(const fs::path& path, const MetricReport& r) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path.string());
  char buf[128];
  auto kv = [&](const std::string& k, double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    os << k << " = " << buf << "\n";
  };
  kv("s_alpha", r.s_alpha);
  kv("f_max", r.f_max);
  kv("f_mean", r.f_mean);
  kv("f_adp", r.f_adp);
  kv("e_max", r.e_max);
  kv("e_mean", r.e_mean);
  kv("e_adp", r.e_adp);
  kv("mae", r.mae);
  os << "n_images = " << r.n_images << "\n";
  for (int t = 0; t < kThresholdCount; ++t) {
    kv("pr." + std::to_string(t) + ".precision", r.pr[t].precision);
    kv("pr." + std::to_string(t) + ".recall", r.pr[t].recall);
  }
}

MetricReport read_report(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read " + path.string());
  std::map<std::string, std::string> kv;
  std::string line;
  while (std::getline(is, line)) {
    const auto eq = line.find(" = ");
    if (eq != std::string::npos) kv[line.substr(0, eq)] = line.substr(eq + 3);
  }
  auto num = [&](const std::string& k) {
    auto it = kv.find(k);
    if (it == kv.end()) throw IoError(path.string() + ": report lacks '" + k + "'");
    return std::stod(it->second);
  };
  MetricReport r;
  r.s_alpha = num("s_alpha");
  r.f_max = num("f_max");
  r.f_mean = num("f_mean");
  r.f_adp = num("f_adp");
  r.e_max = num("e_max");
  r.e_mean = num("e_mean");
  r.e_adp = num("e_adp");
  r.mae = num("mae");
  r.n_images = static_cast<std::size_t>(num("n_images"));
  for (int t = 0; t < kThresholdCount; ++t)
    r.pr[t] = {num("pr." + std::to_string(t) + ".precision"), num("pr." + std::to_string(t) + ".recall")};
  return r;
}

void write_pr_csv(const fs::path& path, const PrCurve& pr) {
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path.string());
  os << "threshold,precision,recall\n";
  char buf[96];
  for (int t = 0; t < kThresholdCount; ++t) {
    std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g\n", t, pr[t].precision, pr[t].recall);
    os << buf;
  }
}

}  // namespace mccsod
