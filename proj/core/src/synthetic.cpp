#include "mccsod/synthetic.hpp"

#include <cstdio>
#include <random>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "mccsod/errors.hpp"

namespace mccsod {

namespace fs = std::filesystem;

SyntheticScene synthesize_scene(std::uint64_t seed, int index, int size, bool with_objects) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index)};
  std::mt19937_64 rng(seq);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto uni = [&](double lo, double hi) { return lo + (hi - lo) * u(rng); };

  // Terrain: low-frequency noise upsampled over a base tint, plus grain.
  const int coarse = std::max(4, size / 16);
  cv::Mat noise(coarse, coarse, CV_32FC3);
  for (int r = 0; r < coarse; ++r)
    for (int c = 0; c < coarse; ++c)
      noise.at<cv::Vec3f>(r, c) = cv::Vec3f(static_cast<float>(uni(-30, 30)), static_cast<float>(uni(-30, 30)),
                                            static_cast<float>(uni(-30, 30)));
  cv::Mat terrain;
  cv::resize(noise, terrain, cv::Size(size, size), 0, 0, cv::INTER_CUBIC);
  const cv::Scalar base(uni(60, 110), uni(80, 130), uni(70, 120));
  terrain += base;
  cv::Mat grain(size, size, CV_32FC3);
  cv::setRNGSeed(static_cast<int>(rng() & 0x7fffffff));
  cv::randn(grain, cv::Scalar::all(0), cv::Scalar::all(8));
  terrain += grain;

  // Roads: thin gray lines that are not salient.
  const int roads = static_cast<int>(uni(1, 4));
  for (int i = 0; i < roads; ++i) {
    cv::Point a(static_cast<int>(uni(0, size)), 0), b(static_cast<int>(uni(0, size)), size - 1);
    if (u(rng) < 0.5) std::swap(a.x, a.y), std::swap(b.x, b.y);
    const double g = uni(120, 170);
    cv::line(terrain, a, b, cv::Scalar(g, g, g), std::max(1, size / 128));
  }

  cv::Mat gt = cv::Mat::zeros(size, size, CV_8U);
  if (with_objects) {
    const int objects = static_cast<int>(uni(1, 4));
    for (int i = 0; i < objects; ++i) {
      cv::Mat mask = cv::Mat::zeros(size, size, CV_8U);
      const cv::Point center(static_cast<int>(uni(0.15, 0.85) * size), static_cast<int>(uni(0.15, 0.85) * size));
      const double angle = uni(0, 180);
      switch (static_cast<int>(uni(0, 3))) {
        case 0:  // vessel
          cv::ellipse(mask, center, cv::Size(static_cast<int>(uni(0.06, 0.18) * size), static_cast<int>(uni(0.02, 0.06) * size)),
                      angle, 0, 360, cv::Scalar(255), cv::FILLED);
          break;
        case 1: {  // building / storage block
          cv::RotatedRect rr(center, cv::Size2f(static_cast<float>(uni(0.06, 0.2) * size), static_cast<float>(uni(0.06, 0.2) * size)),
                             static_cast<float>(angle));
          cv::Point2f pts[4];
          rr.points(pts);
          std::vector<cv::Point> poly(pts, pts + 4);
          cv::fillConvexPoly(mask, poly, cv::Scalar(255));
          break;
        }
        default: {  // aircraft: fuselage plus wings
          const int len = static_cast<int>(uni(0.08, 0.16) * size);
          cv::ellipse(mask, center, cv::Size(len, std::max(2, len / 6)), angle, 0, 360, cv::Scalar(255), cv::FILLED);
          cv::ellipse(mask, center, cv::Size(std::max(2, len * 2 / 3), std::max(2, len / 8)), angle + 90, 0, 360,
                      cv::Scalar(255), cv::FILLED);
          break;
        }
      }
      const cv::Scalar color(uni(150, 255), uni(150, 255), uni(150, 255));
      cv::Mat tint(size, size, CV_32FC3, color);
      tint.copyTo(terrain, mask);
      gt |= mask;
    }
  }
  cv::GaussianBlur(terrain, terrain, cv::Size(3, 3), 0.6);
  SyntheticScene scene;
  terrain.convertTo(scene.bgr, CV_8UC3);
  scene.gt = gt;
  return scene;
}

void write_synthetic_split(const fs::path& root, const std::string& split, int count, std::uint64_t seed, int size) {
  const auto img_dir = root / split / "image";
  const auto gt_dir = root / split / "GT";
  fs::create_directories(img_dir);
  fs::create_directories(gt_dir);
  for (int i = 0; i < count; ++i) {
    auto scene = synthesize_scene(seed, i, size);
    char stem[32];
    std::snprintf(stem, sizeof(stem), "syn_%04d", i);
    if (!cv::imwrite((img_dir / (std::string(stem) + ".png")).string(), scene.bgr) ||
        !cv::imwrite((gt_dir / (std::string(stem) + ".png")).string(), scene.gt))
      throw IoError("cannot write synthetic scene " + std::string(stem));
  }
}

}  // namespace mccsod
