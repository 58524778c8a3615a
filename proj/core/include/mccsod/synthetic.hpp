#pragma once

// Procedural remote-sensing-like scenes (textured terrain with roads and a
// few distinctly colored objects) for smoke runs and tests when no real
// dataset is mounted.

#include <cstdint>
#include <filesystem>
#include <string>

#include <opencv2/core/mat.hpp>

namespace mccsod {

struct SyntheticScene {
  cv::Mat bgr;  // CV_8UC3
  cv::Mat gt;   // CV_8U, 0 or 255
};

/// Deterministic in (seed, index). `with_objects = false` yields an all-background scene.
SyntheticScene synthesize_scene(std::uint64_t seed, int index, int size = 256, bool with_objects = true);

/// Writes <root>/<split>/image/<stem>.png and <root>/<split>/GT/<stem>.png for
/// `count` scenes, stems "syn_0000", "syn_0001", ...
void write_synthetic_split(const std::filesystem::path& root, const std::string& split, int count,
                           std::uint64_t seed, int size = 256);

}  // namespace mccsod
