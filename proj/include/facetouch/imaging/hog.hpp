#pragma once

#include <cstddef>
#include <vector>

namespace facetouch {

// Real-valued grayscale patch, row-major.
struct Patch {
  int width = 0;
  int height = 0;
  std::vector<double> pixels;

  Patch() = default;
  Patch(int w, int h, double fill = 0.0) : width(w), height(h), pixels(std::size_t(w) * h, fill) {}

  double& at(int x, int y) { return pixels[std::size_t(y) * width + x]; }
  double at(int x, int y) const { return pixels[std::size_t(y) * width + x]; }
};

// Horizontal mirror of a patch.
Patch flip_horizontal(const Patch& patch);

struct HogConfig {
  int face_width = 32;
  int face_height = 32;
  int half_width = 32;
  int half_height = 16;
  int cell = 8;
  int block_cells = 2;
  int block_stride = 8;
  int bins = 9;
  double clip = 0.2;
};

// Number of descriptor values for a w x h patch:
// ((w - block) / stride + 1) * ((h - block) / stride + 1) * block_cells^2 * bins.
std::size_t hog_length(int width, int height, const HogConfig& config);

// Descriptor position of each value after mirroring the patch horizontally:
// block columns and the cells inside each block reverse, and orientation bin
// b maps to (bins - 1 - b). The permutation is an involution.
std::vector<std::size_t> hog_mirror_permutation(int width, int height, const HogConfig& config);

// Dalal-Triggs style descriptor: [-1,0,1] gradients with edge clamping,
// unsigned orientations with linear interpolation between circular bins,
// per-cell histograms, L2-Hys block normalization. Throws DimensionMismatch
// when the patch cannot be tiled by the configured cells and blocks.
std::vector<double> hog(const Patch& patch, const HogConfig& config);

}  // namespace facetouch
