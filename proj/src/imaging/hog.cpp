#include "facetouch/imaging/hog.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "facetouch/core/error.hpp"

namespace facetouch {

namespace {

struct Grid {
  int cells_x;
  int cells_y;
  int blocks_x;
  int blocks_y;
};

Grid layout(int width, int height, const HogConfig& c) {
  const int block_px = c.block_cells * c.cell;
  if (width <= 0 || height <= 0 || c.cell <= 0 || c.bins <= 0 || c.block_stride <= 0 ||
      width % c.cell != 0 || height % c.cell != 0 || block_px > width || block_px > height ||
      (width - block_px) % c.block_stride != 0 || (height - block_px) % c.block_stride != 0 ||
      c.block_stride % c.cell != 0) {
    throw Error(ErrorCode::DimensionMismatch, "patch " + std::to_string(width) + "x" +
                                                  std::to_string(height) +
                                                  " does not fit the HOG cell/block grid");
  }
  return Grid{width / c.cell, height / c.cell, (width - block_px) / c.block_stride + 1,
              (height - block_px) / c.block_stride + 1};
}

}  // namespace

Patch flip_horizontal(const Patch& patch) {
  Patch out(patch.width, patch.height);
  for (int y = 0; y < patch.height; ++y) {
    for (int x = 0; x < patch.width; ++x) out.at(patch.width - 1 - x, y) = patch.at(x, y);
  }
  return out;
}

std::size_t hog_length(int width, int height, const HogConfig& config) {
  const Grid g = layout(width, height, config);
  return std::size_t(g.blocks_x) * g.blocks_y * config.block_cells * config.block_cells * config.bins;
}

std::vector<std::size_t> hog_mirror_permutation(int width, int height, const HogConfig& config) {
  const Grid g = layout(width, height, config);
  const int bc = config.block_cells;
  const int bins = config.bins;
  const int stride_cells = config.block_stride / config.cell;
  auto index = [&](int by, int bx, int cy, int cx, int b) {
    return ((std::size_t(by) * g.blocks_x + bx) * bc * bc + std::size_t(cy) * bc + cx) * bins + b;
  };
  std::vector<std::size_t> perm(hog_length(width, height, config));
  for (int by = 0; by < g.blocks_y; ++by) {
    for (int bx = 0; bx < g.blocks_x; ++bx) {
      for (int cy = 0; cy < bc; ++cy) {
        for (int cx = 0; cx < bc; ++cx) {
          // Absolute cell column bx*stride+cx mirrors to cells_x-1-(bx*stride+cx).
          const int mirrored_col = g.cells_x - 1 - (bx * stride_cells + cx);
          const int mbx = g.blocks_x - 1 - bx;
          const int mcx = mirrored_col - mbx * stride_cells;
          for (int b = 0; b < bins; ++b) {
            perm[index(by, bx, cy, cx, b)] = index(by, mbx, cy, mcx, bins - 1 - b);
          }
        }
      }
    }
  }
  return perm;
}

std::vector<double> hog(const Patch& patch, const HogConfig& config) {
  const Grid g = layout(patch.width, patch.height, config);
  if (patch.pixels.size() != std::size_t(patch.width) * patch.height) {
    throw Error(ErrorCode::DimensionMismatch, "patch buffer size does not match its dimensions");
  }
  const int w = patch.width;
  const int h = patch.height;
  const int bins = config.bins;
  const double bin_width = 180.0 / bins;

  std::vector<double> cells(std::size_t(g.cells_x) * g.cells_y * bins, 0.0);
  for (int y = 0; y < h; ++y) {
    const int ym = std::max(y - 1, 0);
    const int yp = std::min(y + 1, h - 1);
    for (int x = 0; x < w; ++x) {
      const int xm = std::max(x - 1, 0);
      const int xp = std::min(x + 1, w - 1);
      const double gx = patch.at(xp, y) - patch.at(xm, y);
      const double gy = patch.at(x, yp) - patch.at(x, ym);
      const double mag = std::hypot(gx, gy);
      if (mag == 0.0) continue;
      double theta = std::atan2(gy, gx) * 180.0 / std::numbers::pi;
      theta = std::fmod(theta + 360.0, 180.0);
      const double pos = theta / bin_width - 0.5;
      const double lower = std::floor(pos);
      const double frac = pos - lower;
      const int b0 = ((static_cast<int>(lower) % bins) + bins) % bins;
      const int b1 = (b0 + 1) % bins;
      double* cell = &cells[(std::size_t(y / config.cell) * g.cells_x + x / config.cell) * bins];
      cell[b0] += (1.0 - frac) * mag;
      cell[b1] += frac * mag;
    }
  }

  const int bc = config.block_cells;
  const int stride_cells = config.block_stride / config.cell;
  const std::size_t block_len = std::size_t(bc) * bc * bins;
  std::vector<double> out;
  out.reserve(std::size_t(g.blocks_x) * g.blocks_y * block_len);
  std::vector<double> block(block_len);
  for (int by = 0; by < g.blocks_y; ++by) {
    for (int bx = 0; bx < g.blocks_x; ++bx) {
      std::size_t k = 0;
      for (int cy = 0; cy < bc; ++cy) {
        for (int cx = 0; cx < bc; ++cx) {
          const double* cell =
              &cells[(std::size_t(by * stride_cells + cy) * g.cells_x + bx * stride_cells + cx) * bins];
          for (int b = 0; b < bins; ++b) block[k++] = cell[b];
        }
      }
      // L2-Hys: normalize, clip, renormalize. An all-zero block stays zero.
      double norm = 0.0;
      for (double v : block) norm += v * v;
      norm = std::sqrt(norm);
      if (norm > 1e-12) {
        double renorm = 0.0;
        for (double& v : block) {
          v = std::min(v / norm, config.clip);
          renorm += v * v;
        }
        renorm = std::sqrt(renorm);
        for (double& v : block) v = renorm > 0.0 ? v / renorm : 0.0;
      } else {
        std::fill(block.begin(), block.end(), 0.0);
      }
      out.insert(out.end(), block.begin(), block.end());
    }
  }
  return out;
}

}  // namespace facetouch
