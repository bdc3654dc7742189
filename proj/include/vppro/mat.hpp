#pragma once

#include <cassert>
#include <vector>

namespace vppro {

// Dense node-by-period (or line-by-period) matrix of doubles.
struct Mat {
  int rows = 0, cols = 0;
  std::vector<double> data;

  Mat() = default;
  Mat(int r, int c, double fill = 0.0) : rows(r), cols(c), data(static_cast<size_t>(r) * c, fill) {}

  double& at(int i, int j) {
    assert(i >= 0 && i < rows && j >= 0 && j < cols);
    return data[static_cast<size_t>(i) * cols + j];
  }
  double at(int i, int j) const {
    assert(i >= 0 && i < rows && j >= 0 && j < cols);
    return data[static_cast<size_t>(i) * cols + j];
  }
  bool same_shape(const Mat& o) const { return rows == o.rows && cols == o.cols; }
};

}  // namespace vppro
