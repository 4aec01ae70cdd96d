#pragma once

#include <cstddef>
#include <vector>

namespace confidssl {

using Vec = std::vector<double>;

// Predictive distribution over classes; entries are positive and sum to 1.
using ProbVector = std::vector<double>;

// Dense row-major matrix, just enough for a small MLP.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  Vec data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  double& at(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double at(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
};

struct Instance {
  Vec features;
  std::size_t label = 0;
};

}  // namespace confidssl
