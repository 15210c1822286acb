#pragma once

#include <random>
#include <vector>

#include "nflow/params.hpp"
#include "nflow/verify.hpp"

namespace nflow::testing_support {

inline ParamSegment dense_segment(double duration, const Matrix& W, const Vector& b, double alpha = 0.0) {
  return ParamSegment{duration, W, Matrix(b), alpha};
}

inline ParamPath random_path(std::mt19937_64& rng, Structure structure, int channels, double scale,
                             const std::vector<double>& durations) {
  return verify::random_dense_path(rng, structure, channels, durations, scale);
}

inline Matrix random_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

inline Vector random_vector(std::mt19937_64& rng, Eigen::Index n, double scale = 1.0) {
  return random_matrix(rng, n, 1, scale).col(0);
}

}  // namespace nflow::testing_support
