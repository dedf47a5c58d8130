#pragma once

#include "fmicl/objective.hpp"

#include <cmath>
#include <random>

namespace fmicl::testing {

inline Matrix
random_unit_rows(std::mt19937_64& rng, Eigen::Index n, Eigen::Index d)
{
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix m(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index k = 0; k < d; ++k)
      m(i, k) = normal(rng);
    m.row(i).normalize();
  }
  return m;
}

inline EmbeddingBatch
random_batch(std::uint64_t seed, Eigen::Index n, Eigen::Index d)
{
  std::mt19937_64 rng(seed);
  Matrix x = random_unit_rows(rng, n, d);
  Matrix y = random_unit_rows(rng, n, d);
  return EmbeddingBatch(std::move(x), std::move(y));
}

inline EmbeddingBatch
antipodal_batch()
{
  Matrix x(2, 2);
  x << 1, 0, -1, 0;
  return EmbeddingBatch(x, x);
}

inline EmbeddingBatch
coincident_batch(Eigen::Index n = 4, Eigen::Index d = 3)
{
  Matrix x = Matrix::Zero(n, d);
  x.col(0).setOnes();
  return EmbeddingBatch(x, x);
}

//! max |a - b| / max |b|
inline double
normwise_relative_error(const Matrix& a, const Matrix& b)
{
  return (a - b).cwiseAbs().maxCoeff() / b.cwiseAbs().maxCoeff();
}

} // namespace fmicl::testing
