#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>

namespace testing {

inline Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = n(rng);
  return m;
}

inline Eigen::VectorXd random_vector(Eigen::Index n, std::uint64_t seed) { return random_matrix(n, 1, seed); }

// B B^T + n I is comfortably SPD.
inline Eigen::MatrixXd random_spd(Eigen::Index n, std::uint64_t seed) {
  const Eigen::MatrixXd b = random_matrix(n, n, seed);
  return b * b.transpose() + static_cast<double>(n) * Eigen::MatrixXd::Identity(n, n);
}

}  // namespace testing

#include "clgm/model.hpp"

namespace testing {

// y = A x + offset + e with x ~ N(0, diag(prior_precision)^-1).
inline clgm::LgmSpec regression_spec(const Eigen::VectorXd& y, const Eigen::MatrixXd& a,
                                     const Eigen::VectorXd& prior_precision,
                                     clgm::LikelihoodFamily family) {
  clgm::LgmSpec spec;
  spec.y = y;
  spec.family = family;
  spec.structure.design = a;
  const Eigen::MatrixXd q = prior_precision.asDiagonal();
  spec.structure.precision = [q](const Eigen::VectorXd&) { return q; };
  spec.offset = Eigen::VectorXd::Zero(y.size());
  if (family.n_hyper() == 1) spec.hyper.push_back(clgm::precision_hyper("tau"));
  return spec;
}

// Intercept plus `p` uniform covariates.
inline Eigen::MatrixXd design_with_intercept(Eigen::Index n, Eigen::Index p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::MatrixXd x(n, p + 1);
  for (Eigen::Index i = 0; i < n; ++i) {
    x(i, 0) = 1.0;
    for (Eigen::Index j = 1; j <= p; ++j) x(i, j) = u(rng);
  }
  return x;
}

}  // namespace testing
