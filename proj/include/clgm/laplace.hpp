#pragma once

#include <Eigen/Dense>

#include <vector>

#include "clgm/gaussian_core.hpp"
#include "clgm/marginal.hpp"
#include "clgm/model.hpp"

namespace clgm {

inline constexpr int kMaxNewtonIterations = 100;
inline constexpr double kNewtonTolerance = 1e-8;

// Hyperparameter grid constants.
inline constexpr double kGridStepInSd = 0.75;
inline constexpr double kGridLogDrop = 3.0;
inline constexpr double kHessianStep = 1e-3;
inline constexpr double kModeTolerance = 1e-6;
inline constexpr int kMaxBracketEvaluations = 200;
inline constexpr int kMaxSimplexEvaluations = 500;

/// Gaussian approximation to pi(x | theta, y) at the conditional mode.
struct GaussianApprox {
  VectorXd mode;
  CholFactor<double> precision;  // Q(theta) + A^T C A at the mode
  double log_det_precision = 0.0;
  int newton_iterations = 0;
};

GaussianApprox gaussian_approx(const LgmSpec& spec, const VectorXd& theta);

/// Laplace evidence at fixed theta (internal scale), hyperprior excluded.
double log_mlik_given_theta(const LgmSpec& spec, const VectorXd& theta);

struct GridPoint {
  VectorXd theta;                 // internal scale
  Eigen::VectorXi index;          // lattice position relative to the mode
  double log_posterior = 0.0;     // log_mlik_given_theta + log prior
  double weight = 0.0;            // normalized
  VectorXd latent_mean;
  VectorXd latent_variance;
};

struct ThetaGrid {
  std::vector<GridPoint> points;
  VectorXd mode_theta;
  MatrixXd mode_hessian;
  VectorXd step;        // lattice spacing per axis
  double volume = 1.0;  // product of steps
  double log_evidence = 0.0;
};

/// Locates the hyperparameter mode, lays an axis-aligned grid around it and
/// records the Gaussian approximation at every grid point.
ThetaGrid explore_theta_grid(const LgmSpec& spec);

/// log of sum_g exp(g(theta_g)) * volume.
double conditional_log_mlik(const LgmSpec& spec);

std::vector<MarginalDensity> latent_marginals(const LgmSpec& spec, const ThetaGrid& grid);

/// Hyperparameter marginals on the user scale (e.g. precision, not log precision).
std::vector<MarginalDensity> theta_marginals(const LgmSpec& spec, const ThetaGrid& grid);

struct ConditionalFit {
  double log_mlik = 0.0;
  ThetaGrid grid;
  std::vector<MarginalDensity> latent;
  std::vector<MarginalDensity> hyper;
};

ConditionalFit fit_conditional(const LgmSpec& spec);

}  // namespace clgm
