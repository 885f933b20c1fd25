#pragma once

#include <Eigen/Dense>

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "clgm/marginal.hpp"
#include "clgm/mh.hpp"

namespace clgm {

/// Normal-Inverse-Gamma posterior for y = X beta + e, e ~ N(0, 1/tau), with
/// beta | tau ~ N(0, (tau Lambda0)^-1) and tau ~ Gamma(a0, b0).
struct NigPosterior {
  VectorXd mean;
  MatrixXd scale;  // V = Lambda_n^-1
  double shape = 0.0;
  double rate = 0.0;
  double log_evidence = 0.0;

  // Student-t with 2 shape dof, location mean_j, scale^2 (rate/shape) V_jj.
  double coefficient_density(Index j, double x) const;
  double coefficient_cdf(Index j, double x) const;
  Moments coefficient_moments(Index j) const;
  double precision_density(double tau) const;
  double precision_cdf(double tau) const;
  Moments precision_moments() const;

  GridDensity coefficient_marginal(Index j, std::size_t n_points = 4001) const;
  GridDensity precision_marginal(std::size_t n_points = 4001) const;
};

/// Rows with a NaN response are ignored.
NigPosterior conjugate_regression(const VectorXd& y, const MatrixXd& X, const MatrixXd& prior_precision,
                                  double a0, double b0);

/// Exact posterior for y = X beta + e with beta ~ N(0, diag(prior_precision)^-1)
/// independent of tau ~ Gamma(a0, b0). Conditionally on tau everything is
/// Gaussian, so tau is integrated numerically on a fine log-scale grid.
struct SemiConjugatePosterior {
  VectorXd log_tau;   // integration nodes
  VectorXd weights;   // normalized posterior mass per node
  MatrixXd means;     // beta mean per node (rows = nodes)
  MatrixXd sds;       // beta marginal sd per node
  double log_evidence = 0.0;

  GaussianMixture coefficient_mixture(Index j) const;
  Moments coefficient_moments(Index j) const;
  GridDensity coefficient_marginal(Index j, std::size_t n_points = 4001) const;
  GridDensity precision_marginal() const;
  Moments precision_moments() const;
};

SemiConjugatePosterior semi_conjugate_regression(const VectorXd& y, const MatrixXd& X,
                                                 const VectorXd& prior_precision, double a0, double b0,
                                                 std::size_t n_nodes = 2001);

using LogDensity = std::function<double(const VectorXd&)>;

struct FullMcmcConfig {
  std::size_t iters = 10500;
  std::size_t burn_in = 500;
  std::size_t thin = 10;
  std::uint64_t seed = 1;
  VectorXd initial;
  VectorXd step_sds;
  // Learn a full proposal covariance during burn-in (frozen afterwards).
  bool adapt = true;
  std::vector<std::string> names;
};

/// Random-walk Metropolis over the complete parameter vector.
ChainResult full_mcmc(const LogDensity& log_posterior, const FullMcmcConfig& config);

/// Explicit joint log posterior of a regression, written without the
/// Laplace machinery. Parameter layout:
///   [beta (one per column of X)] [log tau, Gaussian only] [rho, spatial only] [imputed cells]
struct FullRegressionModel {
  enum class Family { Gaussian, Poisson };
  Family family = Family::Gaussian;
  VectorXd y;  // NaN = missing response
  MatrixXd X;  // NaN cells are imputed parameters (column-major order)
  std::vector<std::string> column_names;
  std::vector<PriorTerm> coefficient_priors;
  double tau_shape = 1.0;
  double tau_rate = 0.00005;
  std::vector<PriorTerm> imputation_priors;
  std::vector<std::string> imputed_names;  // defaults to <column>_row<r>
  std::optional<MatrixXd> W;
  bool spatial_error = false;  // y = X beta + v, (I - rho W) v = e
  double rho_lower = -1.5;
  double rho_upper = 1.0;

  void prepare();  // caches missing cells and eigenvalues of W
  Index dim() const;
  double log_density(const VectorXd& params) const;
  std::vector<std::string> names() const;
  // Parameters on the reported scale (tau instead of log tau).
  VectorXd reported(const VectorXd& params) const;

  Index tau_index() const;
  Index rho_index() const;
  Index imputed_offset() const;

 private:
  std::vector<std::pair<Index, Index>> missing_cells_;
  Eigen::VectorXcd w_eigenvalues_;
};

/// argmin ||y - b0 - X b||^2 + lambda ||b||_1 by cyclic coordinate descent.
VectorXd lasso_coordinate_descent(const VectorXd& y, const MatrixXd& X, double lambda,
                                  double tolerance = 1e-12, int max_sweeps = 100000);

}  // namespace clgm
