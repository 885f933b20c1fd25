#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "clgm/laplace.hpp"
#include "clgm/mh.hpp"
#include "clgm/model.hpp"

namespace clgm {

struct SimulatedDataset {
  std::string scenario;
  VectorXd y;
  MatrixXd covariates;  // NaN marks a removed (missing) cell
  std::vector<std::string> covariate_names;
  std::map<std::string, double> truth;
  std::vector<Index> missing_rows;
  VectorXd held_out;
  std::uint64_t seed = 0;
};

inline constexpr Index kSimulatedRows = 100;
inline constexpr Index kSimulatedMissing = 9;

SimulatedDataset simulate_linear(std::uint64_t seed);
SimulatedDataset simulate_poisson(std::uint64_t seed);
SimulatedDataset simulate_missing(std::uint64_t seed);

enum class ConditioningMode { OffsetBeta, MissingCovariate, SpatialLagRho, SpatialErrorLambda };

/// Base data plus the rule that turns a z_c draw into a concrete LgmSpec.
/// X holds every fixed-effect column (intercept included when present).
struct ConditionerSpec {
  ConditioningMode mode = ConditioningMode::OffsetBeta;
  VectorXd y;
  MatrixXd X;
  std::vector<std::string> column_names;
  VectorXd fixed_effect_precision;  // per column of X
  LikelihoodFamily family = LikelihoodFamily::gaussian_unknown();
  std::vector<HyperParameter> hyper;

  std::vector<Index> conditioned_columns;  // OffsetBeta
  Index missing_column = -1;               // MissingCovariate
  std::vector<Index> missing_rows;         // MissingCovariate
  MatrixXd W;                              // SpatialLagRho, SpatialErrorLambda

  Index zc_dim() const;
  void validate() const;
};

LgmSpec condition_offset_beta(const ConditionerSpec& spec, const VectorXd& beta);
LgmSpec condition_missing_covariate(const ConditionerSpec& spec, const VectorXd& imputed);
LgmSpec condition_spatial_lag(const ConditionerSpec& spec, double rho);
/// y = X beta + v, (I - lambda W) v = u: not part of the lag workflow, kept for
/// comparing the two spatial specifications on the same data.
LgmSpec condition_spatial_error(const ConditionerSpec& spec, double lambda);
LgmSpec condition(const ConditionerSpec& spec, const VectorXd& zc);

/// (I - rho W)^-1; throws SingularTransform when numerically singular.
MatrixXd spatial_filter_inverse(const MatrixXd& W, double rho);

/// Conditioner + Laplace engine as the MH target. Marginals are reported as
/// latent effects followed by hyperparameters (user scale).
ConditionalModel inla_model(ConditionerSpec spec);
std::vector<std::string> conditional_marginal_names(const ConditionerSpec& spec);

struct Scenario {
  std::string name;
  ConditionerSpec conditioner;
  ZcPrior prior;
  ProposalKernel kernel;
  VectorXd initial;
  std::vector<std::string> zc_names;
};

// Kernel sd 1/0.75 per coefficient (variance 1/0.75^2).
inline constexpr double kRegressionKernelSd = 1.0 / 0.75;

Scenario linear_scenario(const SimulatedDataset& data);
Scenario poisson_scenario(const SimulatedDataset& data);
Scenario missing_covariate_scenario(const SimulatedDataset& data);

struct HittersData {
  VectorXd salary;
  MatrixXd covariates;  // AtBat, Hits, HmRun, Runs, RBI
  std::vector<std::string> names;
};

struct NhanesData {
  VectorXd age;
  VectorXd bmi;  // NaN = missing
  VectorXd hyp;
  VectorXd chl;  // NaN = missing
};

struct ColumbusData {
  VectorXd crime;
  VectorXd income;
  VectorXd hvalue;
  MatrixXd W;  // row-standardized contiguity
};

HittersData load_hitters(const std::filesystem::path& dir);
NhanesData load_nhanes(const std::filesystem::path& dir);
ColumbusData load_columbus(const std::filesystem::path& dir);

/// Standardized covariates, centred and scaled response.
HittersData standardize(const HittersData& data);

Scenario lasso_scenario(const HittersData& standardized, double sigma, double kernel_sd = 0.1);
Scenario nhanes_scenario(const NhanesData& data);
Scenario columbus_scenario(const ColumbusData& data, double kernel_sd = 0.3, bool spatial_error = false);

}  // namespace clgm
