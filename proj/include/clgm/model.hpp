#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

namespace clgm {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

// Fixed-effect prior precisions used throughout the model zoo.
inline constexpr double kFixedEffectPrecision = 0.001;
// Stand-in for a flat (improper) intercept prior.
inline constexpr double kFlatPrecision = 1e-9;
// Floor on the negative second derivative of each log-likelihood term.
inline constexpr double kCurvatureFloor = 1e-12;

enum class FamilyKind { GaussianKnownPrecision, GaussianUnknownPrecision, PoissonLog };

struct LikelihoodFamily {
  FamilyKind kind = FamilyKind::GaussianUnknownPrecision;
  double fixed_precision = 1.0;

  static LikelihoodFamily gaussian_known(double precision);
  static LikelihoodFamily gaussian_unknown() { return {FamilyKind::GaussianUnknownPrecision, 1.0}; }
  static LikelihoodFamily poisson_log() { return {FamilyKind::PoissonLog, 1.0}; }

  // Number of hyperparameters owned by the likelihood (0 or 1).
  int n_hyper() const { return kind == FamilyKind::GaussianUnknownPrecision ? 1 : 0; }
};

enum class HyperTransform { Identity, Log };

/// One hyperparameter. The engine works on the internal scale; the prior is
/// specified on the user scale and the Jacobian is added when needed.
struct HyperParameter {
  std::string name;
  HyperTransform transform = HyperTransform::Log;
  std::function<double(double)> log_prior;  // user scale
  double lower = 0.0;
  double upper = std::numeric_limits<double>::infinity();
  double initial = 0.0;  // internal scale start for the mode search

  double to_user(double internal) const;
  double to_internal(double user) const;
  double log_prior_internal(double internal) const;
};

/// Gamma(shape, rate) prior on a precision, explored on log scale.
inline constexpr double kDefaultPrecisionShape = 1.0;
inline constexpr double kDefaultPrecisionRate = 0.00005;

HyperParameter precision_hyper(std::string name, double shape = kDefaultPrecisionShape,
                               double rate = kDefaultPrecisionRate);

double gamma_log_density(double x, double shape, double rate);

/// Latent field x with prior N(0, Q(theta)^-1) mapped to the linear
/// predictor eta = A x + offset.
struct LatentStructure {
  MatrixXd design;
  // Receives the user-scale hyperparameter vector.
  std::function<MatrixXd(const VectorXd&)> precision;

  Index n_latent() const { return design.cols(); }
};

/// A (conditioned) latent Gaussian model. Missing responses are NaN.
/// Hyperparameter order: likelihood precision first (if any), then latent ones.
struct LgmSpec {
  VectorXd y;
  LikelihoodFamily family;
  LatentStructure structure;
  VectorXd offset;
  std::vector<HyperParameter> hyper;
  std::vector<std::string> latent_names;
  // Constant added to the log-likelihood (e.g. |det| of a response transform).
  double log_jacobian = 0.0;

  Index n_obs() const { return y.size(); }
  Index n_latent() const { return structure.n_latent(); }
  Index n_hyper() const { return static_cast<Index>(hyper.size()); }
  bool observed(Index i) const { return !std::isnan(y(i)); }
  Index n_observed() const;

  VectorXd to_user(const VectorXd& theta_internal) const;
  MatrixXd prior_precision(const VectorXd& theta_internal) const;
  // Likelihood precision for Gaussian families, 1 otherwise.
  double observation_precision(const VectorXd& theta_internal) const;

  // Throws DimensionMismatch / DomainError on an inconsistent spec.
  void validate() const;
};

/// Per-observation log-likelihood, first derivative and negated second
/// derivative w.r.t. eta. Entries for missing observations are zero.
struct LoglikTerms {
  VectorXd value;
  VectorXd d1;
  VectorXd c;

  double total() const { return value.sum(); }
};

LoglikTerms loglik_terms(const LgmSpec& spec, const VectorXd& eta, const VectorXd& theta_internal);

VectorXd linear_predictor(const LgmSpec& spec, const VectorXd& x);

/// log pi(y|x,theta) + log pi(x|theta) + log pi(theta), theta on the internal scale.
double log_joint(const LgmSpec& spec, const VectorXd& x, const VectorXd& theta_internal);

/// Zero-mean Gaussian log-density under precision q (normalizing |Q|^{1/2}).
double gaussian_log_density(const MatrixXd& q, const VectorXd& x);

double log_hyper_prior(const LgmSpec& spec, const VectorXd& theta_internal);

}  // namespace clgm
