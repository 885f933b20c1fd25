#include "clgm/model.hpp"

#include <cmath>
#include <numbers>

#include "clgm/errors.hpp"
#include "clgm/gaussian_core.hpp"

namespace clgm {

namespace {
constexpr double kLog2Pi = 1.8378770664093454836;
}

LikelihoodFamily LikelihoodFamily::gaussian_known(double precision) {
  if (!(precision > 0.0)) throw DomainError("gaussian_known: precision must be positive");
  return {FamilyKind::GaussianKnownPrecision, precision};
}

double HyperParameter::to_user(double internal) const {
  return transform == HyperTransform::Log ? std::exp(internal) : internal;
}

double HyperParameter::to_internal(double user) const {
  return transform == HyperTransform::Log ? std::log(user) : user;
}

double HyperParameter::log_prior_internal(double internal) const {
  const double user = to_user(internal);
  if (!(user >= lower && user <= upper)) return -std::numeric_limits<double>::infinity();
  const double lp = log_prior ? log_prior(user) : 0.0;
  return transform == HyperTransform::Log ? lp + internal : lp;
}

double gamma_log_density(double x, double shape, double rate) {
  if (!(x > 0.0)) return -std::numeric_limits<double>::infinity();
  return shape * std::log(rate) - std::lgamma(shape) + (shape - 1.0) * std::log(x) - rate * x;
}

HyperParameter precision_hyper(std::string name, double shape, double rate) {
  HyperParameter h;
  h.name = std::move(name);
  h.transform = HyperTransform::Log;
  h.log_prior = [shape, rate](double tau) { return gamma_log_density(tau, shape, rate); };
  h.lower = 0.0;
  return h;
}

Index LgmSpec::n_observed() const {
  Index n = 0;
  for (Index i = 0; i < y.size(); ++i) n += observed(i) ? 1 : 0;
  return n;
}

VectorXd LgmSpec::to_user(const VectorXd& theta_internal) const {
  VectorXd out(theta_internal.size());
  for (Index k = 0; k < theta_internal.size(); ++k) out(k) = hyper[k].to_user(theta_internal(k));
  return out;
}

MatrixXd LgmSpec::prior_precision(const VectorXd& theta_internal) const {
  return structure.precision(to_user(theta_internal));
}

double LgmSpec::observation_precision(const VectorXd& theta_internal) const {
  switch (family.kind) {
    case FamilyKind::GaussianKnownPrecision:
      return family.fixed_precision;
    case FamilyKind::GaussianUnknownPrecision:
      return hyper.at(0).to_user(theta_internal(0));
    case FamilyKind::PoissonLog:
      break;
  }
  return 1.0;
}

void LgmSpec::validate() const {
  if (structure.design.rows() != y.size())
    throw DimensionMismatch("LgmSpec: design rows do not match the response length");
  if (offset.size() != y.size())
    throw DimensionMismatch("LgmSpec: offset length does not match the response length");
  if (!offset.allFinite()) throw DomainError("LgmSpec: offset must be finite");
  if (!structure.precision) throw DimensionMismatch("LgmSpec: missing latent precision");
  if (family.n_hyper() > n_hyper())
    throw DimensionMismatch("LgmSpec: likelihood precision hyperparameter missing");
  if (n_hyper() > 2) throw DimensionMismatch("LgmSpec: at most two hyperparameters are supported");
  if (!latent_names.empty() && static_cast<Index>(latent_names.size()) != n_latent())
    throw DimensionMismatch("LgmSpec: latent_names has the wrong length");
  for (Index i = 0; i < y.size(); ++i) {
    if (!observed(i)) continue;
    if (!structure.design.row(i).allFinite())
      throw DomainError("LgmSpec: design row of an observed response is not finite");
    if (family.kind == FamilyKind::PoissonLog && (y(i) < 0.0 || y(i) != std::floor(y(i))))
      throw DomainError("LgmSpec: Poisson responses must be non-negative integers");
  }
}

VectorXd linear_predictor(const LgmSpec& spec, const VectorXd& x) {
  VectorXd eta = spec.offset;
  for (Index i = 0; i < spec.n_obs(); ++i)
    if (spec.observed(i)) eta(i) += spec.structure.design.row(i).dot(x);
  return eta;
}

LoglikTerms loglik_terms(const LgmSpec& spec, const VectorXd& eta, const VectorXd& theta_internal) {
  const Index n = spec.n_obs();
  if (eta.size() != n) throw DimensionMismatch("loglik_terms: eta has the wrong length");
  LoglikTerms t{VectorXd::Zero(n), VectorXd::Zero(n), VectorXd::Zero(n)};
  const bool poisson = spec.family.kind == FamilyKind::PoissonLog;
  const double tau = spec.observation_precision(theta_internal);
  const double gauss_const = 0.5 * (std::log(tau) - kLog2Pi);
  for (Index i = 0; i < n; ++i) {
    if (!spec.observed(i)) continue;
    const double yi = spec.y(i);
    if (poisson) {
      if (yi < 0.0 || yi != std::floor(yi))
        throw DomainError("loglik_terms: Poisson response must be a non-negative integer");
      const double mu = std::exp(eta(i));
      t.value(i) = yi * eta(i) - mu - std::lgamma(yi + 1.0);
      t.d1(i) = yi - mu;
      t.c(i) = std::max(mu, kCurvatureFloor);
    } else {
      const double r = yi - eta(i);
      t.value(i) = gauss_const - 0.5 * tau * r * r;
      t.d1(i) = tau * r;
      t.c(i) = std::max(tau, kCurvatureFloor);
    }
  }
  return t;
}

double gaussian_log_density(const MatrixXd& q, const VectorXd& x) {
  const auto f = cholesky(q);
  return 0.5 * log_det(f) - 0.5 * static_cast<double>(x.size()) * kLog2Pi - 0.5 * x.dot(q * x);
}

double log_hyper_prior(const LgmSpec& spec, const VectorXd& theta_internal) {
  double lp = 0.0;
  for (Index k = 0; k < spec.n_hyper(); ++k) lp += spec.hyper[k].log_prior_internal(theta_internal(k));
  return lp;
}

double log_joint(const LgmSpec& spec, const VectorXd& x, const VectorXd& theta_internal) {
  if (x.size() != spec.n_latent()) throw DimensionMismatch("log_joint: x has the wrong length");
  if (theta_internal.size() != spec.n_hyper())
    throw DimensionMismatch("log_joint: theta has the wrong length");
  const VectorXd eta = linear_predictor(spec, x);
  return loglik_terms(spec, eta, theta_internal).total() + spec.log_jacobian +
         gaussian_log_density(spec.prior_precision(theta_internal), x) +
         log_hyper_prior(spec, theta_internal);
}

}  // namespace clgm
