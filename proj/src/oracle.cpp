#include "clgm/oracle.hpp"

#include <boost/math/distributions/gamma.hpp>
#include <boost/math/distributions/students_t.hpp>

#include <cmath>

#include "clgm/errors.hpp"
#include "clgm/gaussian_core.hpp"

namespace clgm {

namespace {
constexpr double kLog2Pi = 1.8378770664093454836;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Observed rows of (y, X).
std::pair<VectorXd, MatrixXd> observed_rows(const VectorXd& y, const MatrixXd& X) {
  std::vector<Index> rows;
  for (Index i = 0; i < y.size(); ++i)
    if (!std::isnan(y(i))) rows.push_back(i);
  VectorXd yo(static_cast<Index>(rows.size()));
  MatrixXd xo(yo.size(), X.cols());
  for (Index k = 0; k < yo.size(); ++k) {
    yo(k) = y(rows[static_cast<std::size_t>(k)]);
    xo.row(k) = X.row(rows[static_cast<std::size_t>(k)]);
  }
  return {yo, xo};
}

double t_scale(const NigPosterior& p, Index j) { return std::sqrt(p.rate / p.shape * p.scale(j, j)); }
}  // namespace

double NigPosterior::coefficient_density(Index j, double x) const {
  const double s = t_scale(*this, j);
  boost::math::students_t_distribution<double> t(2.0 * shape);
  return boost::math::pdf(t, (x - mean(j)) / s) / s;
}

double NigPosterior::coefficient_cdf(Index j, double x) const {
  boost::math::students_t_distribution<double> t(2.0 * shape);
  return boost::math::cdf(t, (x - mean(j)) / t_scale(*this, j));
}

Moments NigPosterior::coefficient_moments(Index j) const {
  const double nu = 2.0 * shape;
  const double s = t_scale(*this, j);
  return {mean(j), nu > 2.0 ? s * std::sqrt(nu / (nu - 2.0)) : std::numeric_limits<double>::infinity()};
}

double NigPosterior::precision_density(double tau) const {
  if (!(tau > 0.0)) return 0.0;
  return boost::math::pdf(boost::math::gamma_distribution<double>(shape, 1.0 / rate), tau);
}

double NigPosterior::precision_cdf(double tau) const {
  if (!(tau > 0.0)) return 0.0;
  return boost::math::cdf(boost::math::gamma_distribution<double>(shape, 1.0 / rate), tau);
}

Moments NigPosterior::precision_moments() const { return {shape / rate, std::sqrt(shape) / rate}; }

GridDensity NigPosterior::coefficient_marginal(Index j, std::size_t n_points) const {
  const Moments m = coefficient_moments(j);
  GridDensity g;
  g.x = VectorXd::LinSpaced(static_cast<Index>(n_points), m.mean - 10.0 * m.sd, m.mean + 10.0 * m.sd);
  g.density = g.x.unaryExpr([&](double x) { return coefficient_density(j, x); });
  return normalize(std::move(g));
}

GridDensity NigPosterior::precision_marginal(std::size_t n_points) const {
  boost::math::gamma_distribution<double> gd(shape, 1.0 / rate);
  const double lo = boost::math::quantile(gd, 1e-9);
  const double hi = boost::math::quantile(gd, 1.0 - 1e-9);
  GridDensity g;
  g.x = VectorXd::LinSpaced(static_cast<Index>(n_points), lo, hi);
  g.density = g.x.unaryExpr([&](double t) { return precision_density(t); });
  return normalize(std::move(g));
}

NigPosterior conjugate_regression(const VectorXd& y, const MatrixXd& X, const MatrixXd& prior_precision,
                                  double a0, double b0) {
  if (X.rows() != y.size()) throw DimensionMismatch("conjugate_regression: X rows differ from y");
  if (prior_precision.rows() != X.cols() || prior_precision.cols() != X.cols())
    throw DimensionMismatch("conjugate_regression: prior precision has the wrong size");
  const auto [yo, xo] = observed_rows(y, X);
  const Index n = yo.size();
  const Index p = X.cols();
  if (n > 0) {
    Eigen::ColPivHouseholderQR<MatrixXd> qr(xo);
    if (qr.rank() < std::min(n, p))
      throw RankDeficient("conjugate_regression: design is rank deficient");
  }
  const MatrixXd lambda_n = xo.transpose() * xo + prior_precision;
  const auto fn = cholesky(lambda_n);
  const auto f0 = cholesky(prior_precision);
  NigPosterior post;
  post.mean = solve_spd(fn, VectorXd(xo.transpose() * yo));
  post.scale = fn.llt().solve(MatrixXd::Identity(p, p));
  post.shape = a0 + 0.5 * static_cast<double>(n);
  post.rate = b0 + 0.5 * (yo.squaredNorm() - post.mean.dot(lambda_n * post.mean));
  post.log_evidence = -0.5 * static_cast<double>(n) * kLog2Pi + 0.5 * log_det(f0) - 0.5 * log_det(fn) +
                      a0 * std::log(b0) - post.shape * std::log(post.rate) + std::lgamma(post.shape) -
                      std::lgamma(a0);
  return post;
}

SemiConjugatePosterior semi_conjugate_regression(const VectorXd& y, const MatrixXd& X,
                                                 const VectorXd& prior_precision, double a0, double b0,
                                                 std::size_t n_nodes) {
  if (X.rows() != y.size() || prior_precision.size() != X.cols())
    throw DimensionMismatch("semi_conjugate_regression: inconsistent dimensions");
  if (n_nodes < 11) throw ConfigError("semi_conjugate_regression: too few nodes");
  const auto [yo, xo] = observed_rows(y, X);
  const Index n = yo.size();
  const Index p = X.cols();
  const MatrixXd xtx = xo.transpose() * xo;
  const VectorXd xty = xo.transpose() * yo;
  const double yty = yo.squaredNorm();
  const double log_det_prior = prior_precision.array().log().sum();

  struct Node {
    double log_post;
    VectorXd mean;
    VectorXd sd;
  };
  // log p(y | tau) + log p(log tau)
  auto evaluate = [&](double lt) {
    const double tau = std::exp(lt);
    MatrixXd post = tau * xtx;
    post.diagonal() += prior_precision;
    const auto f = cholesky(post);
    Node node;
    node.mean = solve_spd(f, VectorXd(tau * xty));
    node.sd = diag_of_inverse(f).cwiseSqrt();
    const double quad = tau * yty - tau * xty.dot(node.mean);
    node.log_post = 0.5 * static_cast<double>(n) * (lt - kLog2Pi) + 0.5 * log_det_prior - 0.5 * log_det(f) -
                    0.5 * quad + a0 * std::log(b0) - std::lgamma(a0) + a0 * lt - b0 * tau;
    return node;
  };

  // Locate the mode of log tau, then span +-14 curvature sds.
  double lo = -30.0, hi = 30.0;
  for (int it = 0; it < 200; ++it) {
    const double m1 = lo + (hi - lo) * 0.381966;
    const double m2 = hi - (hi - lo) * 0.381966;
    if (evaluate(m1).log_post < evaluate(m2).log_post) lo = m1;
    else hi = m2;
  }
  const double mode = 0.5 * (lo + hi);
  const double h = 1e-3;
  const double curv =
      (evaluate(mode + h).log_post - 2.0 * evaluate(mode).log_post + evaluate(mode - h).log_post) / (h * h);
  const double sd = 1.0 / std::sqrt(std::max(-curv, 1e-8));

  SemiConjugatePosterior out;
  const Index m = static_cast<Index>(n_nodes);
  out.log_tau = VectorXd::LinSpaced(m, mode - 14.0 * sd, mode + 14.0 * sd);
  out.means.resize(m, p);
  out.sds.resize(m, p);
  VectorXd lp(m);
  for (Index k = 0; k < m; ++k) {
    Node node = evaluate(out.log_tau(k));
    lp(k) = node.log_post;
    out.means.row(k) = node.mean.transpose();
    out.sds.row(k) = node.sd.transpose();
  }
  const double step = out.log_tau(1) - out.log_tau(0);
  const double top = lp.maxCoeff();
  const VectorXd w = (lp.array() - top).exp();
  out.log_evidence = top + std::log(w.sum() * step);
  out.weights = w / w.sum();
  return out;
}

GaussianMixture SemiConjugatePosterior::coefficient_mixture(Index j) const {
  GaussianMixture g;
  g.means = means.col(j);
  g.sds = sds.col(j);
  g.weights = weights;
  return g;
}

Moments SemiConjugatePosterior::coefficient_moments(Index j) const {
  return moments(MarginalDensity(coefficient_mixture(j)));
}

GridDensity SemiConjugatePosterior::coefficient_marginal(Index j, std::size_t n_points) const {
  const GaussianMixture g = coefficient_mixture(j);
  const Moments mo = coefficient_moments(j);
  GridDensity out;
  out.x = VectorXd::LinSpaced(static_cast<Index>(n_points), mo.mean - 10.0 * mo.sd, mo.mean + 10.0 * mo.sd);
  out.density = out.x.unaryExpr([&](double x) { return g.density(x); });
  return normalize(std::move(out));
}

GridDensity SemiConjugatePosterior::precision_marginal() const {
  // Node masses -> density in tau (divide by the Jacobian d tau / d log tau).
  const double step = log_tau(1) - log_tau(0);
  GridDensity out;
  out.x = log_tau.array().exp();
  out.density = weights.array() / step / out.x.array();
  return normalize(std::move(out));
}

Moments SemiConjugatePosterior::precision_moments() const {
  const VectorXd tau = log_tau.array().exp();
  const double mean = weights.dot(tau);
  const double second = weights.dot(tau.cwiseProduct(tau));
  return {mean, std::sqrt(std::max(0.0, second - mean * mean))};
}

ChainResult full_mcmc(const LogDensity& log_posterior, const FullMcmcConfig& config) {
  if (!(config.iters > config.burn_in)) throw ConfigError("full_mcmc: iters must exceed burn_in");
  if (config.thin < 1) throw ConfigError("full_mcmc: thin must be at least 1");
  const Index d = config.initial.size();
  if (config.step_sds.size() != d) throw ConfigError("full_mcmc: step_sds dimension mismatch");

  Rng rng(config.seed);
  ChainResult result;
  result.seed = config.seed;
  result.names = config.names;
  const std::size_t kept = (config.iters - config.burn_in) / config.thin;
  result.samples.resize(static_cast<Index>(kept), d);
  result.log_cml.resize(static_cast<Index>(kept));

  VectorXd x = config.initial;
  double lp = log_posterior(x);
  if (!std::isfinite(lp)) throw ConfigError("full_mcmc: log posterior not finite at the start point");

  // Proposal: L z with L the Cholesky factor of the proposal covariance.
  MatrixXd chol = config.step_sds.asDiagonal();
  double log_scale = 0.0;
  VectorXd run_mean = VectorXd::Zero(d);
  MatrixXd run_m2 = MatrixXd::Zero(d, d);
  double n_seen = 0.0;
  const std::size_t adapt_start = std::max<std::size_t>(200, static_cast<std::size_t>(20 * d));
  const double optimal = 2.38 * 2.38 / static_cast<double>(d);

  std::size_t row = 0;
  for (std::size_t j = 0; j < config.iters; ++j) {
    const bool burning = j < config.burn_in;
    VectorXd z(d);
    for (Index k = 0; k < d; ++k) z(k) = rng.normal();
    const VectorXd prop = x + std::exp(log_scale) * (chol * z);
    const double lp_prop = log_posterior(prop);
    const double u = rng.uniform();
    const bool accept = std::isfinite(lp_prop) && u < std::exp(std::min(0.0, lp_prop - lp));
    if (accept) {
      x = prop;
      lp = lp_prop;
    }
    if (burning && config.adapt) {
      n_seen += 1.0;
      const VectorXd delta = x - run_mean;
      run_mean += delta / n_seen;
      run_m2 += delta * (x - run_mean).transpose();
      const double gain = 1.0 / std::pow(static_cast<double>(j + 1), 0.6);
      log_scale += gain * ((accept ? 1.0 : 0.0) - 0.234);
      if (j + 1 >= adapt_start && (j + 1) % 100 == 0) {
        MatrixXd cov = run_m2 / (n_seen - 1.0) * optimal;
        cov.diagonal().array() += 1e-10 * (1.0 + cov.diagonal().array().abs());
        Eigen::LLT<MatrixXd> llt(cov);
        if (llt.info() == Eigen::Success) {
          chol = llt.matrixL();
          log_scale = 0.0;
        }
      }
    }
    if (!burning) {
      ++result.proposals;
      if (accept) ++result.accepted;
      if ((j + 1 - config.burn_in) % config.thin == 0 && row < kept) {
        result.samples.row(static_cast<Index>(row)) = x.transpose();
        result.log_cml(static_cast<Index>(row)) = lp;
        result.steps.push_back(j + 1);
        ++row;
      }
    }
  }
  result.kernel_scale = std::exp(log_scale);
  return result;
}

void FullRegressionModel::prepare() {
  missing_cells_.clear();
  for (Index c = 0; c < X.cols(); ++c)
    for (Index r = 0; r < X.rows(); ++r)
      if (std::isnan(X(r, c))) missing_cells_.emplace_back(r, c);
  if (imputation_priors.size() != missing_cells_.size())
    throw DimensionMismatch("FullRegressionModel: one imputation prior per missing cell is required");
  if (coefficient_priors.size() != static_cast<std::size_t>(X.cols()))
    throw DimensionMismatch("FullRegressionModel: one coefficient prior per column is required");
  if (!imputed_names.empty() && imputed_names.size() != missing_cells_.size())
    throw DimensionMismatch("FullRegressionModel: one name per missing cell is required");
  if (W) w_eigenvalues_ = Eigen::EigenSolver<MatrixXd>(*W, false).eigenvalues();
}

Index FullRegressionModel::tau_index() const { return family == Family::Gaussian ? X.cols() : -1; }

Index FullRegressionModel::rho_index() const {
  return W ? X.cols() + (family == Family::Gaussian ? 1 : 0) : -1;
}

Index FullRegressionModel::imputed_offset() const {
  return X.cols() + (family == Family::Gaussian ? 1 : 0) + (W ? 1 : 0);
}

Index FullRegressionModel::dim() const {
  return imputed_offset() + static_cast<Index>(missing_cells_.size());
}

std::vector<std::string> FullRegressionModel::names() const {
  std::vector<std::string> out = column_names;
  if (family == Family::Gaussian) out.push_back("tau");
  if (W) out.push_back(spatial_error ? "lambda" : "rho");
  if (!imputed_names.empty()) {
    out.insert(out.end(), imputed_names.begin(), imputed_names.end());
    return out;
  }
  for (const auto& [r, c] : missing_cells_)
    out.push_back(column_names[static_cast<std::size_t>(c)] + "_row" + std::to_string(r + 1));
  return out;
}

VectorXd FullRegressionModel::reported(const VectorXd& params) const {
  VectorXd out = params;
  if (family == Family::Gaussian) out(tau_index()) = std::exp(params(tau_index()));
  return out;
}

double FullRegressionModel::log_density(const VectorXd& params) const {
  const Index p = X.cols();
  double lp = 0.0;
  for (Index k = 0; k < p; ++k) lp += coefficient_priors[static_cast<std::size_t>(k)].log_density(params(k));
  MatrixXd design = X;
  const Index off = imputed_offset();
  for (std::size_t m = 0; m < missing_cells_.size(); ++m) {
    const double v = params(off + static_cast<Index>(m));
    lp += imputation_priors[m].log_density(v);
    design(missing_cells_[m].first, missing_cells_[m].second) = v;
  }
  if (!std::isfinite(lp)) return kNegInf;
  const VectorXd beta = params.head(p);

  if (family == Family::Poisson) {
    for (Index i = 0; i < y.size(); ++i) {
      if (std::isnan(y(i))) continue;
      const double eta = design.row(i).dot(beta);
      lp += y(i) * eta - std::exp(eta) - std::lgamma(y(i) + 1.0);
    }
    return lp;
  }

  const double log_tau = params(tau_index());
  const double tau = std::exp(log_tau);
  // Gamma prior on tau plus the log-scale Jacobian.
  lp += tau_shape * std::log(tau_rate) - std::lgamma(tau_shape) + tau_shape * log_tau - tau_rate * tau;

  VectorXd response = y;
  if (W) {
    const double rho = params(rho_index());
    if (!(rho > rho_lower && rho < rho_upper)) return kNegInf;
    lp += -std::log(rho_upper - rho_lower);
    double log_abs_det = 0.0;
    for (Index k = 0; k < w_eigenvalues_.size(); ++k)
      log_abs_det += std::log(std::abs(1.0 - rho * w_eigenvalues_(k)));
    lp += log_abs_det;
    response = y - rho * (*W * y);
    if (spatial_error) design -= rho * (*W * design);
  }
  double ss = 0.0;
  double n = 0.0;
  for (Index i = 0; i < response.size(); ++i) {
    if (std::isnan(response(i))) continue;
    const double r = response(i) - design.row(i).dot(beta);
    ss += r * r;
    n += 1.0;
  }
  lp += 0.5 * n * (log_tau - kLog2Pi) - 0.5 * tau * ss;
  return lp;
}

VectorXd lasso_coordinate_descent(const VectorXd& y, const MatrixXd& X, double lambda, double tolerance,
                                  int max_sweeps) {
  const Index p = X.cols();
  const VectorXd xm = X.colwise().mean();
  const MatrixXd xc = X.rowwise() - xm.transpose();
  const VectorXd yc = y.array() - y.mean();
  const VectorXd norms = xc.colwise().squaredNorm();
  VectorXd b = VectorXd::Zero(p);
  VectorXd r = yc;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    double change = 0.0;
    for (Index k = 0; k < p; ++k) {
      const double rho = xc.col(k).dot(r) + norms(k) * b(k);
      // minimizer of norms*b^2 - 2 rho b + lambda |b|
      const double half = 0.5 * lambda;
      double nb = 0.0;
      if (rho > half) nb = (rho - half) / norms(k);
      else if (rho < -half) nb = (rho + half) / norms(k);
      if (nb != b(k)) {
        r -= (nb - b(k)) * xc.col(k);
        change = std::max(change, std::abs(nb - b(k)));
        b(k) = nb;
      }
    }
    if (change < tolerance) break;
  }
  return b;
}

}  // namespace clgm
