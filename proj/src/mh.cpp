#include "clgm/mh.hpp"

#include <cmath>
#include <iostream>
#include <numbers>

#include "clgm/errors.hpp"

namespace clgm {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kLogSqrt2Pi = 0.91893853320467274178;
}  // namespace

PriorTerm PriorTerm::gaussian(double mean, double precision) {
  if (!(precision > 0.0)) throw DomainError("PriorTerm: Gaussian precision must be positive");
  return {Kind::Gaussian, mean, precision};
}

PriorTerm PriorTerm::laplace(double location, double scale) {
  if (!(scale > 0.0)) throw DomainError("PriorTerm: Laplace scale must be positive");
  return {Kind::Laplace, location, scale};
}

PriorTerm PriorTerm::uniform(double lower, double upper) {
  if (!(lower < upper)) throw DomainError("PriorTerm: Uniform bounds must satisfy a < b");
  return {Kind::Uniform, lower, upper};
}

double PriorTerm::log_density(double z) const {
  switch (kind) {
    case Kind::Gaussian:
      return 0.5 * std::log(b) - kLogSqrt2Pi - 0.5 * b * (z - a) * (z - a);
    case Kind::Laplace:
      return -std::log(2.0 * b) - std::abs(z - a) / b;
    case Kind::Uniform:
      return (z > a && z < b) ? -std::log(b - a) : kNegInf;
  }
  return kNegInf;
}

double ZcPrior::log_density(const VectorXd& z) const {
  if (static_cast<std::size_t>(z.size()) != terms.size())
    throw DimensionMismatch("ZcPrior: dimension mismatch");
  double lp = 0.0;
  for (Index k = 0; k < z.size(); ++k) {
    lp += terms[static_cast<std::size_t>(k)].log_density(z(k));
    if (lp == kNegInf) break;
  }
  return lp;
}

ProposalKernel ProposalKernel::random_walk(VectorXd sds) {
  if (!(sds.array() > 0.0).all()) throw DomainError("ProposalKernel: sds must be positive");
  return {Kind::RandomWalk, VectorXd::Zero(sds.size()), std::move(sds)};
}

ProposalKernel ProposalKernel::independence(VectorXd means, VectorXd sds) {
  if (!(sds.array() > 0.0).all()) throw DomainError("ProposalKernel: sds must be positive");
  if (means.size() != sds.size()) throw DimensionMismatch("ProposalKernel: means/sds mismatch");
  return {Kind::Independence, std::move(means), std::move(sds)};
}

VectorXd ProposalKernel::propose(const VectorXd& current, Rng& rng, double scale) const {
  VectorXd out(sds.size());
  const VectorXd& centre = kind == Kind::RandomWalk ? current : means;
  for (Index k = 0; k < out.size(); ++k) out(k) = centre(k) + scale * sds(k) * rng.normal();
  return out;
}

double ProposalKernel::log_density(const VectorXd& to, const VectorXd& from, double scale) const {
  const VectorXd& centre = kind == Kind::RandomWalk ? from : means;
  double lq = 0.0;
  for (Index k = 0; k < to.size(); ++k) {
    const double s = scale * sds(k);
    const double z = (to(k) - centre(k)) / s;
    lq += -kLogSqrt2Pi - std::log(s) - 0.5 * z * z;
  }
  return lq;
}

double log_acceptance_ratio(const ChainState& current, const ChainState& proposed,
                            const ProposalKernel& kernel, double scale) {
  double num = proposed.log_cml + proposed.log_prior;
  double den = current.log_cml + current.log_prior;
  if (!kernel.symmetric()) {
    num += kernel.log_density(current.zc, proposed.zc, scale);
    den += kernel.log_density(proposed.zc, current.zc, scale);
  }
  return num - den;
}

ChainState initial_state(const ConditionalModel& model, const ZcPrior& prior, const VectorXd& zc) {
  ChainState s;
  s.zc = zc;
  s.log_prior = prior.log_density(zc);
  if (!std::isfinite(s.log_prior)) throw ConfigError("initial state lies outside the prior support");
  auto fit = std::make_shared<ConditionalResult>(model(zc));
  s.log_cml = fit->log_cml;
  s.fit = std::move(fit);
  return s;
}

StepOutcome mh_step(const ChainState& state, const ConditionalModel& model, const ZcPrior& prior,
                    const ProposalKernel& kernel, Rng& rng, double scale) {
  StepOutcome out;
  out.state = state;
  out.state.step_index = state.step_index + 1;

  ChainState proposed;
  proposed.zc = kernel.propose(state.zc, rng, scale);
  proposed.step_index = out.state.step_index;
  proposed.log_prior = prior.log_density(proposed.zc);
  const double u = rng.uniform();
  if (!std::isfinite(proposed.log_prior)) return out;

  try {
    auto fit = std::make_shared<ConditionalResult>(model(proposed.zc));
    proposed.log_cml = fit->log_cml;
    proposed.fit = std::move(fit);
  } catch (const Error&) {
    out.engine_failed = true;
    return out;
  }
  if (!std::isfinite(proposed.log_cml)) {
    out.engine_failed = true;
    return out;
  }
  out.log_alpha = log_acceptance_ratio(state, proposed, kernel, scale);
  if (u < std::exp(std::min(0.0, out.log_alpha))) {
    out.accepted = true;
    out.state = std::move(proposed);
  }
  return out;
}

void ChainConfig::validate() const {
  if (!(iters > burn_in)) throw ConfigError("chain: iters must exceed burn_in");
  if (thin < 1) throw ConfigError("chain: thin must be at least 1");
  if (initial.size() == 0) throw ConfigError("chain: empty initial state");
  if (static_cast<std::size_t>(initial.size()) != prior.terms.size() ||
      initial.size() != kernel.sds.size())
    throw ConfigError("chain: initial state, prior and kernel dimensions differ");
  if (!names.empty() && names.size() != static_cast<std::size_t>(initial.size()))
    throw ConfigError("chain: names do not match the dimension");
}

ChainResult run_chain(const ConditionalModel& model, const ChainConfig& config) {
  Rng rng(config.seed);
  return run_chain(model, config, rng);
}

ChainResult run_chain(const ConditionalModel& model, const ChainConfig& config, Rng& rng) {
  config.validate();
  ChainResult result;
  result.seed = config.seed;
  result.names = config.names;
  const std::size_t kept = config.kept();
  result.samples.resize(static_cast<Index>(kept), config.initial.size());
  result.log_cml.resize(static_cast<Index>(kept));
  result.steps.reserve(kept);
  if (config.keep_marginals) result.fits.reserve(kept);

  ChainState state = initial_state(model, config.prior, config.initial);
  double log_scale = 0.0;
  std::size_t row = 0;
  for (std::size_t j = 0; j < config.iters; ++j) {
    const bool burning = j < config.burn_in;
    const double scale = std::exp(log_scale);
    StepOutcome step = mh_step(state, model, config.prior, config.kernel, rng, scale);
    if (step.engine_failed) ++result.engine_failures;
    if (burning && config.adapt_target) {
      const double gain = 1.0 / std::pow(static_cast<double>(j + 1), 0.6);
      log_scale += gain * ((step.accepted ? 1.0 : 0.0) - *config.adapt_target);
    }
    if (!burning) {
      ++result.proposals;
      if (step.accepted) ++result.accepted;
    }
    state = std::move(step.state);
    if (!burning && (j + 1 - config.burn_in) % config.thin == 0 && row < kept) {
      result.samples.row(static_cast<Index>(row)) = state.zc.transpose();
      result.log_cml(static_cast<Index>(row)) = state.log_cml;
      result.steps.push_back(j + 1);
      if (config.keep_marginals) result.fits.push_back(state.fit);
      ++row;
    }
  }
  result.kernel_scale = std::exp(log_scale);
  if (result.engine_failures > 0)
    std::clog << "warning: " << result.engine_failures
              << " proposals rejected after conditional model failures\n";
  return result;
}

double acceptance_rate(const ChainResult& result) {
  return result.proposals == 0 ? 0.0
                               : static_cast<double>(result.accepted) / static_cast<double>(result.proposals);
}

double effective_sample_size(std::span<const double> series) {
  const std::size_t n = series.size();
  if (n < 2) return 1.0;
  double mean = 0.0;
  for (double v : series) mean += v;
  mean /= static_cast<double>(n);
  double c0 = 0.0;
  for (double v : series) c0 += (v - mean) * (v - mean);
  c0 /= static_cast<double>(n);
  if (!(c0 > 0.0)) return 1.0;
  double sum = 0.0;
  for (std::size_t lag = 1; lag < n; ++lag) {
    double c = 0.0;
    for (std::size_t i = 0; i + lag < n; ++i) c += (series[i] - mean) * (series[i + lag] - mean);
    const double rho = c / (static_cast<double>(n) * c0);
    if (rho < 0.0) break;
    sum += rho;
  }
  return std::max(1.0, static_cast<double>(n) / (1.0 + 2.0 * sum));
}

double ess(const ChainResult& result, Index coord) {
  if (result.samples.rows() < 2) return 1.0;
  const VectorXd col = result.samples.col(coord);
  return effective_sample_size(std::span<const double>(col.data(), static_cast<std::size_t>(col.size())));
}

GridDensity bma_marginal(const ChainResult& result, std::size_t k, std::size_t n_points) {
  std::vector<MarginalDensity> ms;
  ms.reserve(result.fits.size());
  for (const auto& fit : result.fits) {
    if (!fit || k >= fit->marginals.size()) throw IndexError("bma_marginal: marginal index out of range");
    ms.push_back(fit->marginals[k]);
  }
  return bma_average(ms, n_points);
}

}  // namespace clgm
