#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "clgm/marginal.hpp"

namespace clgm {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Source of uniform and standard-normal draws. Virtual so tests can script it.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  virtual ~Rng() = default;

  virtual double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
  virtual double normal() { return std::normal_distribution<double>(0.0, 1.0)(engine_); }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
};

struct PriorTerm {
  enum class Kind { Gaussian, Laplace, Uniform };
  Kind kind = Kind::Gaussian;
  double a = 0.0;  // Gaussian: mean, Laplace: location, Uniform: lower
  double b = 1.0;  // Gaussian: precision, Laplace: scale, Uniform: upper

  static PriorTerm gaussian(double mean, double precision);
  static PriorTerm laplace(double location, double scale);
  static PriorTerm uniform(double lower, double upper);

  double log_density(double z) const;
};

/// Independent product prior over the conditioned parameters.
struct ZcPrior {
  std::vector<PriorTerm> terms;

  static ZcPrior iid(Index dim, PriorTerm term) {
    return {std::vector<PriorTerm>(static_cast<std::size_t>(dim), term)};
  }
  double log_density(const VectorXd& z) const;
};

struct ProposalKernel {
  enum class Kind { RandomWalk, Independence };
  Kind kind = Kind::RandomWalk;
  VectorXd means;  // Independence only
  VectorXd sds;

  static ProposalKernel random_walk(VectorXd sds);
  static ProposalKernel independence(VectorXd means, VectorXd sds);

  bool symmetric() const { return kind == Kind::RandomWalk; }
  VectorXd propose(const VectorXd& current, Rng& rng, double scale = 1.0) const;
  // log q(to | from)
  double log_density(const VectorXd& to, const VectorXd& from, double scale = 1.0) const;
};

/// What a conditioned model reports back for one z_c value.
struct ConditionalResult {
  double log_cml = 0.0;
  std::vector<MarginalDensity> marginals;
};

using ConditionalModel = std::function<ConditionalResult(const VectorXd&)>;

struct ChainState {
  VectorXd zc;
  double log_cml = 0.0;
  double log_prior = 0.0;
  std::size_t step_index = 0;
  std::shared_ptr<const ConditionalResult> fit;
};

struct StepOutcome {
  ChainState state;
  bool accepted = false;
  bool engine_failed = false;
  double log_alpha = -std::numeric_limits<double>::infinity();
};

/// log alpha = [cml' + prior' + log q(z|z')] - [cml + prior + log q(z'|z)].
/// Random-walk kernels skip the q terms.
double log_acceptance_ratio(const ChainState& current, const ChainState& proposed,
                            const ProposalKernel& kernel, double scale = 1.0);

ChainState initial_state(const ConditionalModel& model, const ZcPrior& prior, const VectorXd& zc);

StepOutcome mh_step(const ChainState& state, const ConditionalModel& model, const ZcPrior& prior,
                    const ProposalKernel& kernel, Rng& rng, double scale = 1.0);

struct ChainConfig {
  std::size_t iters = 10500;
  std::size_t burn_in = 500;
  std::size_t thin = 10;
  std::uint64_t seed = 1;
  VectorXd initial;
  ZcPrior prior;
  ProposalKernel kernel;
  std::vector<std::string> names;
  // Burn-in only Robbins-Monro scaling of the kernel towards this acceptance.
  std::optional<double> adapt_target;
  bool keep_marginals = true;

  std::size_t kept() const { return iters > burn_in ? (iters - burn_in) / thin : 0; }
  void validate() const;
};

struct ChainResult {
  std::vector<std::string> names;
  MatrixXd samples;                // kept x dim
  std::vector<std::size_t> steps;  // step index of every kept sample
  VectorXd log_cml;
  std::vector<std::shared_ptr<const ConditionalResult>> fits;
  std::size_t proposals = 0;  // post burn-in
  std::size_t accepted = 0;   // post burn-in
  std::size_t engine_failures = 0;
  double kernel_scale = 1.0;
  std::uint64_t seed = 0;
};

ChainResult run_chain(const ConditionalModel& model, const ChainConfig& config);
ChainResult run_chain(const ConditionalModel& model, const ChainConfig& config, Rng& rng);

double acceptance_rate(const ChainResult& result);

/// N / (1 + 2 sum rho_k), summing autocorrelations until the first negative one.
/// Constant series report 1.
double effective_sample_size(std::span<const double> series);
double ess(const ChainResult& result, Index coord);

/// Equal-weight average of the per-sample conditional marginals (index k).
GridDensity bma_marginal(const ChainResult& result, std::size_t k,
                         std::size_t n_points = kDefaultGridPoints);

}  // namespace clgm
