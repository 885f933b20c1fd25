#include <doctest.h>

#include <cmath>
#include <cstring>

#include "clgm/errors.hpp"
#include "clgm/io.hpp"
#include "clgm/zoo.hpp"
#include "helpers.hpp"

using namespace clgm;

namespace {

struct OlsFit {
  VectorXd beta;
  VectorXd se;
};

OlsFit ols(const VectorXd& y, const MatrixXd& x) {
  const MatrixXd xtx = x.transpose() * x;
  OlsFit f;
  f.beta = xtx.ldlt().solve(x.transpose() * y);
  const VectorXd r = y - x * f.beta;
  const double s2 = r.squaredNorm() / static_cast<double>(x.rows() - x.cols());
  f.se = (s2 * xtx.inverse().diagonal()).cwiseSqrt();
  return f;
}

// Fisher scoring for a log-link Poisson GLM.
OlsFit poisson_irls(const VectorXd& y, const MatrixXd& x) {
  VectorXd beta = VectorXd::Zero(x.cols());
  beta(0) = std::log(y.mean());
  MatrixXd info;
  for (int it = 0; it < 100; ++it) {
    const VectorXd mu = (x * beta).array().exp();
    info = x.transpose() * mu.asDiagonal() * x;
    const VectorXd step = info.ldlt().solve(x.transpose() * (y - mu));
    beta += step;
    if (step.cwiseAbs().maxCoeff() < 1e-12) break;
  }
  return {beta, info.inverse().diagonal().cwiseSqrt()};
}

MatrixXd with_intercept(const MatrixXd& cov) {
  MatrixXd x(cov.rows(), cov.cols() + 1);
  x << VectorXd::Ones(cov.rows()), cov;
  return x;
}

bool same_bits(double a, double b) { return std::memcmp(&a, &b, sizeof a) == 0; }

}  // namespace

TEST_CASE("linear simulation") {
  const auto d = simulate_linear(1);
  CHECK(d.y.size() == 100);
  CHECK(d.covariates.rows() == 100);
  CHECK(d.truth.at("alpha") == 3.0);
  CHECK(d.truth.at("beta1") == 2.0);
  CHECK(d.truth.at("beta2") == -2.0);
  CHECK(d.truth.at("tau") == 1.0);
  CHECK((d.covariates.array() >= 0.0).all());
  CHECK((d.covariates.array() <= 1.0).all());
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto s = simulate_linear(seed);
    const auto f = ols(s.y, with_intercept(s.covariates));
    const VectorXd truth = (VectorXd(3) << 3.0, 2.0, -2.0).finished();
    CHECK(((f.beta - truth).array().abs() < 3.0 * f.se.array()).all());
  }
}

TEST_CASE("simulations are reproducible from the seed") {
  CHECK(simulate_linear(4).y == simulate_linear(4).y);
  CHECK_FALSE(simulate_linear(4).y == simulate_linear(5).y);
  CHECK(simulate_poisson(4).y == simulate_poisson(4).y);
  CHECK(simulate_missing(4).held_out == simulate_missing(4).held_out);
}

TEST_CASE("Poisson simulation") {
  const auto d = simulate_poisson(1);
  CHECK(d.y.size() == 100);
  CHECK(d.truth.at("alpha") == 0.5);
  CHECK(d.truth.at("beta1") == 2.0);
  CHECK(d.truth.at("beta2") == -2.0);
  for (Index i = 0; i < d.y.size(); ++i) {
    CHECK(d.y(i) >= 0.0);
    CHECK(d.y(i) == std::floor(d.y(i)));
  }
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto s = simulate_poisson(seed);
    const auto f = poisson_irls(s.y, with_intercept(s.covariates));
    const VectorXd truth = (VectorXd(3) << 0.5, 2.0, -2.0).finished();
    CHECK(((f.beta - truth).array().abs() < 3.0 * f.se.array()).all());
  }
}

TEST_CASE("missing-covariate simulation removes nine values") {
  const auto d = simulate_missing(1);
  CHECK(d.missing_rows.size() == 9);
  CHECK(d.held_out.size() == 9);
  Index nan_count = 0;
  for (Index i = 0; i < d.covariates.rows(); ++i) nan_count += std::isnan(d.covariates(i, 0)) ? 1 : 0;
  CHECK(nan_count == 9);
  for (std::size_t k = 0; k < 9; ++k) {
    CHECK(std::isnan(d.covariates(d.missing_rows[k], 0)));
    CHECK(d.held_out(static_cast<Index>(k)) > 0.0);
    CHECK(d.held_out(static_cast<Index>(k)) < 1.0);
  }
  CHECK(d.y.allFinite());
}

TEST_CASE("zero offset reproduces the plain model exactly") {
  const auto d = simulate_linear(2);
  const auto s = linear_scenario(d);
  const LgmSpec conditioned = condition_offset_beta(s.conditioner, VectorXd::Zero(2));
  CHECK(conditioned.offset.isZero(0.0));
  // The same intercept-only model written directly.
  auto direct = testing::regression_spec(d.y, MatrixXd::Ones(100, 1), VectorXd::Constant(1, kFixedEffectPrecision),
                                         LikelihoodFamily::gaussian_unknown());
  CHECK(same_bits(conditional_log_mlik(conditioned), conditional_log_mlik(direct)));
}

TEST_CASE("conditioning at (2, -2) is an intercept model on the adjusted response") {
  const auto d = simulate_linear(3);
  const auto s = linear_scenario(d);
  const VectorXd beta = (VectorXd(2) << 2.0, -2.0).finished();
  const LgmSpec conditioned = condition_offset_beta(s.conditioner, beta);
  CHECK(conditioned.n_latent() == 1);
  CHECK(conditioned.latent_names == std::vector<std::string>{"alpha"});
  const VectorXd adjusted = d.y - 2.0 * d.covariates.col(0) + 2.0 * d.covariates.col(1);
  auto direct = testing::regression_spec(adjusted, MatrixXd::Ones(100, 1),
                                         VectorXd::Constant(1, kFixedEffectPrecision),
                                         LikelihoodFamily::gaussian_unknown());
  CHECK((conditioned.y - conditioned.offset - adjusted).cwiseAbs().maxCoeff() < 1e-14);
  CHECK(std::abs(conditional_log_mlik(conditioned) - conditional_log_mlik(direct)) < 1e-9);
}

TEST_CASE("conditional evidence over beta peaks at the OLS estimate") {
  const auto d = simulate_linear(4);
  const auto s = linear_scenario(d);
  const auto f = ols(d.y, with_intercept(d.covariates));
  double best = -1e300;
  int bi = 0, bj = 0;
  for (int i = -2; i <= 2; ++i) {
    for (int j = -2; j <= 2; ++j) {
      VectorXd beta(2);
      beta << f.beta(1) + i * f.se(1), f.beta(2) + j * f.se(2);
      const double v = conditional_log_mlik(condition_offset_beta(s.conditioner, beta));
      if (v > best) {
        best = v;
        bi = i;
        bj = j;
      }
    }
  }
  CHECK(bi == 0);
  CHECK(bj == 0);
}

TEST_CASE("imputing the held-out values reproduces the complete-data model") {
  const auto d = simulate_missing(1);
  const auto s = missing_covariate_scenario(d);
  const LgmSpec imputed = condition_missing_covariate(s.conditioner, d.held_out);
  MatrixXd complete = d.covariates;
  for (std::size_t k = 0; k < d.missing_rows.size(); ++k)
    complete(d.missing_rows[k], 0) = d.held_out(static_cast<Index>(k));
  auto direct = testing::regression_spec(d.y, with_intercept(complete),
                                         VectorXd::Constant(2, kFixedEffectPrecision),
                                         LikelihoodFamily::gaussian_unknown());
  CHECK(imputed.structure.design == direct.structure.design);
  CHECK(same_bits(conditional_log_mlik(imputed), conditional_log_mlik(direct)));
}

TEST_CASE("missing-covariate scenario prior and kernel") {
  const auto s = missing_covariate_scenario(simulate_missing(1));
  REQUIRE(s.prior.terms.size() == 9);
  for (const auto& t : s.prior.terms) {
    CHECK(t.kind == PriorTerm::Kind::Gaussian);
    CHECK(t.a == 0.0);
    CHECK(1.0 / t.b == doctest::Approx(4.0 / 12.0));
  }
  CHECK(s.kernel.kind == ProposalKernel::Kind::Independence);
  CHECK(s.kernel.means(0) == doctest::Approx(0.5).epsilon(0.2));
  CHECK(s.kernel.sds(0) == doctest::Approx(std::sqrt(1.0 / 12.0)).epsilon(0.2));
  CHECK(s.zc_names.size() == 9);
  CHECK_THROWS_AS(condition_missing_covariate(s.conditioner, VectorXd::Zero(3)), IndexError);
}

TEST_CASE("nhanes scenario prior") {
  const auto s = nhanes_scenario(load_nhanes(data_dir()));
  REQUIRE(s.prior.terms.size() == 9);
  for (const auto& t : s.prior.terms) {
    CHECK(std::abs(t.a - 26.56) < 0.005);
    CHECK(std::abs(1.0 / t.b - 71.07) < 0.005);
  }
  CHECK(s.conditioner.y.size() == 25);
  CHECK(s.conditioner.fixed_effect_precision(0) == kFlatPrecision);
  CHECK(s.conditioner.hyper.size() == 1);
  CHECK(s.conditioner.hyper[0].log_prior(1.0) == doctest::Approx(gamma_log_density(1.0, 1.0, 0.00005)));
}

TEST_CASE("spatial filter inverse of a 2x2 swap matrix") {
  MatrixXd w(2, 2);
  w << 0, 1, 1, 0;
  MatrixXd expected(2, 2);
  expected << 1, 0.5, 0.5, 1;
  expected /= 0.75;
  CHECK((spatial_filter_inverse(w, 0.5) - expected).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("rho = 0 is the plain regression") {
  const auto s = columbus_scenario(load_columbus(data_dir()));
  ConditionerSpec plain = s.conditioner;
  plain.mode = ConditioningMode::OffsetBeta;
  plain.conditioned_columns.clear();
  const double lag = conditional_log_mlik(condition_spatial_lag(s.conditioner, 0.0));
  const double reg = conditional_log_mlik(condition_offset_beta(plain, VectorXd(0)));
  CHECK(std::abs(lag - reg) < 1e-6);
  CHECK(std::abs(conditional_log_mlik(condition_spatial_error(s.conditioner, 0.0)) - reg) < 1e-6);
}

TEST_CASE("row-standardized W makes rho = 1 singular") {
  const auto data = load_columbus(data_dir());
  CHECK((data.W.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-12);
  CHECK(data.W.diagonal().isZero(0.0));
  const auto s = columbus_scenario(data);
  CHECK_THROWS_AS(condition_spatial_lag(s.conditioner, 1.0), SingularTransform);
  CHECK_THROWS_AS(spatial_filter_inverse(data.W, 1.0), SingularTransform);
  CHECK_THROWS_AS(condition_spatial_error(s.conditioner, 1.0), SingularTransform);
  CHECK_NOTHROW(condition_spatial_lag(s.conditioner, 0.99));
}

TEST_CASE("spatial lag transforms the response and carries the Jacobian") {
  const auto data = load_columbus(data_dir());
  const auto s = columbus_scenario(data);
  const double rho = 0.4;
  const LgmSpec m = condition_spatial_lag(s.conditioner, rho);
  const MatrixXd filter = MatrixXd::Identity(49, 49) - rho * data.W;
  CHECK((m.y - filter * data.crime).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(m.log_jacobian == doctest::Approx(std::log(std::abs(filter.determinant()))).epsilon(1e-10));
  CHECK(s.prior.log_density(VectorXd::Constant(1, 1.2)) == -std::numeric_limits<double>::infinity());
  CHECK(s.prior.log_density(VectorXd::Constant(1, -1.4)) == doctest::Approx(-std::log(2.5)));
}

TEST_CASE("lasso scenario") {
  const auto raw = load_hitters(data_dir());
  CHECK(raw.salary.size() == 263);
  const auto st = standardize(raw);
  CHECK(std::abs(st.salary.mean()) < 1e-12);
  for (Index k = 0; k < 5; ++k) {
    const VectorXd c = st.covariates.col(k);
    CHECK(std::abs(c.mean()) < 1e-12);
    CHECK(std::sqrt(c.squaredNorm() / 262.0) == doctest::Approx(1.0));
  }
  const auto s = lasso_scenario(st, 0.05);
  CHECK(s.zc_names == std::vector<std::string>{"AtBat", "Hits", "HmRun", "Runs", "RBI"});
  REQUIRE(s.prior.terms.size() == 5);
  CHECK(s.prior.terms[0].log_density(0.0) == doctest::Approx(std::log(10.0)));
  // Independent coordinates: the joint prior is the product of its terms.
  VectorXd z(5);
  z << 0.1, -0.2, 0.0, 0.3, 0.05;
  double sum = 0.0;
  for (Index k = 0; k < 5; ++k) sum += s.prior.terms[static_cast<std::size_t>(k)].log_density(z(k));
  CHECK(s.prior.log_density(z) == doctest::Approx(sum));
  // The remaining model is intercept plus noise with unknown precision.
  const LgmSpec m = condition(s.conditioner, z);
  CHECK(m.n_latent() == 1);
  CHECK(m.n_hyper() == 1);
  CHECK_THROWS_AS(lasso_scenario(st, 0.0), ConfigError);
}

TEST_CASE("conditioners are pure and preserve dimensions") {
  const auto lin = linear_scenario(simulate_linear(5));
  const auto mis = missing_covariate_scenario(simulate_missing(5));
  const auto col = columbus_scenario(load_columbus(data_dir()));
  const auto nh = nhanes_scenario(load_nhanes(data_dir()));
  struct Case {
    const Scenario* s;
    VectorXd zc;
  };
  const std::vector<Case> cases{{&lin, (VectorXd(2) << 1.5, -1.0).finished()},
                                {&mis, VectorXd::Constant(9, 0.4)},
                                {&col, VectorXd::Constant(1, 0.3)},
                                {&nh, VectorXd::Constant(9, 27.0)}};
  for (const auto& c : cases) {
    const LgmSpec a = condition(c.s->conditioner, c.zc);
    const LgmSpec b = condition(c.s->conditioner, c.zc);
    CHECK(a.n_obs() == c.s->conditioner.y.size());
    CHECK(a.structure.design.rows() == c.s->conditioner.y.size());
    CHECK(same_bits(conditional_log_mlik(a), conditional_log_mlik(b)));
    const auto model = inla_model(c.s->conditioner);
    const auto r = model(c.zc);
    CHECK(same_bits(r.log_cml, conditional_log_mlik(a)));
    CHECK(r.marginals.size() == conditional_marginal_names(c.s->conditioner).size());
  }
}

TEST_CASE("conditioner validation") {
  auto s = linear_scenario(simulate_linear(6));
  CHECK_THROWS_AS(condition_offset_beta(s.conditioner, VectorXd::Zero(3)), DimensionMismatch);
  s.conditioner.conditioned_columns = {7};
  CHECK_THROWS_AS(s.conditioner.validate(), IndexError);
  auto col = columbus_scenario(load_columbus(data_dir()));
  col.conditioner.W(0, 0) = 0.1;
  CHECK_THROWS_AS(col.conditioner.validate(), DomainError);
  CHECK_THROWS_AS(condition(col.conditioner, VectorXd::Zero(2)), DimensionMismatch);
}
