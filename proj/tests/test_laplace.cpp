#include <doctest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cstring>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

#include "clgm/errors.hpp"
#include "clgm/laplace.hpp"
#include "clgm/oracle.hpp"
#include "helpers.hpp"

using namespace clgm;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// log N(y; offset, A P^-1 A^T + I / tau) computed densely.
double dense_evidence(const VectorXd& y, const MatrixXd& a, const VectorXd& prior_prec, const VectorXd& offset,
                      double tau) {
  const Index n = y.size();
  const MatrixXd cov = a * prior_prec.cwiseInverse().asDiagonal() * a.transpose() +
                       MatrixXd::Identity(n, n) / tau;
  const Eigen::LDLT<MatrixXd> ldlt(cov);
  const VectorXd r = y - offset;
  const double logdet = ldlt.vectorD().array().log().sum();
  return -0.5 * n * std::log(2 * std::numbers::pi) - 0.5 * logdet - 0.5 * r.dot(ldlt.solve(r));
}

struct GaussianProblem {
  VectorXd y;
  MatrixXd a;
  VectorXd prec;
  VectorXd offset;
  double tau;
};

GaussianProblem gaussian_problem(Index n, std::uint64_t seed) {
  GaussianProblem p;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.3, 3.0);
  p.a = testing::design_with_intercept(n, 2, seed);
  p.prec = VectorXd(3);
  p.prec << u(rng), u(rng), u(rng);
  p.offset = 0.2 * testing::random_vector(n, seed + 1);
  p.tau = u(rng);
  VectorXd beta(3);
  beta << 1.0, -0.5, 2.0;
  p.y = p.a * beta + p.offset + testing::random_vector(n, seed + 2) / std::sqrt(p.tau);
  return p;
}

LgmSpec known_spec(const GaussianProblem& p) {
  auto spec = testing::regression_spec(p.y, p.a, p.prec, LikelihoodFamily::gaussian_known(p.tau));
  spec.offset = p.offset;
  return spec;
}

// Prior precision tau * Lambda0 shares the likelihood precision: the conjugate NIG model.
LgmSpec nig_spec(const VectorXd& y, const MatrixXd& x, const VectorXd& lambda0) {
  auto spec = testing::regression_spec(y, x, lambda0, LikelihoodFamily::gaussian_unknown());
  const MatrixXd l0 = lambda0.asDiagonal();
  spec.structure.precision = [l0](const VectorXd& user) { return MatrixXd(user(0) * l0); };
  return spec;
}

LgmSpec poisson_toy(std::uint64_t seed) {
  const Index n = 20;
  const MatrixXd a = testing::design_with_intercept(n, 2, seed);
  std::mt19937_64 rng(seed + 7);
  VectorXd y(n);
  for (Index i = 0; i < n; ++i) {
    const double mu = std::exp(0.5 + 2 * a(i, 1) - 2 * a(i, 2));
    y(i) = std::poisson_distribution<int>(mu)(rng);
  }
  return testing::regression_spec(y, a, VectorXd::Constant(3, 0.1), LikelihoodFamily::poisson_log());
}

}  // namespace

TEST_CASE("Gaussian likelihood mode is the GLS solution after one Newton step") {
  const auto p = gaussian_problem(40, 3);
  const auto ga = gaussian_approx(known_spec(p), VectorXd());
  const MatrixXd lhs = MatrixXd(p.prec.asDiagonal()) + p.tau * p.a.transpose() * p.a;
  const VectorXd gls = lhs.ldlt().solve(p.tau * p.a.transpose() * (p.y - p.offset));
  CHECK((ga.mode - gls).cwiseAbs().maxCoeff() < 1e-10);
  // One step reaches the mode; the second only confirms the change is below tolerance.
  CHECK(ga.newton_iterations == 2);
  CHECK(ga.log_det_precision == doctest::Approx(std::log(lhs.determinant())).epsilon(1e-10));
}

TEST_CASE("prior-only model: zero mode, prior factor") {
  auto p = gaussian_problem(5, 4);
  p.y.setConstant(kNaN);
  const auto ga = gaussian_approx(known_spec(p), VectorXd());
  CHECK(ga.mode.isZero(0.0));
  CHECK(ga.precision.lower().isApprox(cholesky(MatrixXd(p.prec.asDiagonal())).lower()));
}

TEST_CASE("Poisson mode matches an independent gradient-ascent maximizer") {
  const auto spec = poisson_toy(5);
  const auto ga = gaussian_approx(spec, VectorXd());
  const MatrixXd& a = spec.structure.design;
  const MatrixXd q = spec.structure.precision(VectorXd());
  auto objective = [&](const VectorXd& x) {
    const VectorXd eta = a * x;
    return spec.y.dot(eta) - eta.array().exp().sum() - 0.5 * x.dot(q * x);
  };
  VectorXd x = VectorXd::Zero(3);
  double step = 1e-2;
  for (int it = 0; it < 200000; ++it) {
    const VectorXd grad = a.transpose() * (spec.y - (a * x).array().exp().matrix()) - q * x;
    if (grad.cwiseAbs().maxCoeff() < 1e-11) break;
    VectorXd next = x + step * grad;
    while (objective(next) < objective(x)) {
      step *= 0.5;
      next = x + step * grad;
    }
    x = next;
    step *= 1.1;
  }
  CHECK((ga.mode - x).cwiseAbs().maxCoeff() < 1e-5);
  // Gradient at the mode.
  const VectorXd grad = a.transpose() * (spec.y - (a * ga.mode).array().exp().matrix()) - q * ga.mode;
  CHECK(grad.cwiseAbs().maxCoeff() <= 1e-8 * std::max(1.0, spec.y.sum()));
}

TEST_CASE("gaussian_approx dimension checks") {
  const auto p = gaussian_problem(5, 6);
  CHECK_THROWS_AS(gaussian_approx(known_spec(p), VectorXd::Zero(1)), DimensionMismatch);
}

TEST_CASE("single observation evidence is the convolution of two unit Gaussians") {
  const auto spec = testing::regression_spec(VectorXd::Zero(1), MatrixXd::Ones(1, 1), VectorXd::Ones(1),
                                             LikelihoodFamily::gaussian_known(1.0));
  CHECK(log_mlik_given_theta(spec, VectorXd()) ==
        doctest::Approx(-0.5 * std::log(4 * std::numbers::pi)).epsilon(1e-14));
}

TEST_CASE("no observations: evidence zero") {
  auto p = gaussian_problem(4, 8);
  p.y.setConstant(kNaN);
  CHECK(std::abs(log_mlik_given_theta(known_spec(p), VectorXd())) < 1e-12);
}

TEST_CASE("n=100 Gaussian evidence equals the dense closed form") {
  const auto p = gaussian_problem(100, 9);
  const double dense = dense_evidence(p.y, p.a, p.prec, p.offset, p.tau);
  CHECK(std::abs(log_mlik_given_theta(known_spec(p), VectorXd()) - dense) < 1e-6);
}

TEST_CASE("pure-Gaussian exactness at 1e-9 across seeds") {
  for (std::uint64_t seed = 10; seed < 30; ++seed) {
    const auto p = gaussian_problem(50, seed);
    const double dense = dense_evidence(p.y, p.a, p.prec, p.offset, p.tau);
    CHECK(std::abs(log_mlik_given_theta(known_spec(p), VectorXd()) - dense) < 1e-9);
  }
}

TEST_CASE("zero hyperparameters: one grid point, weight 1, volume 1") {
  const auto spec = known_spec(gaussian_problem(20, 31));
  const auto grid = explore_theta_grid(spec);
  REQUIRE(grid.points.size() == 1);
  CHECK(grid.points[0].weight == 1.0);
  CHECK(grid.volume == 1.0);
  CHECK(conditional_log_mlik(spec) == log_mlik_given_theta(spec, VectorXd()));
}

// The grid constants leave a truncation floor near 6e-4 that grows as the
// log-tau posterior skews, so these use the simulation-study size n = 100.
TEST_CASE("grid evidence matches adaptive quadrature over log tau") {
  const auto p = gaussian_problem(100, 32);
  auto spec = testing::regression_spec(p.y, p.a, p.prec, LikelihoodFamily::gaussian_unknown());
  const auto grid = explore_theta_grid(spec);
  const double m = grid.mode_theta(0);
  const double peak = log_mlik_given_theta(spec, grid.mode_theta) + log_hyper_prior(spec, grid.mode_theta);
  auto f = [&](double t) {
    const VectorXd th = VectorXd::Constant(1, t);
    return std::exp(log_mlik_given_theta(spec, th) + log_hyper_prior(spec, th) - peak);
  };
  const double sd = 1.0 / std::sqrt(-grid.mode_hessian(0, 0));
  const double integral =
      boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, m - 15 * sd, m + 15 * sd, 15, 1e-12);
  const double quad = peak + std::log(integral);
  CHECK(std::abs(std::expm1(grid.log_evidence - quad)) < 1e-3);
}

TEST_CASE("grid is symmetric around the mode for a symmetric objective") {
  // No data: g is the prior alone, a Gaussian in theta centred at 0.4.
  LgmSpec spec = testing::regression_spec(VectorXd::Constant(3, kNaN), MatrixXd::Ones(3, 1), VectorXd::Ones(1),
                                          LikelihoodFamily::gaussian_known(1.0));
  HyperParameter h;
  h.name = "s";
  h.transform = HyperTransform::Identity;
  h.lower = -std::numeric_limits<double>::infinity();
  h.log_prior = [](double t) { return -0.5 * (t - 0.4) * (t - 0.4) / 0.09; };
  h.initial = 0.0;
  spec.hyper.push_back(h);
  const auto grid = explore_theta_grid(spec);
  CHECK(grid.mode_theta(0) == doctest::Approx(0.4).epsilon(1e-5));
  CHECK(grid.step(0) == doctest::Approx(0.75 * 0.3).epsilon(1e-4));
  std::vector<int> idx;
  for (const auto& pt : grid.points) idx.push_back(pt.index(0));
  std::sort(idx.begin(), idx.end());
  CHECK(idx.front() == -idx.back());
  CHECK(idx.size() % 2 == 1);
  // Points past the first beyond-cutoff point are not visited: drop at |k| is 0.5 (0.75 k)^2.
  CHECK(idx.back() == 4);
  for (const auto& a : grid.points)
    for (const auto& b : grid.points)
      if (a.index(0) == -b.index(0)) CHECK(a.weight == doctest::Approx(b.weight).epsilon(1e-8));
}

TEST_CASE("conditional evidence matches the conjugate NIG evidence") {
  for (std::uint64_t seed : {41, 42, 43}) {
    const Index n = 100;
    const MatrixXd x = testing::design_with_intercept(n, 2, seed);
    VectorXd beta(3);
    beta << 3.0, 2.0, -2.0;
    const VectorXd y = x * beta + testing::random_vector(n, seed + 1);
    const VectorXd lambda0 = VectorXd::Constant(3, 0.001);
    const auto nig = conjugate_regression(y, x, MatrixXd(lambda0.asDiagonal()), 1.0, 0.00005);
    CHECK(std::abs(conditional_log_mlik(nig_spec(y, x, lambda0)) - nig.log_evidence) < 1e-3);
  }
}

TEST_CASE("precision marginal matches the conjugate Gamma marginal") {
  const Index n = 100;
  const MatrixXd x = testing::design_with_intercept(n, 2, 51);
  VectorXd beta(3);
  beta << 3.0, 2.0, -2.0;
  const VectorXd y = x * beta + testing::random_vector(n, 52);
  const VectorXd lambda0 = VectorXd::Constant(3, 0.001);
  const auto spec = nig_spec(y, x, lambda0);
  const auto fit = fit_conditional(spec);
  const auto nig = conjugate_regression(y, x, MatrixXd(lambda0.asDiagonal()), 1.0, 0.00005);
  REQUIRE(fit.hyper.size() == 1);
  CHECK(ks_distance(fit.hyper[0], MarginalDensity(nig.precision_marginal())) < 0.02);
  const auto& g = std::get<GridDensity>(fit.hyper[0]);
  CHECK((g.density.array() >= 0.0).all());
  CHECK(std::abs(g.integral() - 1.0) < 1e-6);
}

TEST_CASE("evidence decreases as an observation moves away from the fit") {
  const auto p = gaussian_problem(30, 61);
  auto spec = testing::regression_spec(p.y, p.a, p.prec, LikelihoodFamily::gaussian_unknown());
  double last = conditional_log_mlik(spec);
  const double base = spec.y(0);
  for (double shift : {5.0, 10.0, 20.0, 40.0}) {
    spec.y(0) = base + shift;
    const double v = conditional_log_mlik(spec);
    CHECK(v < last);
    last = v;
  }
}

TEST_CASE("latent marginals on a single grid point are the exact Gaussian posterior") {
  const auto p = gaussian_problem(25, 71);
  const auto spec = known_spec(p);
  const auto fit = fit_conditional(spec);
  const MatrixXd lhs = MatrixXd(p.prec.asDiagonal()) + p.tau * p.a.transpose() * p.a;
  const VectorXd gls = lhs.ldlt().solve(p.tau * p.a.transpose() * (p.y - p.offset));
  const MatrixXd cov = lhs.inverse();
  for (Index j = 0; j < 3; ++j) {
    const auto& mix = std::get<GaussianMixture>(fit.latent[static_cast<std::size_t>(j)]);
    REQUIRE(mix.size() == 1);
    CHECK(mix.means(0) == doctest::Approx(gls(j)).epsilon(1e-10));
    CHECK(mix.sds(0) * mix.sds(0) == doctest::Approx(cov(j, j)).epsilon(1e-10));
  }
  CHECK(fit.hyper.empty());
}

TEST_CASE("latent mixture marginals integrate to one on a wide grid") {
  const auto p = gaussian_problem(30, 72);
  const auto spec = testing::regression_spec(p.y, p.a, p.prec, LikelihoodFamily::gaussian_unknown());
  const auto fit = fit_conditional(spec);
  for (const auto& m : fit.latent) {
    const auto& mix = std::get<GaussianMixture>(m);
    CHECK(mix.size() > 1);
    CHECK(std::abs(mix.weights.sum() - 1.0) < 1e-12);
    const auto [lo, hi] = std::pair{(mix.means - 8 * mix.sds).minCoeff(), (mix.means + 8 * mix.sds).maxCoeff()};
    const int n = 20001;
    const double h = (hi - lo) / (n - 1);
    double total = 0.0;
    for (int k = 0; k < n; ++k) total += (k == 0 || k == n - 1 ? 0.5 : 1.0) * mix.density(lo + k * h);
    CHECK(std::abs(total * h - 1.0) < 1e-6);
  }
}

TEST_CASE("identical mixture components collapse") {
  GaussianMixture m;
  m.means = VectorXd::Constant(2, 1.5);
  m.sds = VectorXd::Constant(2, 0.7);
  m.weights = VectorXd::Constant(2, 0.5);
  const auto c = m.collapsed();
  REQUIRE(c.size() == 1);
  CHECK(c.means(0) == 1.5);
  CHECK(c.sds(0) == 0.7);
  CHECK(c.weights(0) == doctest::Approx(1.0));
}

TEST_CASE("single-point theta grid gives a point-mass marginal") {
  const auto p = gaussian_problem(20, 81);
  const auto spec = testing::regression_spec(p.y, p.a, p.prec, LikelihoodFamily::gaussian_unknown());
  auto grid = explore_theta_grid(spec);
  // Keep only the mode.
  std::erase_if(grid.points, [](const GridPoint& g) { return g.index(0) != 0; });
  grid.points[0].weight = 1.0;
  const auto th = theta_marginals(spec, grid);
  REQUIRE(th.size() == 1);
  const auto& g = std::get<GridDensity>(th[0]);
  CHECK(g.is_point_mass());
  CHECK(g.x(0) == doctest::Approx(std::exp(grid.mode_theta(0))));
  CHECK_THROWS_AS(theta_marginals(spec, ThetaGrid{}), EmptyGrid);
  CHECK_THROWS_AS(latent_marginals(spec, ThetaGrid{}), EmptyGrid);
}

TEST_CASE("two-hyperparameter grid: marginals normalized") {
  const auto p = gaussian_problem(40, 82);
  auto spec = testing::regression_spec(p.y, p.a, p.prec, LikelihoodFamily::gaussian_unknown());
  // Second hyperparameter: a common precision on the two slopes.
  spec.hyper.push_back(precision_hyper("kappa", 1.0, 0.1));
  spec.structure.precision = [](const VectorXd& user) {
    MatrixXd q = MatrixXd::Zero(3, 3);
    q(0, 0) = 0.001;
    q(1, 1) = q(2, 2) = user(1);
    return q;
  };
  const auto fit = fit_conditional(spec);
  CHECK(fit.grid.points.size() > 9);
  double total = 0.0;
  for (const auto& pt : fit.grid.points) total += pt.weight;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  REQUIRE(fit.hyper.size() == 2);
  for (const auto& m : fit.hyper) {
    const auto& g = std::get<GridDensity>(m);
    CHECK((g.density.array() >= 0.0).all());
    CHECK(std::abs(g.integral() - 1.0) < 1e-6);
  }
}

TEST_CASE("mode search failure when the objective is never finite") {
  auto spec = known_spec(gaussian_problem(10, 83));
  HyperParameter h;
  h.name = "bad";
  h.transform = HyperTransform::Identity;
  h.log_prior = [](double) { return -std::numeric_limits<double>::infinity(); };
  spec.hyper.push_back(h);
  CHECK_THROWS_AS(explore_theta_grid(spec), ModeSearchFailure);
}

TEST_CASE("mode is invariant to reordering observations") {
  const auto spec = poisson_toy(91);
  std::vector<Index> perm(static_cast<std::size_t>(spec.n_obs()));
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), std::mt19937_64(92));
  LgmSpec shuffled = spec;
  for (std::size_t i = 0; i < perm.size(); ++i) {
    shuffled.y(static_cast<Index>(i)) = spec.y(perm[i]);
    shuffled.structure.design.row(static_cast<Index>(i)) = spec.structure.design.row(perm[i]);
  }
  const auto a = gaussian_approx(spec, VectorXd());
  const auto b = gaussian_approx(shuffled, VectorXd());
  CHECK((a.mode - b.mode).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("conditional_log_mlik is bit-identical across calls") {
  const auto p = gaussian_problem(30, 93);
  const auto spec = testing::regression_spec(p.y, p.a, p.prec, LikelihoodFamily::gaussian_unknown());
  const LgmSpec copy = spec;
  const double a = conditional_log_mlik(spec);
  const double b = conditional_log_mlik(copy);
  CHECK(std::memcmp(&a, &b, sizeof a) == 0);
}

TEST_CASE("an observation with vanishing curvature barely changes the evidence") {
  const auto spec = poisson_toy(94);
  // Poisson y = 0 at eta = -30: curvature e^-30 and loglik -e^-30.
  LgmSpec more = spec;
  const Index n = spec.n_obs();
  more.y.conservativeResize(n + 1);
  more.y(n) = 0.0;
  more.offset.conservativeResize(n + 1);
  more.offset(n) = -30.0;
  more.structure.design.conservativeResize(n + 1, Eigen::NoChange);
  more.structure.design.row(n) = spec.structure.design.row(0);
  CHECK(std::abs(conditional_log_mlik(more) - conditional_log_mlik(spec)) < 1e-6);
}
