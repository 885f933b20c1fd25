#include "clgm/laplace.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>

#include "clgm/errors.hpp"

namespace clgm {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr int kMaxStepHalvings = 30;
constexpr int kMaxGridExtent = 40;
constexpr int kThetaMarginalPoints = 101;

// Design with rows of unobserved responses zeroed.
MatrixXd observed_design(const LgmSpec& spec) {
  MatrixXd a = spec.structure.design;
  for (Index i = 0; i < spec.n_obs(); ++i)
    if (!spec.observed(i)) a.row(i).setZero();
  return a;
}

double penalized_loglik(const LgmSpec& spec, const MatrixXd& q, const VectorXd& x,
                        const VectorXd& theta) {
  return loglik_terms(spec, linear_predictor(spec, x), theta).total() - 0.5 * x.dot(q * x);
}

struct Evaluation {
  double log_mlik = kNegInf;
  VectorXd mode;
  VectorXd variance;
};

Evaluation evaluate(const LgmSpec& spec, const VectorXd& theta, bool with_variance) {
  const GaussianApprox ga = gaussian_approx(spec, theta);
  const double n = static_cast<double>(spec.n_latent());
  const VectorXd eta = linear_predictor(spec, ga.mode);
  Evaluation e;
  e.log_mlik = loglik_terms(spec, eta, theta).total() + spec.log_jacobian +
               gaussian_log_density(spec.prior_precision(theta), ga.mode) -
               (0.5 * ga.log_det_precision - 0.5 * n * kLog2Pi);
  e.mode = ga.mode;
  if (with_variance) e.variance = diag_of_inverse(ga.precision);
  return e;
}

// Natural cubic spline through (xs, ys) evaluated at t.
class NaturalSpline {
 public:
  NaturalSpline(std::vector<double> xs, std::vector<double> ys) : x_(std::move(xs)), y_(std::move(ys)) {
    const std::size_t n = x_.size();
    m_.assign(n, 0.0);
    if (n < 3) return;
    std::vector<double> a(n, 0.0), b(n, 1.0), c(n, 0.0), r(n, 0.0);
    for (std::size_t i = 1; i + 1 < n; ++i) {
      const double h0 = x_[i] - x_[i - 1];
      const double h1 = x_[i + 1] - x_[i];
      a[i] = h0 / 6.0;
      b[i] = (h0 + h1) / 3.0;
      c[i] = h1 / 6.0;
      r[i] = (y_[i + 1] - y_[i]) / h1 - (y_[i] - y_[i - 1]) / h0;
    }
    for (std::size_t i = 1; i < n; ++i) {
      const double w = a[i] / b[i - 1];
      b[i] -= w * c[i - 1];
      r[i] -= w * r[i - 1];
    }
    m_[n - 1] = r[n - 1] / b[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) m_[i] = (r[i] - c[i] * m_[i + 1]) / b[i];
  }

  double operator()(double t) const {
    const std::size_t n = x_.size();
    if (n == 1) return y_[0];
    std::size_t k = static_cast<std::size_t>(std::upper_bound(x_.begin(), x_.end(), t) - x_.begin());
    k = std::clamp<std::size_t>(k, 1, n - 1) - 1;
    const double h = x_[k + 1] - x_[k];
    const double u = (x_[k + 1] - t) / h;
    const double v = (t - x_[k]) / h;
    return u * y_[k] + v * y_[k + 1] +
           ((u * u * u - u) * m_[k] + (v * v * v - v) * m_[k + 1]) * h * h / 6.0;
  }

 private:
  std::vector<double> x_, y_, m_;
};

class ModeSearch {
 public:
  explicit ModeSearch(const LgmSpec& spec) : spec_(spec) {}

  double g(const VectorXd& theta) {
    ++evaluations_;
    try {
      const double lp = log_hyper_prior(spec_, theta);
      if (!std::isfinite(lp)) return kNegInf;
      const double v = evaluate(spec_, theta, false).log_mlik + lp;
      return std::isfinite(v) ? v : kNegInf;
    } catch (const Error&) {
      return kNegInf;
    }
  }

  int evaluations() const { return evaluations_; }

  VectorXd find_1d() {
    auto f = [&](double t) { return g(VectorXd::Constant(1, t)); };
    const double x0 = spec_.hyper[0].initial;
    const double f0 = f(x0);
    if (!std::isfinite(f0)) throw ModeSearchFailure("mode search: objective not finite at start");
    double a = x0;
    double b = x0 + 1.0;
    double fb = f(b);
    if (fb < f0) {
      const double xm = x0 - 1.0;
      const double fm = f(xm);
      if (fm <= f0) return VectorXd::Constant(1, golden(xm, b));
      b = xm;
      fb = fm;
    }
    constexpr double kGrow = 1.618033988749895;
    double c = b + kGrow * (b - a);
    double fc = f(c);
    while (fc > fb) {
      if (evaluations_ > kMaxBracketEvaluations)
        throw ModeSearchFailure("mode search: no bracket within evaluation budget");
      a = b;
      b = c;
      fb = fc;
      c = b + kGrow * (b - a);
      fc = f(c);
    }
    return VectorXd::Constant(1, golden(std::min(a, c), std::max(a, c)));
  }

  VectorXd find_2d() {
    const Index d = 2;
    std::vector<VectorXd> simplex(3, VectorXd(d));
    VectorXd start(d);
    for (Index k = 0; k < d; ++k) start(k) = spec_.hyper[k].initial;
    simplex[0] = start;
    simplex[1] = start + VectorXd::Unit(d, 0);
    simplex[2] = start + VectorXd::Unit(d, 1);
    std::vector<double> fs(3);
    for (int i = 0; i < 3; ++i) fs[i] = -g(simplex[i]);
    if (!std::isfinite(fs[0])) throw ModeSearchFailure("mode search: objective not finite at start");
    while (true) {
      std::array<int, 3> order{0, 1, 2};
      std::sort(order.begin(), order.end(), [&](int l, int r) { return fs[l] < fs[r]; });
      const int best = order[0], mid = order[1], worst = order[2];
      double diameter = 0.0;
      for (int i = 1; i < 3; ++i)
        diameter = std::max(diameter, (simplex[order[i]] - simplex[best]).cwiseAbs().maxCoeff());
      if (diameter < kModeTolerance && fs[worst] - fs[best] < 1e-9) return simplex[best];
      if (evaluations_ > kMaxSimplexEvaluations)
        throw ModeSearchFailure("mode search: simplex did not converge within evaluation budget");
      const VectorXd centroid = 0.5 * (simplex[best] + simplex[mid]);
      const VectorXd xr = centroid + (centroid - simplex[worst]);
      const double fr = -g(xr);
      if (fr < fs[best]) {
        const VectorXd xe = centroid + 2.0 * (centroid - simplex[worst]);
        const double fe = -g(xe);
        if (fe < fr) {
          simplex[worst] = xe;
          fs[worst] = fe;
        } else {
          simplex[worst] = xr;
          fs[worst] = fr;
        }
      } else if (fr < fs[mid]) {
        simplex[worst] = xr;
        fs[worst] = fr;
      } else {
        const bool outside = fr < fs[worst];
        const VectorXd xc = outside ? VectorXd(centroid + 0.5 * (xr - centroid))
                                    : VectorXd(centroid + 0.5 * (simplex[worst] - centroid));
        const double fc = -g(xc);
        if (fc < std::min(fr, fs[worst])) {
          simplex[worst] = xc;
          fs[worst] = fc;
        } else {
          for (int i : {mid, worst}) {
            simplex[i] = simplex[best] + 0.5 * (simplex[i] - simplex[best]);
            fs[i] = -g(simplex[i]);
          }
        }
      }
    }
  }

 private:
  double golden(double lo, double hi) {
    constexpr double kInvPhi = 0.6180339887498949;
    double x1 = hi - kInvPhi * (hi - lo);
    double x2 = lo + kInvPhi * (hi - lo);
    double f1 = g(VectorXd::Constant(1, x1));
    double f2 = g(VectorXd::Constant(1, x2));
    while (hi - lo > kModeTolerance) {
      if (f1 > f2) {
        hi = x2;
        x2 = x1;
        f2 = f1;
        x1 = hi - kInvPhi * (hi - lo);
        f1 = g(VectorXd::Constant(1, x1));
      } else {
        lo = x1;
        x1 = x2;
        f1 = f2;
        x2 = lo + kInvPhi * (hi - lo);
        f2 = g(VectorXd::Constant(1, x2));
      }
    }
    return 0.5 * (lo + hi);
  }

  const LgmSpec& spec_;
  int evaluations_ = 0;
};

MatrixXd finite_difference_hessian(ModeSearch& search, const VectorXd& mode, double g0) {
  const Index d = mode.size();
  const double h = kHessianStep;
  MatrixXd hess(d, d);
  for (Index i = 0; i < d; ++i) {
    const VectorXd e = h * VectorXd::Unit(d, i);
    hess(i, i) = (search.g(mode + e) - 2.0 * g0 + search.g(mode - e)) / (h * h);
    for (Index j = 0; j < i; ++j) {
      const VectorXd f = h * VectorXd::Unit(d, j);
      hess(i, j) = hess(j, i) =
          (search.g(mode + e + f) - search.g(mode + e - f) - search.g(mode - e + f) +
           search.g(mode - e - f)) /
          (4.0 * h * h);
    }
  }
  return hess;
}

std::optional<GridPoint> grid_point(const LgmSpec& spec, const VectorXd& theta,
                                    const Eigen::VectorXi& index) {
  try {
    const double lp = log_hyper_prior(spec, theta);
    if (!std::isfinite(lp)) return std::nullopt;
    Evaluation e = evaluate(spec, theta, true);
    if (!std::isfinite(e.log_mlik)) return std::nullopt;
    GridPoint p;
    p.theta = theta;
    p.index = index;
    p.log_posterior = e.log_mlik + lp;
    p.latent_mean = std::move(e.mode);
    p.latent_variance = std::move(e.variance);
    return p;
  } catch (const Error&) {
    return std::nullopt;
  }
}

GridDensity spline_marginal(const HyperParameter& hyper, std::vector<double> thetas,
                            std::vector<double> log_dens) {
  GridDensity out;
  if (thetas.size() == 1) {
    out.x = VectorXd::Constant(1, hyper.to_user(thetas[0]));
    out.density = VectorXd::Ones(1);
    return out;
  }
  const double peak = *std::max_element(log_dens.begin(), log_dens.end());
  for (double& l : log_dens) l -= peak;
  const double lo = thetas.front();
  const double hi = thetas.back();
  const VectorXd fine = VectorXd::LinSpaced(kThetaMarginalPoints, lo, hi);
  std::vector<double> interp_y = log_dens;
  NaturalSpline spline(std::move(thetas), std::move(interp_y));
  out.x.resize(fine.size());
  out.density.resize(fine.size());
  for (Index k = 0; k < fine.size(); ++k) {
    const double t = fine(k);
    double d = std::exp(spline(t));
    if (hyper.transform == HyperTransform::Log) d /= std::exp(t);
    out.x(k) = hyper.to_user(t);
    out.density(k) = d;
  }
  return normalize(std::move(out));
}

}  // namespace

GaussianApprox gaussian_approx(const LgmSpec& spec, const VectorXd& theta) {
  if (theta.size() != spec.n_hyper()) throw DimensionMismatch("gaussian_approx: theta has the wrong length");
  const MatrixXd q = spec.prior_precision(theta);
  const Index n = spec.n_latent();
  if (q.rows() != n || q.cols() != n)
    throw DimensionMismatch("gaussian_approx: prior precision has the wrong size");
  const MatrixXd a = observed_design(spec);

  auto system = [&](const VectorXd& x, VectorXd* rhs) {
    const LoglikTerms t = loglik_terms(spec, linear_predictor(spec, x), theta);
    MatrixXd p = q;
    p.noalias() += a.transpose() * t.c.asDiagonal() * a;
    if (rhs) *rhs = a.transpose() * (t.d1 + t.c.cwiseProduct(a * x));
    return p;
  };

  VectorXd x = VectorXd::Zero(n);
  const bool gaussian = spec.family.kind != FamilyKind::PoissonLog;
  int iterations = 0;
  bool converged = false;
  while (iterations < kMaxNewtonIterations) {
    ++iterations;
    VectorXd rhs;
    const auto factor = cholesky(system(x, &rhs));
    VectorXd next = solve_spd(factor, rhs);
    if (!gaussian) {
      const double current = penalized_loglik(spec, q, x, theta);
      const VectorXd dir = next - x;
      double scale = 1.0;
      for (int h = 0; h < kMaxStepHalvings; ++h) {
        const double trial = penalized_loglik(spec, q, x + scale * dir, theta);
        if (std::isfinite(trial) && trial >= current - 1e-12 * (1.0 + std::abs(current))) break;
        scale *= 0.5;
      }
      next = x + scale * dir;
    }
    const double change = (next - x).cwiseAbs().maxCoeff();
    x = std::move(next);
    if (!x.allFinite()) throw NoConvergence("gaussian_approx: Newton iterate is not finite");
    if (change < kNewtonTolerance) {
      converged = true;
      break;
    }
  }
  if (!converged && n > 0)
    throw NoConvergence("gaussian_approx: Newton iteration did not converge in 100 steps");
  auto factor = cholesky(system(x, nullptr));
  const double ld = log_det(factor);
  return GaussianApprox{std::move(x), std::move(factor), ld, iterations};
}

double log_mlik_given_theta(const LgmSpec& spec, const VectorXd& theta) {
  return evaluate(spec, theta, false).log_mlik;
}

ThetaGrid explore_theta_grid(const LgmSpec& spec) {
  spec.validate();
  const Index d = spec.n_hyper();
  ThetaGrid grid;
  if (d == 0) {
    auto p = grid_point(spec, VectorXd(0), Eigen::VectorXi(0));
    if (!p) throw ModeSearchFailure("explore_theta_grid: model could not be evaluated");
    p->weight = 1.0;
    grid.mode_theta = VectorXd(0);
    grid.mode_hessian = MatrixXd(0, 0);
    grid.step = VectorXd(0);
    grid.volume = 1.0;
    grid.log_evidence = p->log_posterior;
    grid.points.push_back(std::move(*p));
    return grid;
  }

  ModeSearch search(spec);
  const VectorXd mode = d == 1 ? search.find_1d() : search.find_2d();
  const double g0 = search.g(mode);
  if (!std::isfinite(g0)) throw ModeSearchFailure("explore_theta_grid: objective not finite at mode");
  const MatrixXd hess = finite_difference_hessian(search, mode, g0);
  Eigen::LLT<MatrixXd> neg(-hess);
  if (neg.info() != Eigen::Success)
    throw ModeSearchFailure("explore_theta_grid: Hessian at the mode is not negative definite");
  const MatrixXd cov = neg.solve(MatrixXd::Identity(d, d));
  grid.mode_theta = mode;
  grid.mode_hessian = hess;
  grid.step = kGridStepInSd * cov.diagonal().cwiseSqrt();
  grid.volume = grid.step.prod();

  std::map<std::vector<int>, std::optional<GridPoint>> cache;
  auto at = [&](const std::vector<int>& idx) -> const std::optional<GridPoint>& {
    auto it = cache.find(idx);
    if (it != cache.end()) return it->second;
    Eigen::VectorXi index(d);
    VectorXd theta = mode;
    for (Index k = 0; k < d; ++k) {
      index(k) = idx[k];
      theta(k) += idx[k] * grid.step(k);
    }
    return cache.emplace(idx, grid_point(spec, theta, index)).first->second;
  };
  auto within = [&](const std::vector<int>& idx) {
    const auto& p = at(idx);
    return p && g0 - p->log_posterior <= kGridLogDrop;
  };

  if (d == 1) {
    at({0});
    for (int dir : {-1, 1}) {
      for (int k = 1; k <= kMaxGridExtent; ++k) {
        if (!within({dir * k})) {
          at({dir * k});
          break;
        }
      }
    }
  } else {
    std::array<int, 4> bounds{-1, 1, -1, 1};  // i_lo, i_hi, j_lo, j_hi
    bool grew = true;
    while (grew) {
      grew = false;
      for (int side = 0; side < 4; ++side) {
        const int axis = side / 2;
        if (std::abs(bounds[side]) >= kMaxGridExtent) continue;
        const int edge = bounds[side];
        const int o_lo = bounds[axis == 0 ? 2 : 0];
        const int o_hi = bounds[axis == 0 ? 3 : 1];
        bool any = false;
        for (int o = o_lo; o <= o_hi; ++o) {
          const std::vector<int> idx = axis == 0 ? std::vector<int>{edge, o} : std::vector<int>{o, edge};
          if (within(idx)) any = true;
        }
        if (any) {
          bounds[side] += side % 2 == 0 ? -1 : 1;
          grew = true;
        }
      }
    }
    for (int i = bounds[0]; i <= bounds[1]; ++i)
      for (int j = bounds[2]; j <= bounds[3]; ++j) at({i, j});
  }

  for (auto& [idx, p] : cache)
    if (p) grid.points.push_back(std::move(*p));
  if (grid.points.empty()) throw EmptyGrid("explore_theta_grid: no grid point could be evaluated");
  double gmax = kNegInf;
  for (const auto& p : grid.points) gmax = std::max(gmax, p.log_posterior);
  double total = 0.0;
  for (auto& p : grid.points) {
    p.weight = std::exp(p.log_posterior - gmax);
    total += p.weight;
  }
  for (auto& p : grid.points) p.weight /= total;
  grid.log_evidence = gmax + std::log(total) + std::log(grid.volume);
  return grid;
}

double conditional_log_mlik(const LgmSpec& spec) { return explore_theta_grid(spec).log_evidence; }

std::vector<MarginalDensity> latent_marginals(const LgmSpec& spec, const ThetaGrid& grid) {
  if (grid.points.empty()) throw EmptyGrid("latent_marginals: empty grid");
  const Index n = spec.n_latent();
  const auto ng = static_cast<Index>(grid.points.size());
  std::vector<MarginalDensity> out;
  out.reserve(static_cast<std::size_t>(n));
  for (Index j = 0; j < n; ++j) {
    GaussianMixture mix;
    mix.means.resize(ng);
    mix.sds.resize(ng);
    mix.weights.resize(ng);
    for (Index g = 0; g < ng; ++g) {
      const auto& p = grid.points[static_cast<std::size_t>(g)];
      mix.means(g) = p.latent_mean(j);
      mix.sds(g) = std::sqrt(p.latent_variance(j));
      mix.weights(g) = p.weight;
    }
    out.emplace_back(mix.collapsed());
  }
  return out;
}

std::vector<MarginalDensity> theta_marginals(const LgmSpec& spec, const ThetaGrid& grid) {
  if (grid.points.empty()) throw EmptyGrid("theta_marginals: empty grid");
  std::vector<MarginalDensity> out;
  const Index d = spec.n_hyper();
  for (Index k = 0; k < d; ++k) {
    std::map<int, std::pair<double, double>> axis;  // index -> (theta, summed weight)
    for (const auto& p : grid.points) {
      auto& slot = axis[p.index(k)];
      slot.first = grid.mode_theta(k) + p.index(k) * grid.step(k);
      slot.second += p.weight;
    }
    std::vector<double> thetas, logs;
    for (const auto& [idx, tw] : axis) {
      if (!(tw.second > 0.0)) continue;
      thetas.push_back(tw.first);
      logs.push_back(std::log(tw.second));
    }
    if (thetas.empty()) throw EmptyGrid("theta_marginals: all grid weights vanish");
    out.emplace_back(spline_marginal(spec.hyper[static_cast<std::size_t>(k)], std::move(thetas), std::move(logs)));
  }
  return out;
}

ConditionalFit fit_conditional(const LgmSpec& spec) {
  ConditionalFit fit;
  fit.grid = explore_theta_grid(spec);
  fit.log_mlik = fit.grid.log_evidence;
  fit.latent = latent_marginals(spec, fit.grid);
  fit.hyper = theta_marginals(spec, fit.grid);
  return fit;
}

}  // namespace clgm
