#include "clgm/marginal.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

#include "clgm/errors.hpp"

namespace clgm {

namespace {

constexpr double kInvSqrt2Pi = 0.39894228040143267794;
constexpr double kMixtureHalfWidth = 5.0;
constexpr std::size_t kMinGridPoints = 11;

double normal_pdf(double z) { return kInvSqrt2Pi * std::exp(-0.5 * z * z); }
double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// Cumulative trapezoid integral of the interpolant at every abscissa.
Eigen::VectorXd cumulative(const GridDensity& g) {
  const Eigen::Index n = g.x.size();
  Eigen::VectorXd cum(n);
  cum(0) = 0.0;
  for (Eigen::Index k = 1; k < n; ++k)
    cum(k) = cum(k - 1) + 0.5 * (g.density(k) + g.density(k - 1)) * (g.x(k) - g.x(k - 1));
  return cum;
}

double grid_cdf(const GridDensity& g, const Eigen::VectorXd& cum, double t) {
  const Eigen::Index n = g.x.size();
  if (n == 1) return t < g.x(0) ? 0.0 : 1.0;
  if (t <= g.x(0)) return 0.0;
  if (t >= g.x(n - 1)) return cum(n - 1);
  const auto* begin = g.x.data();
  const Eigen::Index k = std::upper_bound(begin, begin + n, t) - begin - 1;
  const double h = g.x(k + 1) - g.x(k);
  const double s = t - g.x(k);
  const double slope = (g.density(k + 1) - g.density(k)) / h;
  return cum(k) + s * (g.density(k) + 0.5 * slope * s);
}

void check_grid(const GridDensity& g) {
  if (g.x.size() == 0 || g.x.size() != g.density.size())
    throw DegenerateSupport("GridDensity: abscissae and densities must be non-empty and aligned");
  for (Eigen::Index k = 1; k < g.x.size(); ++k)
    if (!(g.x(k) > g.x(k - 1)))
      throw DegenerateSupport("GridDensity: abscissae must be strictly increasing");
}

}  // namespace

GaussianMixture GaussianMixture::single(double mean, double sd) {
  GaussianMixture m;
  m.means = Eigen::VectorXd::Constant(1, mean);
  m.sds = Eigen::VectorXd::Constant(1, sd);
  m.weights = Eigen::VectorXd::Ones(1);
  return m;
}

double GaussianMixture::density(double x) const {
  double d = 0.0;
  for (Eigen::Index k = 0; k < size(); ++k)
    d += weights(k) * normal_pdf((x - means(k)) / sds(k)) / sds(k);
  return d;
}

double GaussianMixture::cdf(double x) const {
  double p = 0.0;
  for (Eigen::Index k = 0; k < size(); ++k) p += weights(k) * normal_cdf((x - means(k)) / sds(k));
  return p;
}

std::pair<double, double> GaussianMixture::support() const {
  if (size() == 0) throw DegenerateSupport("GaussianMixture: no components");
  return {(means - kMixtureHalfWidth * sds).minCoeff(), (means + kMixtureHalfWidth * sds).maxCoeff()};
}

GaussianMixture GaussianMixture::collapsed() const {
  std::vector<double> mu, sd, w;
  for (Eigen::Index k = 0; k < size(); ++k) {
    bool merged = false;
    for (std::size_t j = 0; j < mu.size(); ++j) {
      if (mu[j] == means(k) && sd[j] == sds(k)) {
        w[j] += weights(k);
        merged = true;
        break;
      }
    }
    if (!merged) {
      mu.push_back(means(k));
      sd.push_back(sds(k));
      w.push_back(weights(k));
    }
  }
  GaussianMixture out;
  out.means = Eigen::Map<Eigen::VectorXd>(mu.data(), static_cast<Eigen::Index>(mu.size()));
  out.sds = Eigen::Map<Eigen::VectorXd>(sd.data(), static_cast<Eigen::Index>(sd.size()));
  out.weights = Eigen::Map<Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
  return out;
}

double GridDensity::integral() const {
  if (is_point_mass()) return 1.0;
  return cumulative(*this)(x.size() - 1);
}

double GridDensity::value_at(double t) const {
  const Eigen::Index n = x.size();
  if (n == 1 || t < x(0) || t > x(n - 1)) return 0.0;
  const auto* begin = x.data();
  Eigen::Index k = std::upper_bound(begin, begin + n, t) - begin - 1;
  if (k >= n - 1) return density(n - 1);
  const double s = (t - x(k)) / (x(k + 1) - x(k));
  return (1.0 - s) * density(k) + s * density(k + 1);
}

double GridDensity::cdf(double t) const { return grid_cdf(*this, cumulative(*this), t); }

GridDensity normalize(GridDensity g) {
  check_grid(g);
  if (g.is_point_mass()) {
    g.density(0) = 1.0;
    return g;
  }
  if ((g.density.array() < 0.0).any() || !g.density.allFinite())
    throw DegenerateSupport("normalize: densities must be finite and non-negative");
  const double total = g.integral();
  if (!(total > 0.0)) throw DegenerateSupport("normalize: density integrates to zero");
  g.density /= total;
  return g;
}

GridDensity to_grid(const MarginalDensity& m, std::size_t n_points) {
  if (n_points < kMinGridPoints) throw DegenerateSupport("to_grid: need at least 11 points");
  if (const auto* g = std::get_if<GridDensity>(&m)) return normalize(*g);
  const auto& mix = std::get<GaussianMixture>(m);
  const auto [lo, hi] = mix.support();
  if (!(hi > lo) || !std::isfinite(lo) || !std::isfinite(hi))
    throw DegenerateSupport("to_grid: mixture has zero-width support");
  GridDensity out;
  out.x = Eigen::VectorXd::LinSpaced(static_cast<Eigen::Index>(n_points), lo, hi);
  out.density = out.x.unaryExpr([&](double t) { return mix.density(t); });
  return normalize(std::move(out));
}

std::pair<double, double> support(const MarginalDensity& m) {
  if (const auto* g = std::get_if<GridDensity>(&m)) return {g->x(0), g->x(g->x.size() - 1)};
  return std::get<GaussianMixture>(m).support();
}

GridDensity bma_average(std::span<const MarginalDensity> ms, std::size_t n_points) {
  if (ms.empty()) throw EmptyList("bma_average: no marginals to average");
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const auto& m : ms) {
    const auto [a, b] = support(m);
    lo = std::min(lo, a);
    hi = std::max(hi, b);
  }
  if (!(hi > lo)) {
    // Every input is the same point mass.
    GridDensity point;
    point.x = Eigen::VectorXd::Constant(1, lo);
    point.density = Eigen::VectorXd::Ones(1);
    return point;
  }
  GridDensity out;
  out.x = Eigen::VectorXd::LinSpaced(static_cast<Eigen::Index>(n_points), lo, hi);
  out.density = Eigen::VectorXd::Zero(out.x.size());
  for (const auto& m : ms) {
    if (const auto* g = std::get_if<GridDensity>(&m)) {
      const GridDensity gn = normalize(*g);
      for (Eigen::Index k = 0; k < out.x.size(); ++k) out.density(k) += gn.value_at(out.x(k));
    } else {
      const auto& mix = std::get<GaussianMixture>(m);
      const auto [a, b] = mix.support();
      for (Eigen::Index k = 0; k < out.x.size(); ++k)
        if (out.x(k) >= a && out.x(k) <= b) out.density(k) += mix.density(out.x(k));
    }
  }
  out.density /= static_cast<double>(ms.size());
  return normalize(std::move(out));
}

Moments moments(const MarginalDensity& m) {
  if (const auto* mix = std::get_if<GaussianMixture>(&m)) {
    const double mean = mix->weights.dot(mix->means);
    const double second =
        mix->weights.dot((mix->sds.array().square() + mix->means.array().square()).matrix());
    return {mean, std::sqrt(std::max(0.0, second - mean * mean))};
  }
  const auto& g = std::get<GridDensity>(m);
  if (g.is_point_mass()) return {g.x(0), 0.0};
  double m0 = 0.0, m1 = 0.0, m2 = 0.0;
  for (Eigen::Index k = 1; k < g.x.size(); ++k) {
    const double h = 0.5 * (g.x(k) - g.x(k - 1));
    m0 += h * (g.density(k) + g.density(k - 1));
    m1 += h * (g.x(k) * g.density(k) + g.x(k - 1) * g.density(k - 1));
    m2 += h * (g.x(k) * g.x(k) * g.density(k) + g.x(k - 1) * g.x(k - 1) * g.density(k - 1));
  }
  const double mean = m1 / m0;
  return {mean, std::sqrt(std::max(0.0, m2 / m0 - mean * mean))};
}

double cdf(const MarginalDensity& m, double x) {
  if (const auto* mix = std::get_if<GaussianMixture>(&m)) return mix->cdf(x);
  return std::get<GridDensity>(m).cdf(x);
}

std::vector<double> quantiles(const MarginalDensity& m, std::span<const double> ps) {
  std::vector<double> out;
  out.reserve(ps.size());
  if (const auto* mix = std::get_if<GaussianMixture>(&m)) {
    auto [lo, hi] = mix->support();
    lo -= 10.0 * mix->sds.maxCoeff();
    hi += 10.0 * mix->sds.maxCoeff();
    for (double p : ps) {
      double a = lo, b = hi;
      for (int it = 0; it < 200 && b - a > 1e-12 * (1.0 + std::abs(a)); ++it) {
        const double mid = 0.5 * (a + b);
        (mix->cdf(mid) < p ? a : b) = mid;
      }
      out.push_back(0.5 * (a + b));
    }
    return out;
  }
  const auto& g = std::get<GridDensity>(m);
  if (g.is_point_mass()) return std::vector<double>(ps.size(), g.x(0));
  const Eigen::VectorXd cum = cumulative(g);
  const double total = cum(cum.size() - 1);
  for (double p : ps) {
    const double target = p * total;
    const auto* begin = cum.data();
    const Eigen::Index n = cum.size();
    Eigen::Index k = std::lower_bound(begin, begin + n, target) - begin;
    if (k <= 0) {
      out.push_back(g.x(0));
    } else if (k >= n) {
      out.push_back(g.x(n - 1));
    } else {
      const double span = cum(k) - cum(k - 1);
      const double s = span > 0.0 ? (target - cum(k - 1)) / span : 0.0;
      out.push_back(g.x(k - 1) + s * (g.x(k) - g.x(k - 1)));
    }
  }
  return out;
}

double ks_distance(std::span<const double> samples, const MarginalDensity& m) {
  std::vector<double> s(samples.begin(), samples.end());
  std::sort(s.begin(), s.end());
  const double n = static_cast<double>(s.size());
  std::function<double(double)> f;
  Eigen::VectorXd cum;
  if (const auto* g = std::get_if<GridDensity>(&m)) {
    cum = cumulative(*g);
    f = [g, &cum](double t) { return g->is_point_mass() ? (t < g->x(0) ? 0.0 : 1.0) : grid_cdf(*g, cum, t) / cum(cum.size() - 1); };
  } else {
    f = [&](double t) { return std::get<GaussianMixture>(m).cdf(t); };
  }
  double d = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    // Only evaluate at the last of a run of ties.
    if (i + 1 < s.size() && s[i + 1] == s[i]) continue;
    const double fi = f(s[i]);
    std::size_t first = i;
    while (first > 0 && s[first - 1] == s[i]) --first;
    d = std::max({d, std::abs(static_cast<double>(i + 1) / n - fi),
                  std::abs(fi - static_cast<double>(first) / n)});
  }
  return d;
}

double ks_distance(const MarginalDensity& a, const MarginalDensity& b) {
  const auto [a0, a1] = support(a);
  const auto [b0, b1] = support(b);
  const double lo = std::min(a0, b0);
  const double hi = std::max(a1, b1);
  std::vector<double> ts;
  if (hi > lo) {
    const Eigen::VectorXd fine = Eigen::VectorXd::LinSpaced(4001, lo, hi);
    ts.assign(fine.data(), fine.data() + fine.size());
  } else {
    ts.push_back(lo);
  }
  for (const auto* m : {&a, &b})
    if (const auto* g = std::get_if<GridDensity>(m)) ts.insert(ts.end(), g->x.data(), g->x.data() + g->x.size());
  auto cdf_of = [](const MarginalDensity& m) -> std::function<double(double)> {
    if (const auto* g = std::get_if<GridDensity>(&m)) {
      const GridDensity gn = normalize(*g);
      const Eigen::VectorXd cum = cumulative(gn);
      return [gn, cum](double t) { return grid_cdf(gn, cum, t); };
    }
    const auto mix = std::get<GaussianMixture>(m);
    return [mix](double t) { return mix.cdf(t); };
  };
  const auto fa = cdf_of(a);
  const auto fb = cdf_of(b);
  double d = 0.0;
  for (double t : ts) d = std::max(d, std::abs(fa(t) - fb(t)));
  return d;
}

double ks_two_sample(std::span<const double> a, std::span<const double> b) {
  std::vector<double> x(a.begin(), a.end()), y(b.begin(), b.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  const double na = static_cast<double>(x.size());
  const double nb = static_cast<double>(y.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < x.size() && j < y.size()) {
    const double t = std::min(x[i], y[j]);
    while (i < x.size() && x[i] <= t) ++i;
    while (j < y.size() && y[j] <= t) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

GridDensity histogram_density(std::span<const double> samples, std::size_t n_bins) {
  if (samples.empty()) throw EmptyList("histogram_density: no samples");
  const auto [mn, mx] = std::minmax_element(samples.begin(), samples.end());
  const double lo = *mn;
  const double hi = *mx;
  GridDensity g;
  if (!(hi > lo)) {
    g.x = Eigen::VectorXd::Constant(1, lo);
    g.density = Eigen::VectorXd::Ones(1);
    return g;
  }
  const double w = (hi - lo) / static_cast<double>(n_bins);
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n_bins));
  for (double s : samples) {
    auto k = static_cast<Eigen::Index>((s - lo) / w);
    counts(std::min<Eigen::Index>(k, counts.size() - 1)) += 1.0;
  }
  g.x = Eigen::VectorXd::LinSpaced(counts.size(), lo + 0.5 * w, hi - 0.5 * w);
  g.density = counts / (static_cast<double>(samples.size()) * w);
  return normalize(std::move(g));
}

Moments sample_moments(std::span<const double> samples) {
  if (samples.empty()) throw EmptyList("sample_moments: no samples");
  const double n = static_cast<double>(samples.size());
  double mean = 0.0;
  for (double s : samples) mean += s;
  mean /= n;
  double ss = 0.0;
  for (double s : samples) ss += (s - mean) * (s - mean);
  return {mean, samples.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0};
}

std::vector<double> sample_quantiles(std::vector<double> samples, std::span<const double> ps) {
  if (samples.empty()) throw EmptyList("sample_quantiles: no samples");
  std::sort(samples.begin(), samples.end());
  std::vector<double> out;
  for (double p : ps) {
    const double h = p * static_cast<double>(samples.size() - 1);
    const auto k = static_cast<std::size_t>(std::floor(h));
    const std::size_t k1 = std::min(k + 1, samples.size() - 1);
    out.push_back(samples[k] + (h - static_cast<double>(k)) * (samples[k1] - samples[k]));
  }
  return out;
}

void write_grid_csv(std::ostream& os, const GridDensity& g) {
  os << "x,density\n";
  char buf[64];
  for (Eigen::Index k = 0; k < g.x.size(); ++k) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", g.x(k), g.density(k));
    os << buf;
  }
}

GridDensity read_grid_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line.rfind("x,density", 0) != 0)
    throw IoError("read_grid_csv: expected header 'x,density'");
  std::vector<double> xs, ds;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw IoError("read_grid_csv: malformed row '" + line + "'");
    xs.push_back(std::stod(line.substr(0, comma)));
    ds.push_back(std::stod(line.substr(comma + 1)));
  }
  GridDensity g;
  g.x = Eigen::Map<Eigen::VectorXd>(xs.data(), static_cast<Eigen::Index>(xs.size()));
  g.density = Eigen::Map<Eigen::VectorXd>(ds.data(), static_cast<Eigen::Index>(ds.size()));
  check_grid(g);
  return g;
}

}  // namespace clgm
