#pragma once

#include <Eigen/Dense>

#include <iosfwd>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace clgm {

/// Finite mixture of univariate Gaussians with weights summing to one.
struct GaussianMixture {
  Eigen::VectorXd means;
  Eigen::VectorXd sds;
  Eigen::VectorXd weights;

  static GaussianMixture single(double mean, double sd);

  Eigen::Index size() const { return means.size(); }
  double density(double x) const;
  double cdf(double x) const;
  // [min(mu - 5 sd), max(mu + 5 sd)]
  std::pair<double, double> support() const;
  // Merges components with identical mean and sd.
  GaussianMixture collapsed() const;
};

/// Density tabulated on strictly increasing abscissae and linearly
/// interpolated between them. A single abscissa is a point mass.
struct GridDensity {
  Eigen::VectorXd x;
  Eigen::VectorXd density;

  bool is_point_mass() const { return x.size() == 1; }
  double integral() const;
  // Linear interpolation, zero outside [x_0, x_n].
  double value_at(double t) const;
  // Exact integral of the interpolant from x_0 to t.
  double cdf(double t) const;
};

using MarginalDensity = std::variant<GaussianMixture, GridDensity>;

inline constexpr std::size_t kDefaultGridPoints = 201;

GridDensity normalize(GridDensity g);

GridDensity to_grid(const MarginalDensity& m, std::size_t n_points = kDefaultGridPoints);

/// Equal-weight average on a common grid spanning the union of supports.
GridDensity bma_average(std::span<const MarginalDensity> ms,
                        std::size_t n_points = kDefaultGridPoints);

struct Moments {
  double mean = 0.0;
  double sd = 0.0;
};

Moments moments(const MarginalDensity& m);
double cdf(const MarginalDensity& m, double x);
std::pair<double, double> support(const MarginalDensity& m);
std::vector<double> quantiles(const MarginalDensity& m, std::span<const double> ps);

/// sup |F_n - F| between the empirical CDF of samples and m.
double ks_distance(std::span<const double> samples, const MarginalDensity& m);
/// sup |F_a - F_b| evaluated on a fine grid over the joint support.
double ks_distance(const MarginalDensity& a, const MarginalDensity& b);
double ks_two_sample(std::span<const double> a, std::span<const double> b);

/// Normalized histogram of samples tabulated at bin centres (plus zero-valued
/// end points), for sample-based marginals in output files.
GridDensity histogram_density(std::span<const double> samples, std::size_t n_bins = 100);

Moments sample_moments(std::span<const double> samples);
std::vector<double> sample_quantiles(std::vector<double> samples, std::span<const double> ps);

void write_grid_csv(std::ostream& os, const GridDensity& g);
GridDensity read_grid_csv(std::istream& is);

}  // namespace clgm
