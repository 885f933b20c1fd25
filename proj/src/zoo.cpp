#include "clgm/zoo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "clgm/errors.hpp"
#include "clgm/io.hpp"

namespace clgm {

namespace {

MatrixXd with_intercept(const MatrixXd& covariates) {
  MatrixXd x(covariates.rows(), covariates.cols() + 1);
  x.col(0).setOnes();
  x.rightCols(covariates.cols()) = covariates;
  return x;
}

std::function<MatrixXd(const VectorXd&)> diagonal_precision(VectorXd diag) {
  return [diag = std::move(diag)](const VectorXd&) -> MatrixXd { return diag.asDiagonal(); };
}

LgmSpec base_spec(const ConditionerSpec& spec, VectorXd y, MatrixXd design, VectorXd precision,
                  std::vector<std::string> names) {
  LgmSpec out;
  out.y = std::move(y);
  out.family = spec.family;
  out.structure.design = std::move(design);
  out.structure.precision = diagonal_precision(std::move(precision));
  out.offset = VectorXd::Zero(out.y.size());
  out.hyper = spec.hyper;
  out.latent_names = std::move(names);
  return out;
}

}  // namespace

SimulatedDataset simulate_linear(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 1.0);  // tau = 1
  SimulatedDataset d;
  d.scenario = "linear";
  d.seed = seed;
  d.covariates.resize(kSimulatedRows, 2);
  d.y.resize(kSimulatedRows);
  for (Index i = 0; i < kSimulatedRows; ++i) {
    d.covariates(i, 0) = unif(rng);
    d.covariates(i, 1) = unif(rng);
    d.y(i) = 3.0 + 2.0 * d.covariates(i, 0) - 2.0 * d.covariates(i, 1) + noise(rng);
  }
  d.covariate_names = {"u1", "u2"};
  d.truth = {{"alpha", 3.0}, {"beta1", 2.0}, {"beta2", -2.0}, {"tau", 1.0}};
  return d;
}

SimulatedDataset simulate_poisson(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  SimulatedDataset d;
  d.scenario = "poisson";
  d.seed = seed;
  d.covariates.resize(kSimulatedRows, 2);
  d.y.resize(kSimulatedRows);
  for (Index i = 0; i < kSimulatedRows; ++i) {
    d.covariates(i, 0) = unif(rng);
    d.covariates(i, 1) = unif(rng);
    const double mu = std::exp(0.5 + 2.0 * d.covariates(i, 0) - 2.0 * d.covariates(i, 1));
    d.y(i) = static_cast<double>(std::poisson_distribution<long>(mu)(rng));
  }
  d.covariate_names = {"u1", "u2"};
  d.truth = {{"alpha", 0.5}, {"beta1", 2.0}, {"beta2", -2.0}};
  return d;
}

SimulatedDataset simulate_missing(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 1.0);
  SimulatedDataset d;
  d.scenario = "missing-sim";
  d.seed = seed;
  d.covariates.resize(kSimulatedRows, 1);
  d.y.resize(kSimulatedRows);
  for (Index i = 0; i < kSimulatedRows; ++i) {
    d.covariates(i, 0) = unif(rng);
    d.y(i) = 3.0 + 2.0 * d.covariates(i, 0) + noise(rng);
  }
  std::vector<Index> rows(static_cast<std::size_t>(kSimulatedRows));
  std::iota(rows.begin(), rows.end(), Index{0});
  std::shuffle(rows.begin(), rows.end(), rng);
  rows.resize(static_cast<std::size_t>(kSimulatedMissing));
  std::sort(rows.begin(), rows.end());
  d.missing_rows = rows;
  d.held_out.resize(kSimulatedMissing);
  for (Index k = 0; k < kSimulatedMissing; ++k) {
    d.held_out(k) = d.covariates(rows[static_cast<std::size_t>(k)], 0);
    d.covariates(rows[static_cast<std::size_t>(k)], 0) = std::nan("");
  }
  d.covariate_names = {"u1"};
  d.truth = {{"alpha", 3.0}, {"beta1", 2.0}, {"tau", 1.0}};
  return d;
}

Index ConditionerSpec::zc_dim() const {
  switch (mode) {
    case ConditioningMode::OffsetBeta:
      return static_cast<Index>(conditioned_columns.size());
    case ConditioningMode::MissingCovariate:
      return static_cast<Index>(missing_rows.size());
    case ConditioningMode::SpatialLagRho:
    case ConditioningMode::SpatialErrorLambda:
      return 1;
  }
  return 0;
}

void ConditionerSpec::validate() const {
  if (X.rows() != y.size()) throw DimensionMismatch("ConditionerSpec: X rows differ from y length");
  if (fixed_effect_precision.size() != X.cols())
    throw DimensionMismatch("ConditionerSpec: one prior precision per column is required");
  if (!column_names.empty() && static_cast<Index>(column_names.size()) != X.cols())
    throw DimensionMismatch("ConditionerSpec: column_names length differs from X columns");
  for (Index c : conditioned_columns)
    if (c < 0 || c >= X.cols()) throw IndexError("ConditionerSpec: conditioned column out of range");
  if (mode == ConditioningMode::MissingCovariate) {
    if (missing_column < 0 || missing_column >= X.cols())
      throw IndexError("ConditionerSpec: missing column out of range");
    for (Index r : missing_rows)
      if (r < 0 || r >= X.rows()) throw IndexError("ConditionerSpec: missing row out of range");
  }
  if (mode == ConditioningMode::SpatialLagRho || mode == ConditioningMode::SpatialErrorLambda) {
    if (W.rows() != y.size() || W.cols() != y.size())
      throw DimensionMismatch("ConditionerSpec: W must be n x n");
    if (W.diagonal().cwiseAbs().maxCoeff() != 0.0)
      throw DomainError("ConditionerSpec: W must have a zero diagonal");
  }
}

LgmSpec condition_offset_beta(const ConditionerSpec& spec, const VectorXd& beta) {
  if (beta.size() != static_cast<Index>(spec.conditioned_columns.size()))
    throw DimensionMismatch("condition_offset_beta: beta length differs from conditioned columns");
  std::vector<Index> latent;
  for (Index c = 0; c < spec.X.cols(); ++c)
    if (std::find(spec.conditioned_columns.begin(), spec.conditioned_columns.end(), c) ==
        spec.conditioned_columns.end())
      latent.push_back(c);
  MatrixXd design(spec.X.rows(), static_cast<Index>(latent.size()));
  VectorXd precision(static_cast<Index>(latent.size()));
  std::vector<std::string> names;
  for (std::size_t k = 0; k < latent.size(); ++k) {
    design.col(static_cast<Index>(k)) = spec.X.col(latent[k]);
    precision(static_cast<Index>(k)) = spec.fixed_effect_precision(latent[k]);
    if (!spec.column_names.empty()) names.push_back(spec.column_names[static_cast<std::size_t>(latent[k])]);
  }
  LgmSpec out = base_spec(spec, spec.y, std::move(design), std::move(precision), std::move(names));
  for (std::size_t k = 0; k < spec.conditioned_columns.size(); ++k)
    out.offset += beta(static_cast<Index>(k)) * spec.X.col(spec.conditioned_columns[k]);
  return out;
}

LgmSpec condition_missing_covariate(const ConditionerSpec& spec, const VectorXd& imputed) {
  if (imputed.size() != static_cast<Index>(spec.missing_rows.size()))
    throw IndexError("condition_missing_covariate: one imputed value per missing row is required");
  if (spec.missing_column < 0 || spec.missing_column >= spec.X.cols())
    throw IndexError("condition_missing_covariate: missing column out of range");
  MatrixXd design = spec.X;
  for (std::size_t k = 0; k < spec.missing_rows.size(); ++k) {
    const Index r = spec.missing_rows[k];
    if (r < 0 || r >= design.rows()) throw IndexError("condition_missing_covariate: row out of range");
    design(r, spec.missing_column) = imputed(static_cast<Index>(k));
  }
  return base_spec(spec, spec.y, std::move(design), spec.fixed_effect_precision, spec.column_names);
}

MatrixXd spatial_filter_inverse(const MatrixXd& W, double rho) {
  const Index n = W.rows();
  const MatrixXd a = MatrixXd::Identity(n, n) - rho * W;
  Eigen::PartialPivLU<MatrixXd> lu(a);
  if (!(lu.rcond() > 1e-12)) throw SingularTransform("I - rho W is numerically singular");
  return lu.inverse();
}

LgmSpec condition_spatial_lag(const ConditionerSpec& spec, double rho) {
  const Index n = spec.y.size();
  if (spec.W.rows() != n || spec.W.cols() != n)
    throw DimensionMismatch("condition_spatial_lag: W must be n x n");
  const MatrixXd filter = MatrixXd::Identity(n, n) - rho * spec.W;
  Eigen::PartialPivLU<MatrixXd> lu(filter);
  if (!(lu.rcond() > 1e-12)) throw SingularTransform("I - rho W is numerically singular");
  // (I - rho W) y = X beta + u, u ~ N(0, tau^-1 I); the Jacobian |I - rho W|
  // keeps the evidence on the scale of y.
  const double log_abs_det = lu.matrixLU().diagonal().cwiseAbs().array().log().sum();
  LgmSpec out = base_spec(spec, filter * spec.y, spec.X, spec.fixed_effect_precision, spec.column_names);
  out.log_jacobian = log_abs_det;
  return out;
}

LgmSpec condition_spatial_error(const ConditionerSpec& spec, double lambda) {
  const Index n = spec.y.size();
  if (spec.W.rows() != n || spec.W.cols() != n)
    throw DimensionMismatch("condition_spatial_error: W must be n x n");
  const MatrixXd filter = MatrixXd::Identity(n, n) - lambda * spec.W;
  Eigen::PartialPivLU<MatrixXd> lu(filter);
  if (!(lu.rcond() > 1e-12)) throw SingularTransform("I - lambda W is numerically singular");
  LgmSpec out = base_spec(spec, filter * spec.y, filter * spec.X, spec.fixed_effect_precision, spec.column_names);
  out.log_jacobian = lu.matrixLU().diagonal().cwiseAbs().array().log().sum();
  return out;
}

LgmSpec condition(const ConditionerSpec& spec, const VectorXd& zc) {
  switch (spec.mode) {
    case ConditioningMode::OffsetBeta:
      return condition_offset_beta(spec, zc);
    case ConditioningMode::MissingCovariate:
      return condition_missing_covariate(spec, zc);
    case ConditioningMode::SpatialLagRho:
      if (zc.size() != 1) throw DimensionMismatch("condition: spatial lag takes a single rho");
      return condition_spatial_lag(spec, zc(0));
    case ConditioningMode::SpatialErrorLambda:
      if (zc.size() != 1) throw DimensionMismatch("condition: spatial error takes a single lambda");
      return condition_spatial_error(spec, zc(0));
  }
  throw ConfigError("condition: unknown conditioning mode");
}

ConditionalModel inla_model(ConditionerSpec spec) {
  spec.validate();
  return [spec = std::move(spec)](const VectorXd& zc) {
    const LgmSpec model = condition(spec, zc);
    ConditionalFit fit = fit_conditional(model);
    ConditionalResult r;
    r.log_cml = fit.log_mlik;
    r.marginals = std::move(fit.latent);
    for (auto& h : fit.hyper) r.marginals.push_back(std::move(h));
    return r;
  };
}

std::vector<std::string> conditional_marginal_names(const ConditionerSpec& spec) {
  std::vector<std::string> names;
  if (spec.mode == ConditioningMode::OffsetBeta) {
    for (Index c = 0; c < spec.X.cols(); ++c)
      if (std::find(spec.conditioned_columns.begin(), spec.conditioned_columns.end(), c) ==
          spec.conditioned_columns.end())
        names.push_back(spec.column_names[static_cast<std::size_t>(c)]);
  } else {
    names = spec.column_names;
  }
  for (const auto& h : spec.hyper) names.push_back(h.name);
  return names;
}

namespace {

ConditionerSpec regression_conditioner(const SimulatedDataset& data, LikelihoodFamily family) {
  ConditionerSpec c;
  c.mode = ConditioningMode::OffsetBeta;
  c.y = data.y;
  c.X = with_intercept(data.covariates);
  c.column_names = {"alpha"};
  for (std::size_t k = 0; k < data.covariate_names.size(); ++k)
    c.column_names.push_back("beta" + std::to_string(k + 1));
  c.fixed_effect_precision = VectorXd::Constant(c.X.cols(), kFixedEffectPrecision);
  c.family = family;
  if (family.kind == FamilyKind::GaussianUnknownPrecision) c.hyper = {precision_hyper("tau")};
  return c;
}

}  // namespace

Scenario linear_scenario(const SimulatedDataset& data) {
  Scenario s;
  s.name = "linear";
  s.conditioner = regression_conditioner(data, LikelihoodFamily::gaussian_unknown());
  s.conditioner.conditioned_columns = {1, 2};
  s.zc_names = {"beta1", "beta2"};
  s.prior = ZcPrior::iid(2, PriorTerm::gaussian(0.0, kFixedEffectPrecision));
  s.kernel = ProposalKernel::random_walk(VectorXd::Constant(2, kRegressionKernelSd));
  s.initial = VectorXd::Zero(2);
  return s;
}

Scenario poisson_scenario(const SimulatedDataset& data) {
  Scenario s;
  s.name = "poisson";
  s.conditioner = regression_conditioner(data, LikelihoodFamily::poisson_log());
  s.conditioner.conditioned_columns = {1, 2};
  s.zc_names = {"beta1", "beta2"};
  s.prior = ZcPrior::iid(2, PriorTerm::gaussian(0.0, kFixedEffectPrecision));
  s.kernel = ProposalKernel::random_walk(VectorXd::Constant(2, kRegressionKernelSd));
  s.initial = VectorXd::Zero(2);
  return s;
}

Scenario missing_covariate_scenario(const SimulatedDataset& data) {
  Scenario s;
  s.name = "missing-sim";
  s.conditioner = regression_conditioner(data, LikelihoodFamily::gaussian_unknown());
  s.conditioner.mode = ConditioningMode::MissingCovariate;
  s.conditioner.missing_column = 1;
  s.conditioner.missing_rows = data.missing_rows;
  const Index m = static_cast<Index>(data.missing_rows.size());
  for (Index r : data.missing_rows) s.zc_names.push_back("u1_row" + std::to_string(r + 1));
  // Zero-mean prior with four times the variance of U(0, 1).
  s.prior = ZcPrior::iid(m, PriorTerm::gaussian(0.0, 1.0 / (4.0 / 12.0)));
  std::vector<double> observed;
  for (Index i = 0; i < data.covariates.rows(); ++i)
    if (!std::isnan(data.covariates(i, 0))) observed.push_back(data.covariates(i, 0));
  const Moments mom = sample_moments(observed);
  s.kernel = ProposalKernel::independence(VectorXd::Constant(m, mom.mean), VectorXd::Constant(m, mom.sd));
  s.initial = VectorXd::Constant(m, mom.mean);
  return s;
}

HittersData load_hitters(const std::filesystem::path& dir) {
  const CsvTable t = read_csv(dir / "hitters.csv");
  HittersData d;
  d.names = {"AtBat", "Hits", "HmRun", "Runs", "RBI"};
  d.salary = t.col("salary");
  d.covariates.resize(t.values.rows(), 5);
  for (Index k = 0; k < 5; ++k) d.covariates.col(k) = t.col(d.names[static_cast<std::size_t>(k)]);
  if (!d.salary.allFinite() || !d.covariates.allFinite())
    throw IoError("hitters.csv: expected complete cases only");
  return d;
}

NhanesData load_nhanes(const std::filesystem::path& dir) {
  const CsvTable t = read_csv(dir / "nhanes.csv");
  return {t.col("age"), t.col("bmi"), t.col("hyp"), t.col("chl")};
}

ColumbusData load_columbus(const std::filesystem::path& dir) {
  const CsvTable t = read_csv(dir / "columbus.csv");
  const CsvTable w = read_csv(dir / "columbus_w.csv");
  ColumbusData d;
  d.crime = t.col("crime");
  d.income = t.col("income");
  d.hvalue = t.col("hvalue");
  const Index n = t.values.rows();
  const VectorXd ids = t.col("id");
  auto position = [&](double id) {
    for (Index i = 0; i < n; ++i)
      if (ids(i) == id) return i;
    throw IoError("columbus_w.csv: unknown region id " + std::to_string(id));
  };
  d.W = MatrixXd::Zero(n, n);
  const Index r = w.column("row"), c = w.column("col"), v = w.column("weight");
  for (Index k = 0; k < w.values.rows(); ++k)
    d.W(position(w.values(k, r)), position(w.values(k, c))) = w.values(k, v);
  return d;
}

HittersData standardize(const HittersData& data) {
  HittersData out = data;
  auto scale = [](VectorXd v) {
    const double mean = v.mean();
    v.array() -= mean;
    const double sd = std::sqrt(v.squaredNorm() / static_cast<double>(v.size() - 1));
    return VectorXd(v / sd);
  };
  out.salary = scale(data.salary);
  for (Index k = 0; k < data.covariates.cols(); ++k) out.covariates.col(k) = scale(data.covariates.col(k));
  return out;
}

Scenario lasso_scenario(const HittersData& standardized, double sigma, double kernel_sd) {
  if (!(sigma > 0.0)) throw ConfigError("lasso: sigma must be positive");
  Scenario s;
  s.name = "lasso";
  auto& c = s.conditioner;
  c.mode = ConditioningMode::OffsetBeta;
  c.y = standardized.salary;
  c.X = with_intercept(standardized.covariates);
  c.column_names = {"intercept"};
  c.column_names.insert(c.column_names.end(), standardized.names.begin(), standardized.names.end());
  c.fixed_effect_precision = VectorXd::Constant(c.X.cols(), kFixedEffectPrecision);
  c.family = LikelihoodFamily::gaussian_unknown();
  c.hyper = {precision_hyper("tau")};
  const Index p = standardized.covariates.cols();
  for (Index k = 1; k <= p; ++k) c.conditioned_columns.push_back(k);
  s.zc_names = standardized.names;
  s.prior = ZcPrior::iid(p, PriorTerm::laplace(0.0, sigma));
  s.kernel = ProposalKernel::random_walk(VectorXd::Constant(p, kernel_sd));
  s.initial = VectorXd::Zero(p);
  return s;
}

Scenario nhanes_scenario(const NhanesData& data) {
  Scenario s;
  s.name = "nhanes";
  auto& c = s.conditioner;
  const Index n = data.age.size();
  c.mode = ConditioningMode::MissingCovariate;
  c.y = data.chl;
  c.X.resize(n, 4);
  c.X.col(0).setOnes();
  c.X.col(1) = data.bmi;
  c.X.col(2) = (data.age.array() == 2.0).cast<double>();
  c.X.col(3) = (data.age.array() == 3.0).cast<double>();
  c.column_names = {"beta0", "beta1", "beta2", "beta3"};
  c.fixed_effect_precision = VectorXd::Constant(4, kFixedEffectPrecision);
  c.fixed_effect_precision(0) = kFlatPrecision;
  c.family = LikelihoodFamily::gaussian_unknown();
  c.hyper = {precision_hyper("tau")};
  c.missing_column = 1;
  std::vector<double> observed;
  for (Index i = 0; i < n; ++i) {
    if (std::isnan(data.bmi(i))) {
      c.missing_rows.push_back(i);
      s.zc_names.push_back("bmi_row" + std::to_string(i + 1));
    } else {
      observed.push_back(data.bmi(i));
    }
  }
  const Index m = static_cast<Index>(c.missing_rows.size());
  // Centred at the observed mean with four times the observed variance.
  const Moments mom = sample_moments(observed);
  const double prior_var = 4.0 * mom.sd * mom.sd;
  s.prior = ZcPrior::iid(m, PriorTerm::gaussian(mom.mean, 1.0 / prior_var));
  s.kernel = ProposalKernel::independence(VectorXd::Constant(m, mom.mean),
                                          VectorXd::Constant(m, std::sqrt(prior_var)));
  s.initial = VectorXd::Constant(m, mom.mean);
  return s;
}

Scenario columbus_scenario(const ColumbusData& data, double kernel_sd, bool spatial_error) {
  Scenario s;
  s.name = "columbus";
  auto& c = s.conditioner;
  const Index n = data.crime.size();
  c.mode = spatial_error ? ConditioningMode::SpatialErrorLambda : ConditioningMode::SpatialLagRho;
  c.y = data.crime;
  c.X.resize(n, 3);
  c.X.col(0).setOnes();
  c.X.col(1) = data.income;
  c.X.col(2) = data.hvalue;
  c.column_names = {"intercept", "income", "hvalue"};
  c.fixed_effect_precision = VectorXd::Constant(3, kFixedEffectPrecision);
  c.family = LikelihoodFamily::gaussian_unknown();
  c.hyper = {precision_hyper("tau")};
  c.W = data.W;
  s.zc_names = {spatial_error ? "lambda" : "rho"};
  s.prior = ZcPrior::iid(1, PriorTerm::uniform(-1.5, 1.0));
  s.kernel = ProposalKernel::random_walk(VectorXd::Constant(1, kernel_sd));
  s.initial = VectorXd::Zero(1);
  return s;
}

}  // namespace clgm
