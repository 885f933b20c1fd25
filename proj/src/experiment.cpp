#include "clgm/experiment.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "clgm/errors.hpp"
#include "clgm/io.hpp"

namespace clgm {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::set<std::string> kScenarios{"linear", "poisson", "missing-sim", "lasso",
                                       "nhanes", "columbus", "custom"};
const std::set<std::string> kMethods{"inla-mcmc", "mcmc", "exact"};
const std::set<std::string> kKeys{
    "scenario",  "seed",       "iters",         "burn_in",      "thin",         "methods",
    "output_dir", "kernel_sd", "lasso_sigma",   "data_file",    "data_dir",     "data_seed",
    "adapt",     "spatial_model", "mcmc_iters", "mcmc_burn_in", "mcmc_thin",    "response",
    "covariates", "conditioned", "family",      "intercept",    "prior_precision"};
constexpr std::array<double, 3> kSummaryProbs{0.025, 0.5, 0.975};

template <class T>
T get(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config key '") + key + "': " + e.what());
  }
}

ParameterSummary summarize_draws(const std::string& name, std::vector<double> draws) {
  const Moments m = sample_moments(draws);
  const auto q = sample_quantiles(std::move(draws), kSummaryProbs);
  return {name, m.mean, m.sd, q[0], q[1], q[2]};
}

ParameterSummary summarize_density(const std::string& name, const GridDensity& g) {
  const Moments m = moments(g);
  const auto q = quantiles(g, kSummaryProbs);
  return {name, m.mean, m.sd, q[0], q[1], q[2]};
}

std::vector<double> column(const MatrixXd& m, Index k) {
  return {m.col(k).data(), m.col(k).data() + m.rows()};
}

json ess_record(const ChainResult& r) {
  json out = json::object();
  for (std::size_t k = 0; k < r.names.size(); ++k) out[r.names[k]] = ess(r, static_cast<Index>(k));
  return out;
}

json chain_diagnostics(const std::string& method, const ChainResult& r, const ExperimentConfig& c,
                       std::size_t iters, std::size_t burn_in, std::size_t thin) {
  json d;
  d["method"] = method;
  d["scenario"] = c.scenario;
  d["seed"] = r.seed;
  d["iters"] = iters;
  d["burn_in"] = burn_in;
  d["thin"] = thin;
  d["kept"] = r.samples.rows();
  d["acceptance_rate"] = acceptance_rate(r);
  d["ess"] = ess_record(r);
  d["engine_failures"] = r.engine_failures;
  d["kernel_scale"] = r.kernel_scale;
  json warnings = json::array();
  if (r.engine_failures > 0)
    warnings.push_back(std::to_string(r.engine_failures) + " proposals rejected after an engine failure");
  const double acc = acceptance_rate(r);
  if (acc < 0.05) warnings.push_back("acceptance rate below 0.05");
  if (acc > 0.9) warnings.push_back("acceptance rate above 0.9");
  d["warnings"] = warnings;
  return d;
}

PriorTerm coefficient_prior(double precision) { return PriorTerm::gaussian(0.0, precision); }

double prior_centre(const PriorTerm& t) {
  return t.kind == PriorTerm::Kind::Uniform ? 0.5 * (t.a + t.b) : t.a;
}

double prior_spread(const PriorTerm& t) {
  switch (t.kind) {
    case PriorTerm::Kind::Gaussian:
      return 1.0 / std::sqrt(t.b);
    case PriorTerm::Kind::Laplace:
      return std::sqrt(2.0) * t.b;
    case PriorTerm::Kind::Uniform:
      return (t.b - t.a) / std::sqrt(12.0);
  }
  return 1.0;
}

SimulatedDataset simulated_input(const ExperimentConfig& c) {
  if (c.data_file) return read_simulation(*c.data_file, c.scenario);
  return simulate_scenario(c.scenario, c.data_seed);
}

Scenario custom_scenario(const ExperimentConfig& c) {
  if (!c.data_file) throw ConfigError("custom scenario requires data_file");
  if (c.covariates.empty()) throw ConfigError("custom scenario requires covariates");
  const CsvTable t = read_csv(*c.data_file);
  Scenario s;
  s.name = "custom";
  auto& cs = s.conditioner;
  cs.mode = ConditioningMode::OffsetBeta;
  cs.y = t.col(c.response);
  const Index n = cs.y.size();
  const Index off = c.intercept ? 1 : 0;
  cs.X.resize(n, off + static_cast<Index>(c.covariates.size()));
  if (c.intercept) {
    cs.X.col(0).setOnes();
    cs.column_names.push_back("intercept");
  }
  for (std::size_t k = 0; k < c.covariates.size(); ++k) {
    cs.X.col(off + static_cast<Index>(k)) = t.col(c.covariates[k]);
    cs.column_names.push_back(c.covariates[k]);
  }
  if (cs.X.hasNaN()) throw ConfigError("custom scenario: covariates must be complete");
  cs.fixed_effect_precision = VectorXd::Constant(cs.X.cols(), c.prior_precision);
  if (c.family == "gaussian") {
    cs.family = LikelihoodFamily::gaussian_unknown();
    cs.hyper = {precision_hyper("tau")};
  } else if (c.family == "poisson") {
    cs.family = LikelihoodFamily::poisson_log();
  } else {
    throw ConfigError("custom scenario: family must be gaussian or poisson");
  }
  const auto& cond = c.conditioned.empty() ? c.covariates : c.conditioned;
  for (const auto& name : cond) {
    const auto it = std::find(cs.column_names.begin(), cs.column_names.end(), name);
    if (it == cs.column_names.end()) throw ConfigError("custom scenario: unknown conditioned column " + name);
    cs.conditioned_columns.push_back(static_cast<Index>(it - cs.column_names.begin()));
    s.zc_names.push_back(name);
  }
  const Index m = static_cast<Index>(cs.conditioned_columns.size());
  s.prior = ZcPrior::iid(m, PriorTerm::gaussian(0.0, c.prior_precision));
  s.kernel = ProposalKernel::random_walk(VectorXd::Constant(m, kRegressionKernelSd));
  s.initial = VectorXd::Zero(m);
  return s;
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path.string());
  os << text;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (!kScenarios.count(scenario)) throw ConfigError("unknown scenario '" + scenario + "'");
  if (!(iters > burn_in)) throw ConfigError("iters must exceed burn_in");
  if (thin < 1) throw ConfigError("thin must be at least 1");
  if (methods.empty()) throw ConfigError("methods must not be empty");
  for (const auto& m : methods)
    if (!kMethods.count(m)) throw ConfigError("unknown method '" + m + "'");
  if (scenario == "lasso" && !lasso_sigma) throw ConfigError("lasso scenario requires lasso_sigma");
  if (lasso_sigma && !(*lasso_sigma > 0.0)) throw ConfigError("lasso_sigma must be positive");
  if (kernel_sd && !(*kernel_sd > 0.0)) throw ConfigError("kernel_sd must be positive");
  if (spatial_model != "lag" && spatial_model != "error")
    throw ConfigError("spatial_model must be 'lag' or 'error'");
  if (mcmc_thin < 1) throw ConfigError("mcmc_thin must be at least 1");
  if (mcmc_iters && !(*mcmc_iters > mcmc_burn_in)) throw ConfigError("mcmc_iters must exceed mcmc_burn_in");
}

ExperimentConfig parse_config(const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& [key, value] : j.items())
    if (!kKeys.count(key)) throw ConfigError("unknown config key '" + key + "'");
  if (!j.contains("scenario")) throw ConfigError("config requires 'scenario'");
  ExperimentConfig c;
  c.source = j;
  c.scenario = get<std::string>(j, "scenario", "");
  c.seed = get<std::uint64_t>(j, "seed", c.seed);
  c.iters = get<std::size_t>(j, "iters", c.iters);
  c.burn_in = get<std::size_t>(j, "burn_in", c.burn_in);
  c.thin = get<std::size_t>(j, "thin", c.thin);
  c.methods = get<std::vector<std::string>>(j, "methods", c.methods);
  c.output_dir = get<std::string>(j, "output_dir", "out/" + c.scenario);
  if (j.contains("kernel_sd")) c.kernel_sd = get<double>(j, "kernel_sd", 0.0);
  if (j.contains("lasso_sigma")) c.lasso_sigma = get<double>(j, "lasso_sigma", 0.0);
  if (j.contains("data_file")) c.data_file = get<std::string>(j, "data_file", "");
  if (j.contains("data_dir")) c.data_dir = get<std::string>(j, "data_dir", "");
  c.data_seed = get<std::uint64_t>(j, "data_seed", c.data_seed);
  c.adapt = get<bool>(j, "adapt", c.adapt);
  c.spatial_model = get<std::string>(j, "spatial_model", c.spatial_model);
  if (j.contains("mcmc_iters")) c.mcmc_iters = get<std::size_t>(j, "mcmc_iters", 0);
  c.mcmc_burn_in = get<std::size_t>(j, "mcmc_burn_in", c.mcmc_burn_in);
  c.mcmc_thin = get<std::size_t>(j, "mcmc_thin", c.mcmc_thin);
  c.response = get<std::string>(j, "response", c.response);
  c.covariates = get<std::vector<std::string>>(j, "covariates", c.covariates);
  c.conditioned = get<std::vector<std::string>>(j, "conditioned", c.conditioned);
  c.family = get<std::string>(j, "family", c.family);
  c.intercept = get<bool>(j, "intercept", c.intercept);
  c.prior_precision = get<double>(j, "prior_precision", c.prior_precision);
  c.validate();
  return c;
}

ExperimentConfig load_config(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open config " + path.string());
  json j;
  try {
    is >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  ExperimentConfig c = parse_config(j);
  // Relative data paths are taken relative to the config file.
  const fs::path base = path.parent_path();
  if (c.data_file && c.data_file->is_relative()) c.data_file = base / *c.data_file;
  if (c.data_dir && c.data_dir->is_relative()) c.data_dir = base / *c.data_dir;
  return c;
}

void use_paper_scale(ExperimentConfig& c) {
  c.iters = kPaperScaleIters;
  c.burn_in = 500;
  c.thin = 10;
}

Scenario build_scenario(const ExperimentConfig& c) {
  c.validate();
  const fs::path dir = c.data_dir.value_or(data_dir());
  Scenario s;
  if (c.scenario == "linear") {
    s = linear_scenario(simulated_input(c));
  } else if (c.scenario == "poisson") {
    s = poisson_scenario(simulated_input(c));
  } else if (c.scenario == "missing-sim") {
    s = missing_covariate_scenario(simulated_input(c));
  } else if (c.scenario == "lasso") {
    s = lasso_scenario(standardize(load_hitters(dir)), *c.lasso_sigma);
  } else if (c.scenario == "nhanes") {
    s = nhanes_scenario(load_nhanes(dir));
  } else if (c.scenario == "columbus") {
    s = columbus_scenario(load_columbus(dir), 0.3, c.spatial_model == "error");
  } else {
    s = custom_scenario(c);
  }
  if (c.kernel_sd) s.kernel.sds.setConstant(*c.kernel_sd);
  return s;
}

FullRegressionModel full_model(const Scenario& scenario) {
  const ConditionerSpec& cs = scenario.conditioner;
  FullRegressionModel m;
  m.family = cs.family.kind == FamilyKind::PoissonLog ? FullRegressionModel::Family::Poisson
                                                      : FullRegressionModel::Family::Gaussian;
  if (cs.family.kind == FamilyKind::GaussianKnownPrecision)
    throw ConfigError("full model: known-precision likelihoods are not supported");
  m.y = cs.y;
  m.X = cs.X;
  m.column_names = cs.column_names;
  for (Index c = 0; c < cs.X.cols(); ++c) m.coefficient_priors.push_back(coefficient_prior(cs.fixed_effect_precision(c)));
  switch (cs.mode) {
    case ConditioningMode::OffsetBeta:
      for (std::size_t k = 0; k < cs.conditioned_columns.size(); ++k)
        m.coefficient_priors[static_cast<std::size_t>(cs.conditioned_columns[k])] = scenario.prior.terms[k];
      break;
    case ConditioningMode::MissingCovariate:
      for (Index r : cs.missing_rows) m.X(r, cs.missing_column) = std::nan("");
      m.imputation_priors = scenario.prior.terms;
      m.imputed_names = scenario.zc_names;
      break;
    case ConditioningMode::SpatialLagRho:
    case ConditioningMode::SpatialErrorLambda:
      m.W = cs.W;
      m.spatial_error = cs.mode == ConditioningMode::SpatialErrorLambda;
      m.rho_lower = scenario.prior.terms.at(0).a;
      m.rho_upper = scenario.prior.terms.at(0).b;
      break;
  }
  m.prepare();
  return m;
}

Index MethodOutput::index(const std::string& name) const {
  const auto it = std::find(names.begin(), names.end(), name);
  return it == names.end() ? -1 : static_cast<Index>(it - names.begin());
}

std::optional<std::vector<double>> MethodOutput::draws(const std::string& name) const {
  const auto it = std::find(sample_names.begin(), sample_names.end(), name);
  if (it == sample_names.end()) return std::nullopt;
  return column(samples, static_cast<Index>(it - sample_names.begin()));
}

const ParameterSummary& MethodOutput::summary_of(const std::string& name) const {
  for (const auto& s : summary)
    if (s.name == name) return s;
  throw MissingParameter("no summary for parameter " + name);
}

MethodOutput run_inla_mcmc(const Scenario& scenario, const ExperimentConfig& config) {
  ChainConfig cc;
  cc.iters = config.iters;
  cc.burn_in = config.burn_in;
  cc.thin = config.thin;
  cc.seed = config.seed;
  cc.initial = scenario.initial;
  cc.prior = scenario.prior;
  cc.kernel = scenario.kernel;
  cc.names = scenario.zc_names;
  if (config.adapt) cc.adapt_target = 0.30;
  const ChainResult r = run_chain(inla_model(scenario.conditioner), cc);

  MethodOutput out;
  out.method = "inla-mcmc";
  out.sample_names = r.names;
  out.samples = r.samples;
  out.steps = r.steps;
  for (std::size_t k = 0; k < r.names.size(); ++k) {
    auto d = column(r.samples, static_cast<Index>(k));
    out.names.push_back(r.names[k]);
    out.marginals.push_back(histogram_density(d));
    out.summary.push_back(summarize_draws(r.names[k], std::move(d)));
  }
  const auto cond = conditional_marginal_names(scenario.conditioner);
  for (std::size_t k = 0; k < cond.size(); ++k) {
    GridDensity g = bma_marginal(r, k);
    out.names.push_back(cond[k]);
    out.summary.push_back(summarize_density(cond[k], g));
    out.marginals.push_back(std::move(g));
  }
  out.diagnostics = chain_diagnostics(out.method, r, config, cc.iters, cc.burn_in, cc.thin);
  return out;
}

MethodOutput run_full_mcmc(const Scenario& scenario, const ExperimentConfig& config) {
  const FullRegressionModel model = full_model(scenario);
  const Index d = model.dim();
  const Index p = model.X.cols();

  // Start from least squares with imputed cells at their prior centres.
  VectorXd start = VectorXd::Zero(d);
  VectorXd steps = VectorXd::Constant(d, 0.1);
  MatrixXd design = model.X;
  std::size_t m = 0;
  for (Index c = 0; c < design.cols(); ++c)
    for (Index r = 0; r < design.rows(); ++r)
      if (std::isnan(design(r, c))) {
        const PriorTerm& t = model.imputation_priors[m];
        design(r, c) = prior_centre(t);
        start(model.imputed_offset() + static_cast<Index>(m)) = prior_centre(t);
        steps(model.imputed_offset() + static_cast<Index>(m)) = prior_spread(t);
        ++m;
      }
  std::vector<Index> rows;
  for (Index i = 0; i < model.y.size(); ++i)
    if (!std::isnan(model.y(i))) rows.push_back(i);
  MatrixXd xo(static_cast<Index>(rows.size()), p);
  VectorXd yo(xo.rows());
  for (Index k = 0; k < xo.rows(); ++k) {
    xo.row(k) = design.row(rows[static_cast<std::size_t>(k)]);
    yo(k) = model.y(rows[static_cast<std::size_t>(k)]);
  }
  VectorXd wts = VectorXd::Ones(yo.size());
  if (model.family == FullRegressionModel::Family::Poisson) {
    wts = yo.array() + 0.5;
    yo = wts.array().log();
  }
  MatrixXd xtwx = xo.transpose() * wts.asDiagonal() * xo;
  xtwx.diagonal().array() += 1e-8;
  const Eigen::LDLT<MatrixXd> ldlt(xtwx);
  const VectorXd beta = ldlt.solve(xo.transpose() * wts.asDiagonal() * yo);
  start.head(p) = beta;
  const VectorXd diag_inv = ldlt.solve(MatrixXd::Identity(p, p)).diagonal();
  if (model.family == FullRegressionModel::Family::Gaussian) {
    const double dof = std::max<double>(1.0, static_cast<double>(yo.size() - p));
    const double s2 = std::max((yo - xo * beta).squaredNorm() / dof, 1e-12);
    steps.head(p) = (s2 * diag_inv).cwiseSqrt();
    start(model.tau_index()) = -std::log(s2);
    steps(model.tau_index()) = std::sqrt(2.0 / static_cast<double>(yo.size()));
  } else {
    steps.head(p) = diag_inv.cwiseSqrt();
  }
  if (model.W) {
    start(model.rho_index()) = 0.0;
    steps(model.rho_index()) = 0.1;
  }

  FullMcmcConfig fc;
  fc.burn_in = config.mcmc_burn_in;
  fc.thin = config.mcmc_thin;
  fc.iters = config.mcmc_iters.value_or(config.mcmc_burn_in + config.mcmc_thin * config.kept());
  fc.seed = config.seed;
  fc.initial = start;
  fc.step_sds = steps;
  fc.names = model.names();
  ChainResult r = full_mcmc([&model](const VectorXd& x) { return model.log_density(x); }, fc);
  for (Index k = 0; k < r.samples.rows(); ++k) r.samples.row(k) = model.reported(r.samples.row(k).transpose()).transpose();

  MethodOutput out;
  out.method = "mcmc";
  out.sample_names = r.names;
  out.samples = r.samples;
  out.steps = r.steps;
  for (std::size_t k = 0; k < r.names.size(); ++k) {
    auto draws = column(r.samples, static_cast<Index>(k));
    out.names.push_back(r.names[k]);
    out.marginals.push_back(histogram_density(draws));
    out.summary.push_back(summarize_draws(r.names[k], std::move(draws)));
  }
  out.diagnostics = chain_diagnostics(out.method, r, config, fc.iters, fc.burn_in, fc.thin);
  return out;
}

MethodOutput run_exact(const Scenario& scenario) {
  const ConditionerSpec& cs = scenario.conditioner;
  if (cs.family.kind != FamilyKind::GaussianUnknownPrecision || cs.mode != ConditioningMode::OffsetBeta)
    throw ConfigError("exact method is only available for Gaussian regressions");
  for (std::size_t k = 0; k < cs.conditioned_columns.size(); ++k) {
    const PriorTerm& t = scenario.prior.terms[k];
    if (t.kind != PriorTerm::Kind::Gaussian || t.a != 0.0)
      throw ConfigError("exact method requires zero-mean Gaussian coefficient priors");
  }
  VectorXd precision = cs.fixed_effect_precision;
  for (std::size_t k = 0; k < cs.conditioned_columns.size(); ++k)
    precision(cs.conditioned_columns[k]) = scenario.prior.terms[k].b;
  const SemiConjugatePosterior post = semi_conjugate_regression(cs.y, cs.X, precision, kDefaultPrecisionShape, kDefaultPrecisionRate);
  MethodOutput out;
  out.method = "exact";
  for (Index c = 0; c < cs.X.cols(); ++c) {
    const std::string& name = cs.column_names[static_cast<std::size_t>(c)];
    GridDensity g = post.coefficient_marginal(c);
    out.names.push_back(name);
    out.summary.push_back(summarize_density(name, g));
    out.marginals.push_back(std::move(g));
  }
  GridDensity g = post.precision_marginal();
  out.names.push_back("tau");
  out.summary.push_back(summarize_density("tau", g));
  out.marginals.push_back(std::move(g));
  out.diagnostics = {{"method", "exact"}, {"log_evidence", post.log_evidence}};
  return out;
}

std::vector<MethodOutput> run_experiment(const ExperimentConfig& config) {
  const Scenario scenario = build_scenario(config);
  fs::create_directories(config.output_dir);
  write_text(config.output_dir / "config_echo.json", config.source.dump(2) + "\n");
  std::vector<MethodOutput> outs;
  for (const auto& method : config.methods) {
    MethodOutput o;
    if (method == "inla-mcmc") o = run_inla_mcmc(scenario, config);
    else if (method == "mcmc") o = run_full_mcmc(scenario, config);
    else o = run_exact(scenario);
    write_method_output(config.output_dir / method, o);
    outs.push_back(std::move(o));
  }
  return outs;
}

void write_method_output(const fs::path& dir, const MethodOutput& out) {
  fs::create_directories(dir / "marginals");
  if (out.samples.rows() > 0) {
    std::string text = "step";
    for (const auto& n : out.sample_names) text += "," + n;
    text += "\n";
    for (Index k = 0; k < out.samples.rows(); ++k) {
      text += std::to_string(out.steps[static_cast<std::size_t>(k)]);
      for (Index c = 0; c < out.samples.cols(); ++c) text += "," + format_double(out.samples(k, c));
      text += "\n";
    }
    write_text(dir / "samples.csv", text);
  }
  std::string summary = "param,mean,sd,q2.5,q50,q97.5\n";
  for (const auto& s : out.summary)
    summary += s.name + "," + format_double(s.mean) + "," + format_double(s.sd) + "," + format_double(s.q025) +
               "," + format_double(s.q50) + "," + format_double(s.q975) + "\n";
  write_text(dir / "summary.csv", summary);
  write_text(dir / "diagnostics.json", out.diagnostics.dump(2) + "\n");
  for (std::size_t k = 0; k < out.names.size(); ++k) {
    std::ofstream os(dir / "marginals" / (out.names[k] + ".csv"), std::ios::binary);
    if (!os) throw IoError("cannot write marginal for " + out.names[k]);
    write_grid_csv(os, out.marginals[k]);
  }
}

MethodOutput read_method_output(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir.string());
  MethodOutput out;
  out.method = dir.filename().string();
  std::ifstream is(dir / "summary.csv");
  if (!is) throw IoError("missing summary.csv in " + dir.string());
  std::string line;
  std::getline(is, line);
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto cells = split_line(line);
    if (cells.size() != 6) throw IoError("malformed summary.csv row: " + line);
    ParameterSummary s{cells[0], std::stod(cells[1]), std::stod(cells[2]), std::stod(cells[3]),
                       std::stod(cells[4]), std::stod(cells[5])};
    out.summary.push_back(s);
    std::ifstream ms(dir / "marginals" / (s.name + ".csv"));
    if (!ms) throw MissingParameter("no marginal file for " + s.name + " in " + dir.string());
    out.names.push_back(s.name);
    out.marginals.push_back(read_grid_csv(ms));
  }
  if (fs::exists(dir / "samples.csv")) {
    const CsvTable t = read_csv(dir / "samples.csv");
    out.sample_names.assign(t.header.begin() + 1, t.header.end());
    out.samples = t.values.rightCols(t.values.cols() - 1);
    for (Index k = 0; k < t.values.rows(); ++k) out.steps.push_back(static_cast<std::size_t>(t.values(k, 0)));
  }
  if (std::ifstream ds(dir / "diagnostics.json"); ds) out.diagnostics = json::parse(ds, nullptr, false);
  return out;
}

std::vector<CompareRow> compare_outputs(const MethodOutput& a, const MethodOutput& b) {
  const std::set<std::string> na(a.names.begin(), a.names.end());
  const std::set<std::string> nb(b.names.begin(), b.names.end());
  if (na != nb) {
    std::string diff;
    for (const auto& n : na)
      if (!nb.count(n)) diff += " " + n;
    for (const auto& n : nb)
      if (!na.count(n)) diff += " " + n;
    throw MissingParameter("parameter sets differ:" + diff);
  }
  std::vector<CompareRow> rows;
  for (const auto& name : a.names) {
    CompareRow row;
    row.name = name;
    const auto da = a.draws(name);
    const auto db = b.draws(name);
    const GridDensity& ga = a.marginals[static_cast<std::size_t>(a.index(name))];
    const GridDensity& gb = b.marginals[static_cast<std::size_t>(b.index(name))];
    if (da && db) row.ks = ks_two_sample(*da, *db);
    else if (da) row.ks = ks_distance(*da, gb);
    else if (db) row.ks = ks_distance(*db, ga);
    else row.ks = ks_distance(MarginalDensity(ga), MarginalDensity(gb));
    row.mean_diff = a.summary_of(name).mean - b.summary_of(name).mean;
    row.sd_diff = a.summary_of(name).sd - b.summary_of(name).sd;
    rows.push_back(row);
  }
  return rows;
}

void write_compare_csv(const fs::path& path, const std::vector<CompareRow>& rows) {
  std::string text = "param,ks,mean_diff,sd_diff\n";
  for (const auto& r : rows)
    text += r.name + "," + format_double(r.ks) + "," + format_double(r.mean_diff) + "," + format_double(r.sd_diff) + "\n";
  write_text(path, text);
}

SimulatedDataset simulate_scenario(const std::string& scenario, std::uint64_t seed) {
  if (scenario == "linear") return simulate_linear(seed);
  if (scenario == "poisson") return simulate_poisson(seed);
  if (scenario == "missing-sim") return simulate_missing(seed);
  throw ConfigError("no simulator for scenario '" + scenario + "'");
}

void write_simulation(const fs::path& dir, const SimulatedDataset& data) {
  fs::create_directories(dir);
  CsvTable t;
  t.header = {"y"};
  t.header.insert(t.header.end(), data.covariate_names.begin(), data.covariate_names.end());
  t.values.resize(data.y.size(), 1 + data.covariates.cols());
  t.values.col(0) = data.y;
  t.values.rightCols(data.covariates.cols()) = data.covariates;
  write_csv(dir / "data.csv", t);
  json truth;
  truth["scenario"] = data.scenario;
  truth["seed"] = data.seed;
  truth["parameters"] = data.truth;
  if (!data.missing_rows.empty()) {
    json held = json::object();
    for (std::size_t k = 0; k < data.missing_rows.size(); ++k)
      held[data.covariate_names[0] + "_row" + std::to_string(data.missing_rows[k] + 1)] =
          data.held_out(static_cast<Index>(k));
    truth["held_out"] = held;
  }
  write_text(dir / "truth.json", truth.dump(2) + "\n");
}

SimulatedDataset read_simulation(const fs::path& data_csv, const std::string& scenario) {
  const CsvTable t = read_csv(data_csv);
  SimulatedDataset d;
  d.scenario = scenario;
  d.y = t.col("y");
  for (const auto& h : t.header)
    if (h != "y") d.covariate_names.push_back(h);
  d.covariates.resize(d.y.size(), static_cast<Index>(d.covariate_names.size()));
  for (std::size_t k = 0; k < d.covariate_names.size(); ++k)
    d.covariates.col(static_cast<Index>(k)) = t.col(d.covariate_names[k]);
  if (d.covariates.cols() > 0)
    for (Index i = 0; i < d.y.size(); ++i)
      if (std::isnan(d.covariates(i, 0))) d.missing_rows.push_back(i);
  if (scenario != "missing-sim" && !d.missing_rows.empty())
    throw ConfigError("data file has missing covariates but scenario is " + scenario);
  return d;
}

}  // namespace clgm
