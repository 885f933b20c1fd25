#pragma once

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "clgm/marginal.hpp"
#include "clgm/mh.hpp"
#include "clgm/oracle.hpp"
#include "clgm/zoo.hpp"

namespace clgm {

inline constexpr std::size_t kPaperScaleIters = 100500;

/// Parsed run configuration. Keys are flat; see README for the schema.
struct ExperimentConfig {
  std::string scenario;
  std::uint64_t seed = 1;
  std::size_t iters = 10500;
  std::size_t burn_in = 500;
  std::size_t thin = 10;
  std::vector<std::string> methods{"inla-mcmc"};
  std::filesystem::path output_dir;

  std::optional<double> kernel_sd;
  std::optional<double> lasso_sigma;
  std::optional<std::filesystem::path> data_file;
  std::optional<std::filesystem::path> data_dir;
  std::uint64_t data_seed = 1;
  bool adapt = false;
  std::string spatial_model = "lag";

  // Reference sampler (method "mcmc"); iters defaults to burn-in + thin * kept.
  std::optional<std::size_t> mcmc_iters;
  std::size_t mcmc_burn_in = 20000;
  std::size_t mcmc_thin = 50;

  // scenario "custom"
  std::string response = "y";
  std::vector<std::string> covariates;
  std::vector<std::string> conditioned;
  std::string family = "gaussian";
  bool intercept = true;
  double prior_precision = kFixedEffectPrecision;

  nlohmann::json source;  // parsed input, echoed verbatim

  std::size_t kept() const { return (iters - burn_in) / thin; }
  void validate() const;
};

ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::filesystem::path& path);
void use_paper_scale(ExperimentConfig& config);

Scenario build_scenario(const ExperimentConfig& config);

/// The same model written out over every parameter, for the reference sampler.
FullRegressionModel full_model(const Scenario& scenario);

struct ParameterSummary {
  std::string name;
  double mean = 0.0;
  double sd = 0.0;
  double q025 = 0.0;
  double q50 = 0.0;
  double q975 = 0.0;
};

struct MethodOutput {
  std::string method;
  std::vector<std::string> names;  // every reported parameter
  std::vector<GridDensity> marginals;
  std::vector<ParameterSummary> summary;
  std::vector<std::string> sample_names;  // parameters with draws, in column order
  MatrixXd samples;
  std::vector<std::size_t> steps;
  nlohmann::json diagnostics;

  Index index(const std::string& name) const;  // -1 when absent
  std::optional<std::vector<double>> draws(const std::string& name) const;
  const ParameterSummary& summary_of(const std::string& name) const;
};

MethodOutput run_inla_mcmc(const Scenario& scenario, const ExperimentConfig& config);
MethodOutput run_full_mcmc(const Scenario& scenario, const ExperimentConfig& config);
/// Gaussian regressions without conditioning on covariates only.
MethodOutput run_exact(const Scenario& scenario);

std::vector<MethodOutput> run_experiment(const ExperimentConfig& config);

void write_method_output(const std::filesystem::path& dir, const MethodOutput& out);
MethodOutput read_method_output(const std::filesystem::path& dir);

struct CompareRow {
  std::string name;
  double ks = 0.0;
  double mean_diff = 0.0;
  double sd_diff = 0.0;
};

/// KS uses draws where both sides have them, else draws vs density, else densities.
std::vector<CompareRow> compare_outputs(const MethodOutput& a, const MethodOutput& b);
void write_compare_csv(const std::filesystem::path& path, const std::vector<CompareRow>& rows);

SimulatedDataset simulate_scenario(const std::string& scenario, std::uint64_t seed);
/// data.csv (y then covariates, empty cell = missing) and truth.json.
void write_simulation(const std::filesystem::path& dir, const SimulatedDataset& data);
SimulatedDataset read_simulation(const std::filesystem::path& data_csv, const std::string& scenario);

}  // namespace clgm
