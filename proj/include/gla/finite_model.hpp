#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

namespace gla {

// Which parts of the Bayesian update the temperature exponent touches:
// likelihood_only:       weights ∝ prior · likelihood^T
// likelihood_and_prior:  weights ∝ (prior · likelihood)^T
enum class TemperingForm { likelihood_only, likelihood_and_prior };

std::string to_string(TemperingForm f);
TemperingForm tempering_form_from_string(const std::string& s);

// Finite hypothesis grid over a finite outcome space, for exact (summation,
// no sampling) checks of tempered-posterior theory.
struct FiniteModel {
    std::vector<std::string> labels;          // hypothesis names; empty or size M
    Eigen::VectorXd prior;                    // M weights, sum to 1
    Eigen::MatrixXd truth;                    // X x Y joint h*(x, y), sums to 1
    std::vector<Eigen::MatrixXd> likelihood;  // M tables; each X x Y with rows
                                              // h(y | x, theta_m) summing to 1

    int num_hypotheses() const { return static_cast<int>(prior.size()); }
    int num_x() const { return static_cast<int>(truth.rows()); }
    int num_y() const { return static_cast<int>(truth.cols()); }
    std::string label(int m) const;
    void validate() const; // sums within 1e-12, shapes consistent
};

struct Observation {
    int x = 0;
    int y = 0;
};

struct TemperedGridPosterior {
    Eigen::VectorXd weights; // nonnegative, sum to 1
    double temperature = 1.0;
    TemperingForm form = TemperingForm::likelihood_only;
};

// Log-space tempered weights over an arbitrary grid: softmax of
// T * log_likelihood + a * log_prior with a = 1 (likelihood_only) or a = T.
// Throws if every hypothesis has zero joint mass.
Eigen::VectorXd tempered_weights(const Eigen::VectorXd& log_likelihood,
                                 const Eigen::VectorXd& log_prior, double temperature,
                                 TemperingForm form);

// Exact tempered posterior over the model's hypotheses after the observations.
TemperedGridPosterior tempered_grid_posterior(const FiniteModel& model,
                                              const std::vector<Observation>& data,
                                              double temperature, TemperingForm form);

// Largest deviation of (1/T) log N(theta; 0, b^2 I) - log N(theta; 0, T b^2 I)
// from its theta-independent closed-form constant, over the given points.
// The difference is constant in theta, so this measures only rounding error.
double prior_rescale_identity(double prior_std, double temperature,
                              const std::vector<Eigen::VectorXd>& thetas);

// Isotropic Gaussian log density log N(theta; 0, variance * I).
double log_normal_density(const Eigen::VectorXd& theta, double variance);

struct CentralConditionResult {
    int risk_minimizer = 0; // argmin risk, first-index tie-break
    Eigen::VectorXd risks;  // expected negative log likelihood under the truth
    Eigen::VectorXd mass;   // sum_{x,y} h*(x,y) * (h(y|x,m) / h(y|x,minimizer))^T
};

// Per-hypothesis tempered-likelihood-ratio mass. The minimizer's own mass is
// 1 by construction; a hypothesis with mass > 1 witnesses failure of the
// moment condition at that temperature.
CentralConditionResult central_condition_mass(const FiniteModel& model, double temperature);

// Probability that a label other than y is produced at input x under the
// tempered posterior implied by observing (x, y), with per-hypothesis class
// tables (X x K rows of class probabilities). Exact summation.
double aleatoric_probability(const FiniteModel& model,
                             const std::vector<Eigen::MatrixXd>& class_table, int x, int y,
                             double temperature, TemperingForm form);

// --- Misspecification demo -------------------------------------------------
// Heteroskedastic generator x ~ U(-1, 1), y = slope * x + eps with
// std(eps) = noise_base + noise_slope * |x|, fit by a two-tier grid of
// fixed-noise linear models: a simple tier (slope only, intercept 0) and a
// complex tier (slope x intercept product grid).

struct MisspecModel {
    double slope = 0.0;
    double intercept = 0.0;
    double noise_std = 1.0;
    bool complex_tier = false;
};

struct MisspecConfig {
    double gen_slope = 1.0;
    double gen_noise_base = 0.1;
    double gen_noise_slope = 0.9;
    std::vector<double> simple_slopes = {-1.0, -0.5, 0.0, 0.5, 1.0};
    std::vector<double> complex_slopes = {-1.0, -0.5, 0.0, 0.5, 1.0};
    std::vector<double> complex_intercepts = {-0.3, -0.1, 0.1, 0.3};
    double model_noise_std = 0.5;
    std::vector<int> sample_sizes = {10, 100, 1000};
    std::vector<double> temperatures = {0.25, 1.0};
    TemperingForm form = TemperingForm::likelihood_only;
    std::uint64_t seed = 0;
};

struct MisspecRow {
    int n = 0;
    double temperature = 1.0;
    Eigen::VectorXd weights; // posterior over the grid models
    double simple_mass = 0.0;
    double complex_mass = 0.0;
};

struct MisspecReport {
    std::vector<MisspecModel> models;
    Eigen::VectorXd risks; // closed-form expected NLL per model under the generator
    std::vector<MisspecRow> rows;
};

// Closed-form expected NLL of a fixed-noise linear model under the generator.
double misspec_model_risk(const MisspecConfig& config, const MisspecModel& model);

// Deterministic demo: grid posteriors at every (sample size, temperature)
// pair, with per-tier posterior mass. Descriptive output, no assertions.
MisspecReport misspecification_demo(const MisspecConfig& config);

} // namespace gla
