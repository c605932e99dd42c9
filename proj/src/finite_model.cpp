#include "gla/finite_model.hpp"

#include "gla/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace gla {

namespace {

constexpr double kSumTol = 1e-12;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double safe_log(double p) { return p > 0 ? std::log(p) : kNegInf; }

} // namespace

std::string to_string(TemperingForm f) {
    return f == TemperingForm::likelihood_only ? "likelihood_only" : "likelihood_and_prior";
}

TemperingForm tempering_form_from_string(const std::string& s) {
    if (s == "likelihood_only") return TemperingForm::likelihood_only;
    if (s == "likelihood_and_prior") return TemperingForm::likelihood_and_prior;
    throw std::invalid_argument("unknown tempering form: " + s);
}

std::string FiniteModel::label(int m) const {
    if (m < 0 || m >= num_hypotheses())
        throw std::invalid_argument("hypothesis index out of range");
    if (!labels.empty()) return labels[m];
    return "theta_" + std::to_string(m);
}

void FiniteModel::validate() const {
    const int m = num_hypotheses();
    if (m < 1) throw std::invalid_argument("finite model needs at least one hypothesis");
    if (!labels.empty() && static_cast<int>(labels.size()) != m)
        throw std::invalid_argument("hypothesis label count does not match prior length");
    if ((prior.array() < 0).any())
        throw std::invalid_argument("prior has negative weights");
    if (std::abs(prior.sum() - 1.0) > kSumTol)
        throw std::invalid_argument("prior does not sum to 1");
    if (num_x() < 1 || num_y() < 1)
        throw std::invalid_argument("outcome space is empty");
    if ((truth.array() < 0).any())
        throw std::invalid_argument("truth table has negative entries");
    if (std::abs(truth.sum() - 1.0) > kSumTol)
        throw std::invalid_argument("truth table does not sum to 1");
    if (static_cast<int>(likelihood.size()) != m)
        throw std::invalid_argument("likelihood table count does not match hypothesis count");
    for (int i = 0; i < m; ++i) {
        if (likelihood[i].rows() != num_x() || likelihood[i].cols() != num_y())
            throw std::invalid_argument("likelihood table " + std::to_string(i) +
                                        " has wrong shape");
        if ((likelihood[i].array() < 0).any())
            throw std::invalid_argument("likelihood table " + std::to_string(i) +
                                        " has negative entries");
        for (int x = 0; x < num_x(); ++x)
            if (std::abs(likelihood[i].row(x).sum() - 1.0) > kSumTol)
                throw std::invalid_argument("likelihood table " + std::to_string(i) + " row " +
                                            std::to_string(x) + " does not sum to 1");
    }
}

Eigen::VectorXd tempered_weights(const Eigen::VectorXd& log_likelihood,
                                 const Eigen::VectorXd& log_prior, double temperature,
                                 TemperingForm form) {
    if (log_likelihood.size() != log_prior.size())
        throw std::invalid_argument("tempered_weights: length mismatch");
    if (!(temperature >= 0)) throw std::invalid_argument("temperature must be nonnegative");
    const int m = static_cast<int>(log_likelihood.size());
    const double prior_power = form == TemperingForm::likelihood_only ? 1.0 : temperature;

    Eigen::VectorXd score(m);
    double best = kNegInf;
    for (int i = 0; i < m; ++i) {
        // 0 * (-inf) would poison the score; an exact-zero exponent leaves
        // that factor out entirely.
        double s = 0.0;
        if (temperature > 0) s += temperature * log_likelihood[i];
        if (prior_power > 0) s += prior_power * log_prior[i];
        score[i] = s;
        best = std::max(best, s);
    }
    if (!(best > kNegInf))
        throw std::runtime_error("tempered_weights: every hypothesis has zero joint mass");

    Eigen::VectorXd w(m);
    for (int i = 0; i < m; ++i) w[i] = std::exp(score[i] - best);
    return w / w.sum();
}

TemperedGridPosterior tempered_grid_posterior(const FiniteModel& model,
                                              const std::vector<Observation>& data,
                                              double temperature, TemperingForm form) {
    model.validate();
    const int m = model.num_hypotheses();
    Eigen::VectorXd log_like = Eigen::VectorXd::Zero(m);
    for (const Observation& obs : data) {
        if (obs.x < 0 || obs.x >= model.num_x() || obs.y < 0 || obs.y >= model.num_y())
            throw std::invalid_argument("observation outside the outcome space");
        for (int i = 0; i < m; ++i) log_like[i] += safe_log(model.likelihood[i](obs.x, obs.y));
    }
    Eigen::VectorXd log_prior(m);
    for (int i = 0; i < m; ++i) log_prior[i] = safe_log(model.prior[i]);

    TemperedGridPosterior post;
    post.temperature = temperature;
    post.form = form;
    post.weights = tempered_weights(log_like, log_prior, temperature, form);
    return post;
}

double log_normal_density(const Eigen::VectorXd& theta, double variance) {
    if (!(variance > 0)) throw std::invalid_argument("variance must be positive");
    const double d = static_cast<double>(theta.size());
    return -0.5 * d * std::log(2.0 * std::numbers::pi * variance) -
           theta.squaredNorm() / (2.0 * variance);
}

double prior_rescale_identity(double prior_std, double temperature,
                              const std::vector<Eigen::VectorXd>& thetas) {
    if (!(prior_std > 0) || !(temperature > 0))
        throw std::invalid_argument("prior std and temperature must be positive");
    const double b2 = prior_std * prior_std;
    double worst = 0.0;
    for (const Eigen::VectorXd& theta : thetas) {
        const double d = static_cast<double>(theta.size());
        const double diff = log_normal_density(theta, b2) / temperature -
                            log_normal_density(theta, temperature * b2);
        const double constant =
            -0.5 * d * std::log(2.0 * std::numbers::pi * b2) / temperature +
            0.5 * d * std::log(2.0 * std::numbers::pi * temperature * b2);
        worst = std::max(worst, std::abs(diff - constant));
    }
    return worst;
}

CentralConditionResult central_condition_mass(const FiniteModel& model, double temperature) {
    model.validate();
    if (!(temperature > 0)) throw std::invalid_argument("temperature must be positive");
    const int m = model.num_hypotheses();
    const int X = model.num_x();
    const int Y = model.num_y();

    CentralConditionResult result;
    result.risks = Eigen::VectorXd::Zero(m);
    for (int i = 0; i < m; ++i) {
        double risk = 0.0;
        for (int x = 0; x < X; ++x)
            for (int y = 0; y < Y; ++y) {
                const double hstar = model.truth(x, y);
                if (hstar == 0) continue;
                const double h = model.likelihood[i](x, y);
                if (h == 0) {
                    risk = std::numeric_limits<double>::infinity();
                } else if (std::isfinite(risk)) {
                    risk -= hstar * std::log(h);
                }
            }
        result.risks[i] = risk;
    }

    result.risk_minimizer = 0;
    for (int i = 1; i < m; ++i)
        if (result.risks[i] < result.risks[result.risk_minimizer]) result.risk_minimizer = i;

    const Eigen::MatrixXd& ref = model.likelihood[result.risk_minimizer];
    result.mass = Eigen::VectorXd::Zero(m);
    for (int i = 0; i < m; ++i) {
        double mass = 0.0;
        for (int x = 0; x < X; ++x)
            for (int y = 0; y < Y; ++y) {
                const double hstar = model.truth(x, y);
                if (hstar == 0) continue;
                if (ref(x, y) == 0)
                    throw std::runtime_error(
                        "risk minimizer has zero likelihood on a supported outcome");
                mass += hstar * std::pow(model.likelihood[i](x, y) / ref(x, y), temperature);
            }
        result.mass[i] = mass;
    }
    return result;
}

double aleatoric_probability(const FiniteModel& model,
                             const std::vector<Eigen::MatrixXd>& class_table, int x, int y,
                             double temperature, TemperingForm form) {
    model.validate();
    const int m = model.num_hypotheses();
    if (static_cast<int>(class_table.size()) != m)
        throw std::invalid_argument("class table count does not match hypothesis count");
    const int X = static_cast<int>(class_table[0].rows());
    const int K = static_cast<int>(class_table[0].cols());
    for (int i = 0; i < m; ++i) {
        if (class_table[i].rows() != X || class_table[i].cols() != K)
            throw std::invalid_argument("class tables have inconsistent shapes");
        if ((class_table[i].array() < 0).any())
            throw std::invalid_argument("class table " + std::to_string(i) +
                                        " has negative entries");
        for (int r = 0; r < X; ++r)
            if (std::abs(class_table[i].row(r).sum() - 1.0) > 1e-9)
                throw std::invalid_argument("class table " + std::to_string(i) + " row " +
                                            std::to_string(r) + " does not sum to 1");
    }
    if (x < 0 || x >= X) throw std::invalid_argument("input index out of range");
    if (y < 0 || y >= K) throw std::invalid_argument("label index out of range");

    Eigen::VectorXd log_like(m), log_prior(m);
    for (int i = 0; i < m; ++i) {
        log_like[i] = safe_log(class_table[i](x, y));
        log_prior[i] = safe_log(model.prior[i]);
    }
    const Eigen::VectorXd w = tempered_weights(log_like, log_prior, temperature, form);

    double p_other = 0.0;
    for (int i = 0; i < m; ++i) p_other += w[i] * (1.0 - class_table[i](x, y));
    return p_other;
}

double misspec_model_risk(const MisspecConfig& config, const MisspecModel& model) {
    const double s0 = config.gen_noise_base;
    const double s1 = config.gen_noise_slope;
    const double da = config.gen_slope - model.slope;
    const double sigma2 = model.noise_std * model.noise_std;
    // E over x ~ U(-1,1): E[x^2] = 1/3, E[|x|] = 1/2, generator intercept 0.
    const double mean_sq_err = da * da / 3.0 + model.intercept * model.intercept;
    const double noise_sq = s0 * s0 + s0 * s1 + s1 * s1 / 3.0;
    return 0.5 * std::log(2.0 * std::numbers::pi * sigma2) +
           (mean_sq_err + noise_sq) / (2.0 * sigma2);
}

MisspecReport misspecification_demo(const MisspecConfig& config) {
    if (!(config.model_noise_std > 0))
        throw std::invalid_argument("model noise std must be positive");
    if (config.simple_slopes.empty() && config.complex_slopes.empty())
        throw std::invalid_argument("model grid is empty");
    for (int n : config.sample_sizes)
        if (n < 0) throw std::invalid_argument("sample sizes must be nonnegative");
    for (double t : config.temperatures)
        if (!(t >= 0)) throw std::invalid_argument("temperatures must be nonnegative");

    MisspecReport report;
    for (double a : config.simple_slopes)
        report.models.push_back({a, 0.0, config.model_noise_std, false});
    for (double a : config.complex_slopes)
        for (double b : config.complex_intercepts)
            report.models.push_back({a, b, config.model_noise_std, true});

    const int m = static_cast<int>(report.models.size());
    report.risks = Eigen::VectorXd::Zero(m);
    for (int i = 0; i < m; ++i) report.risks[i] = misspec_model_risk(config, report.models[i]);

    const int n_max =
        config.sample_sizes.empty()
            ? 0
            : *std::max_element(config.sample_sizes.begin(), config.sample_sizes.end());
    const std::uint64_t seed_x = derive_seed(config.seed, 0);
    const std::uint64_t seed_eps = derive_seed(config.seed, 1);

    // Cumulative per-model log likelihood after each datum; sample sizes
    // share prefixes of one deterministic stream.
    std::vector<Eigen::VectorXd> cumulative(n_max + 1, Eigen::VectorXd::Zero(m));
    const double sigma2 = config.model_noise_std * config.model_noise_std;
    const double log_norm = -0.5 * std::log(2.0 * std::numbers::pi * sigma2);
    for (int n = 0; n < n_max; ++n) {
        const double x = 2.0 * CounterRng::uniform_at(seed_x, n) - 1.0;
        const double eps_std = config.gen_noise_base + config.gen_noise_slope * std::abs(x);
        const double y = config.gen_slope * x + eps_std * CounterRng::normal_at(seed_eps, n);
        cumulative[n + 1] = cumulative[n];
        for (int i = 0; i < m; ++i) {
            const double r = y - report.models[i].slope * x - report.models[i].intercept;
            cumulative[n + 1][i] += log_norm - r * r / (2.0 * sigma2);
        }
    }

    const Eigen::VectorXd log_prior =
        Eigen::VectorXd::Constant(m, -std::log(static_cast<double>(m)));
    for (int n : config.sample_sizes) {
        if (n > n_max) throw std::logic_error("sample size exceeds generated data");
        for (double t : config.temperatures) {
            MisspecRow row;
            row.n = n;
            row.temperature = t;
            row.weights = tempered_weights(cumulative[n], log_prior, t, config.form);
            for (int i = 0; i < m; ++i) {
                if (report.models[i].complex_tier)
                    row.complex_mass += row.weights[i];
                else
                    row.simple_mass += row.weights[i];
            }
            report.rows.push_back(std::move(row));
        }
    }
    return report;
}

} // namespace gla
