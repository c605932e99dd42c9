#pragma once

#include "gla/mlp.hpp"
#include "gla/posterior.hpp"

#include <Eigen/Dense>

namespace gla {

// Monte Carlo posterior predictive summary.
// Regression: `mean` is the average of sampled network outputs and `std` the
// total predictive standard deviation sqrt(across-sample variance + 1), the
// +1 being the fixed unit observation-noise variance of the likelihood.
// Classification: `mean` holds the averaged softmax probabilities and
// `entropy` the entropy of that averaged distribution.
struct PredictiveResult {
    Eigen::MatrixXd mean;      // N x O
    Eigen::MatrixXd std;       // N x O (regression only; empty otherwise)
    Eigen::VectorXd entropy;   // N (classification only; empty otherwise)
    int num_samples = 0;
    std::uint64_t seed = 0;
};

struct EvalMetrics {
    double accuracy = 0.0;
    double mean_entropy = 0.0;
    double mean_nll = 0.0;
};

// Shannon entropy (nats) of a probability vector. Entries must be
// nonnegative and sum to 1 within 1e-6; the vector is renormalized before
// evaluation and 0 * log 0 counts as 0.
double entropy(const Eigen::VectorXd& probs);

// Row-wise entropy of a probability matrix.
Eigen::VectorXd entropy_rows(const Eigen::MatrixXd& probs);

// Unflatten posterior draws [first_index, first_index + count).
std::vector<Parameters> sample_parameters(const GlaPosterior& posterior,
                                          const MlpArchitecture& arch, int count,
                                          int first_index = 0);

// Average the predictions of `num_samples` posterior draws on `inputs`.
PredictiveResult mc_predict(const MlpArchitecture& arch, const GlaPosterior& posterior,
                            const Eigen::MatrixXd& inputs, int num_samples);

// Classification metrics of the Monte Carlo predictive on a labeled dataset.
EvalMetrics evaluate(const MlpArchitecture& arch, const GlaPosterior& posterior,
                     const Dataset& data, int num_samples);

// Same metrics from an explicit N x K probability matrix.
EvalMetrics evaluate_probs(const Eigen::MatrixXd& probs, const std::vector<int>& labels);

// Point-estimate (plug-in) softmax probabilities and metrics.
Eigen::MatrixXd map_predict_probs(const MlpArchitecture& arch, const Parameters& theta,
                                  const Eigen::MatrixXd& inputs);
EvalMetrics map_evaluate(const MlpArchitecture& arch, const Parameters& theta,
                         const Dataset& data);

} // namespace gla
