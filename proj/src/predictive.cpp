#include "gla/predictive.hpp"

#include <cmath>
#include <stdexcept>

namespace gla {

double entropy(const Eigen::VectorXd& probs) {
    double sum = 0.0;
    for (int k = 0; k < probs.size(); ++k) {
        if (probs[k] < 0)
            throw std::invalid_argument("entropy: negative probability entry");
        sum += probs[k];
    }
    if (std::abs(sum - 1.0) > 1e-6)
        throw std::invalid_argument("entropy: probabilities sum to " + std::to_string(sum) +
                                    ", expected 1 within 1e-6");
    double h = 0.0;
    for (int k = 0; k < probs.size(); ++k) {
        const double p = probs[k] / sum;
        if (p > 0) h -= p * std::log(p);
    }
    return h;
}

Eigen::VectorXd entropy_rows(const Eigen::MatrixXd& probs) {
    Eigen::VectorXd h(probs.rows());
    for (int n = 0; n < probs.rows(); ++n) h[n] = entropy(probs.row(n).transpose());
    return h;
}

std::vector<Parameters> sample_parameters(const GlaPosterior& posterior,
                                          const MlpArchitecture& arch, int count,
                                          int first_index) {
    if (posterior.param_count() != arch.param_count())
        throw std::invalid_argument("posterior size does not match architecture");
    std::vector<Parameters> out;
    out.reserve(count);
    for (int s = 0; s < count; ++s)
        out.push_back(Parameters::unflatten(arch, posterior.sample(first_index + s)));
    return out;
}

PredictiveResult mc_predict(const MlpArchitecture& arch, const GlaPosterior& posterior,
                            const Eigen::MatrixXd& inputs, int num_samples) {
    if (num_samples < 1) throw std::invalid_argument("mc_predict: need at least one sample");
    if (posterior.param_count() != arch.param_count())
        throw std::invalid_argument("posterior size does not match architecture");

    const int N = static_cast<int>(inputs.rows());
    const int O = arch.output_dim();
    PredictiveResult result;
    result.num_samples = num_samples;
    result.seed = posterior.seed;

    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(N, O);
    Eigen::MatrixXd sum_sq = Eigen::MatrixXd::Zero(N, O);
    for (int s = 0; s < num_samples; ++s) {
        const Parameters theta = Parameters::unflatten(arch, posterior.sample(s));
        Eigen::MatrixXd out = forward(arch, theta, inputs);
        if (arch.task == Task::classification) out = softmax_rows(out);
        sum += out;
        if (arch.task == Task::regression) sum_sq += out.cwiseAbs2();
    }
    result.mean = sum / num_samples;
    if (arch.task == Task::regression) {
        // Across-sample variance of the outputs plus the fixed unit
        // observation-noise variance.
        const Eigen::MatrixXd var =
            (sum_sq / num_samples - result.mean.cwiseAbs2()).cwiseMax(0.0);
        result.std = (var.array() + 1.0).sqrt().matrix();
    } else {
        result.entropy = entropy_rows(result.mean);
    }
    return result;
}

EvalMetrics evaluate_probs(const Eigen::MatrixXd& probs, const std::vector<int>& labels) {
    if (probs.rows() != static_cast<int>(labels.size()))
        throw std::invalid_argument("evaluate_probs: row/label count mismatch");
    if (probs.rows() == 0) throw std::invalid_argument("evaluate_probs: empty input");

    EvalMetrics m;
    const Eigen::VectorXd h = entropy_rows(probs);
    int correct = 0;
    double nll = 0.0;
    for (int n = 0; n < probs.rows(); ++n) {
        int argmax = 0;
        for (int k = 1; k < probs.cols(); ++k)
            if (probs(n, k) > probs(n, argmax)) argmax = k;
        const int y = labels[n];
        if (y < 0 || y >= probs.cols())
            throw std::invalid_argument("evaluate_probs: label out of range");
        if (argmax == y) ++correct;
        nll -= std::log(std::max(probs(n, y), 1e-300));
    }
    m.accuracy = static_cast<double>(correct) / probs.rows();
    m.mean_entropy = h.mean();
    m.mean_nll = nll / probs.rows();
    return m;
}

EvalMetrics evaluate(const MlpArchitecture& arch, const GlaPosterior& posterior,
                     const Dataset& data, int num_samples) {
    if (arch.task != Task::classification)
        throw std::invalid_argument("evaluate: classification architectures only");
    data.validate_for(arch);
    const PredictiveResult pred = mc_predict(arch, posterior, data.inputs, num_samples);
    return evaluate_probs(pred.mean, data.labels);
}

Eigen::MatrixXd map_predict_probs(const MlpArchitecture& arch, const Parameters& theta,
                                  const Eigen::MatrixXd& inputs) {
    if (arch.task != Task::classification)
        throw std::invalid_argument("map_predict_probs: classification architectures only");
    return softmax_rows(forward(arch, theta, inputs));
}

EvalMetrics map_evaluate(const MlpArchitecture& arch, const Parameters& theta,
                         const Dataset& data) {
    data.validate_for(arch);
    return evaluate_probs(map_predict_probs(arch, theta, data.inputs), data.labels);
}

} // namespace gla
