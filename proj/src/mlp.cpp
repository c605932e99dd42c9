#include "gla/mlp.hpp"

#include "gla/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace gla {

std::string to_string(Activation a) {
    return a == Activation::relu ? "relu" : "tanh";
}

std::string to_string(Task t) {
    return t == Task::regression ? "regression" : "classification";
}

std::string to_string(Optimizer o) {
    return o == Optimizer::gd ? "gd" : "gd_momentum";
}

Activation activation_from_string(const std::string& s) {
    if (s == "relu") return Activation::relu;
    if (s == "tanh") return Activation::tanh;
    throw std::invalid_argument("unknown activation: " + s);
}

Task task_from_string(const std::string& s) {
    if (s == "regression") return Task::regression;
    if (s == "classification") return Task::classification;
    throw std::invalid_argument("unknown task: " + s);
}

Optimizer optimizer_from_string(const std::string& s) {
    if (s == "gd") return Optimizer::gd;
    if (s == "gd_momentum") return Optimizer::gd_momentum;
    throw std::invalid_argument("unknown optimizer: " + s);
}

std::vector<std::pair<int, int>> MlpArchitecture::layer_shapes() const {
    std::vector<std::pair<int, int>> shapes;
    const int extra = use_bias ? 1 : 0;
    for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l)
        shapes.emplace_back(layer_sizes[l] + extra, layer_sizes[l + 1]);
    return shapes;
}

int MlpArchitecture::param_count() const {
    int total = 0;
    for (const auto& [rows, cols] : layer_shapes()) total += rows * cols;
    return total;
}

void MlpArchitecture::validate() const {
    if (layer_sizes.size() < 2)
        throw std::invalid_argument("architecture needs at least input and output sizes");
    for (int s : layer_sizes)
        if (s <= 0) throw std::invalid_argument("layer sizes must be positive");
}

int Parameters::param_count() const {
    int total = 0;
    for (const auto& w : weights) total += static_cast<int>(w.size());
    return total;
}

bool Parameters::all_finite() const {
    for (const auto& w : weights)
        if (!w.allFinite()) return false;
    return true;
}

Eigen::VectorXd Parameters::flatten() const {
    Eigen::VectorXd flat(param_count());
    int offset = 0;
    for (const auto& w : weights) {
        for (int i = 0; i < w.rows(); ++i)
            for (int j = 0; j < w.cols(); ++j) flat[offset++] = w(i, j);
    }
    return flat;
}

Parameters Parameters::unflatten(const MlpArchitecture& arch, const Eigen::VectorXd& flat) {
    if (flat.size() != arch.param_count())
        throw std::invalid_argument("flat vector length " + std::to_string(flat.size()) +
                                    " does not match parameter count " +
                                    std::to_string(arch.param_count()));
    Parameters p;
    int offset = 0;
    for (const auto& [rows, cols] : arch.layer_shapes()) {
        Eigen::MatrixXd w(rows, cols);
        for (int i = 0; i < rows; ++i)
            for (int j = 0; j < cols; ++j) w(i, j) = flat[offset++];
        p.weights.push_back(std::move(w));
    }
    return p;
}

Parameters Parameters::zeros(const MlpArchitecture& arch) {
    Parameters p;
    for (const auto& [rows, cols] : arch.layer_shapes())
        p.weights.push_back(Eigen::MatrixXd::Zero(rows, cols));
    return p;
}

Parameters Parameters::random_init(const MlpArchitecture& arch, std::uint64_t seed) {
    Parameters p;
    const auto shapes = arch.layer_shapes();
    for (std::size_t l = 0; l < shapes.size(); ++l) {
        const auto [rows, cols] = shapes[l];
        const double s = 1.0 / std::sqrt(static_cast<double>(arch.layer_sizes[l]));
        CounterRng rng(derive_seed(seed, l));
        Eigen::MatrixXd w(rows, cols);
        for (int i = 0; i < rows; ++i)
            for (int j = 0; j < cols; ++j) w(i, j) = rng.uniform(-s, s);
        p.weights.push_back(std::move(w));
    }
    return p;
}

Dataset Dataset::subset(const std::vector<int>& indices) const {
    Dataset out;
    out.num_classes = num_classes;
    out.name = name;
    out.inputs.resize(static_cast<int>(indices.size()), inputs.cols());
    if (targets.size() > 0) out.targets.resize(static_cast<int>(indices.size()), targets.cols());
    for (std::size_t k = 0; k < indices.size(); ++k) {
        out.inputs.row(static_cast<int>(k)) = inputs.row(indices[k]);
        if (targets.size() > 0) out.targets.row(static_cast<int>(k)) = targets.row(indices[k]);
        if (!labels.empty()) out.labels.push_back(labels[indices[k]]);
    }
    return out;
}

void Dataset::validate() const {
    if (inputs.rows() < 1) throw std::invalid_argument("dataset '" + name + "' is empty");
    if (!inputs.allFinite())
        throw std::invalid_argument("dataset '" + name + "' has non-finite inputs");
    if (task() == Task::regression) {
        if (targets.rows() != inputs.rows())
            throw std::invalid_argument("dataset '" + name + "' target rows != input rows");
        if (!targets.allFinite())
            throw std::invalid_argument("dataset '" + name + "' has non-finite targets");
    } else {
        if (static_cast<int>(labels.size()) != inputs.rows())
            throw std::invalid_argument("dataset '" + name + "' label count != input rows");
        for (int y : labels)
            if (y < 0 || y >= num_classes)
                throw std::invalid_argument("dataset '" + name + "' has label " +
                                            std::to_string(y) + " outside [0, " +
                                            std::to_string(num_classes) + ")");
    }
}

void Dataset::validate_for(const MlpArchitecture& arch) const {
    validate();
    if (inputs.cols() != arch.input_dim())
        throw std::invalid_argument("dataset '" + name + "' input dim " +
                                    std::to_string(inputs.cols()) + " != architecture input dim " +
                                    std::to_string(arch.input_dim()));
    if (task() != arch.task)
        throw std::invalid_argument("dataset '" + name + "' task does not match architecture");
    if (task() == Task::regression && targets.cols() != arch.output_dim())
        throw std::invalid_argument("dataset '" + name + "' target dim != architecture output dim");
    if (task() == Task::classification && num_classes != arch.output_dim())
        throw std::invalid_argument("dataset '" + name + "' class count != architecture output dim");
}

void TrainConfig::validate() const {
    if (!(prior_std > 0)) throw std::invalid_argument("train.prior_std must be positive");
    if (!(learning_rate > 0)) throw std::invalid_argument("train.learning_rate must be positive");
    if (epochs <= 0) throw std::invalid_argument("train.epochs must be positive");
    if (batch_size < 0) throw std::invalid_argument("train.batch_size must be nonnegative");
    if (!(momentum >= 0 && momentum < 1))
        throw std::invalid_argument("train.momentum must be in [0, 1)");
}

namespace {

void check_layer_dims(const MlpArchitecture& arch, const Parameters& params,
                      const Eigen::MatrixXd& x) {
    if (x.cols() != arch.input_dim())
        throw std::invalid_argument("input has " + std::to_string(x.cols()) +
                                    " columns, architecture expects " +
                                    std::to_string(arch.input_dim()));
    const auto shapes = arch.layer_shapes();
    if (params.weights.size() != shapes.size())
        throw std::invalid_argument("parameter layer count mismatch");
    for (std::size_t l = 0; l < shapes.size(); ++l) {
        if (params.weights[l].rows() != shapes[l].first ||
            params.weights[l].cols() != shapes[l].second)
            throw std::invalid_argument("layer " + std::to_string(l) + " weight shape " +
                                        std::to_string(params.weights[l].rows()) + "x" +
                                        std::to_string(params.weights[l].cols()) +
                                        " does not match architecture");
    }
}

Eigen::MatrixXd apply_activation(const Eigen::MatrixXd& a, Activation act) {
    if (act == Activation::relu) return a.cwiseMax(0.0);
    return a.array().tanh().matrix();
}

Eigen::MatrixXd activation_derivative(const Eigen::MatrixXd& a, Activation act) {
    if (act == Activation::relu)
        return (a.array() > 0.0).cast<double>().matrix();
    const Eigen::ArrayXXd t = a.array().tanh();
    return (1.0 - t * t).matrix();
}

struct ForwardTape {
    // q[l]: B x (in_l [+1]) layer inputs, bias column appended when biased.
    std::vector<Eigen::MatrixXd> q;
    // a[l]: B x out_l pre-activations.
    std::vector<Eigen::MatrixXd> a;
    Eigen::MatrixXd output; // logits or values
};

ForwardTape forward_tape(const MlpArchitecture& arch, const Parameters& params,
                         const Eigen::MatrixXd& x) {
    check_layer_dims(arch, params, x);
    ForwardTape tape;
    const int L = arch.num_weight_layers();
    Eigen::MatrixXd h = x;
    for (int l = 0; l < L; ++l) {
        Eigen::MatrixXd q;
        if (arch.use_bias) {
            q.resize(h.rows(), h.cols() + 1);
            q << h, Eigen::MatrixXd::Ones(h.rows(), 1);
        } else {
            q = h;
        }
        Eigen::MatrixXd a = q * params.weights[l];
        tape.q.push_back(std::move(q));
        h = (l + 1 < L) ? apply_activation(a, arch.activation) : a;
        tape.a.push_back(std::move(a));
    }
    tape.output = h;
    return tape;
}

// Per-row NLL and the gradient w.r.t. the network output.
// Regression: 0.5 * ||y - f||^2, d = f - y.
// Classification: -log softmax(f)[label], d = softmax(f) - onehot.
struct HeadGrad {
    Eigen::VectorXd nll;    // B
    Eigen::MatrixXd output_grad; // B x O
};

HeadGrad head_gradient(const MlpArchitecture& arch, const Eigen::MatrixXd& out,
                       const Dataset& batch) {
    const int B = static_cast<int>(out.rows());
    HeadGrad hg;
    hg.nll.resize(B);
    if (arch.task == Task::regression) {
        hg.output_grad = out - batch.targets;
        for (int n = 0; n < B; ++n) hg.nll[n] = 0.5 * hg.output_grad.row(n).squaredNorm();
    } else {
        Eigen::MatrixXd probs = softmax_rows(out);
        hg.output_grad = probs;
        for (int n = 0; n < B; ++n) {
            const int y = batch.labels[n];
            hg.output_grad(n, y) -= 1.0;
            // log softmax evaluated stably from the logits.
            const double m = out.row(n).maxCoeff();
            const double lse = m + std::log((out.row(n).array() - m).exp().sum());
            hg.nll[n] = lse - out(n, y);
        }
    }
    return hg;
}

// Backward sweep from output gradients `delta` (B x O); returns per-layer
// pre-activation gradients g[l] (B x out_l).
std::vector<Eigen::MatrixXd> backward_sweep(const MlpArchitecture& arch,
                                            const Parameters& params, const ForwardTape& tape,
                                            const Eigen::MatrixXd& output_grad) {
    const int L = arch.num_weight_layers();
    std::vector<Eigen::MatrixXd> g(L);
    g[L - 1] = output_grad;
    for (int l = L - 1; l > 0; --l) {
        // Propagate through W_l excluding the bias row, then the activation.
        const int in_l = arch.layer_sizes[l];
        Eigen::MatrixXd back = g[l] * params.weights[l].topRows(in_l).transpose();
        g[l - 1] = back.cwiseProduct(activation_derivative(tape.a[l - 1], arch.activation));
    }
    return g;
}

} // namespace

Eigen::MatrixXd forward(const MlpArchitecture& arch, const Parameters& params,
                        const Eigen::MatrixXd& x) {
    return forward_tape(arch, params, x).output;
}

Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits) {
    Eigen::MatrixXd probs(logits.rows(), logits.cols());
    for (int n = 0; n < logits.rows(); ++n) {
        const Eigen::ArrayXd shifted = logits.row(n).array() - logits.row(n).maxCoeff();
        const Eigen::ArrayXd e = shifted.exp();
        probs.row(n) = (e / e.sum()).matrix().transpose();
    }
    return probs;
}

LossGrad loss_and_gradient(const MlpArchitecture& arch, const Parameters& params,
                           const Dataset& batch, const TrainConfig& config) {
    if (batch.size() < 1) throw std::invalid_argument("loss_and_gradient: empty batch");
    const ForwardTape tape = forward_tape(arch, params, batch.inputs);
    const HeadGrad hg = head_gradient(arch, tape.output, batch);

    LossGrad result;
    result.loss = hg.nll.sum();
    if (!std::isfinite(result.loss)) {
        for (int n = 0; n < batch.size(); ++n)
            if (!std::isfinite(hg.nll[n]))
                throw std::runtime_error("non-finite loss at batch index " + std::to_string(n));
        throw std::runtime_error("non-finite loss");
    }

    const auto g = backward_sweep(arch, params, tape, hg.output_grad);
    result.grad = Parameters::zeros(arch);
    for (int l = 0; l < arch.num_weight_layers(); ++l)
        result.grad.weights[l] = tape.q[l].transpose() * g[l];

    const double tau = config.prior_precision();
    if (tau > 0) {
        double sq = 0.0;
        for (std::size_t l = 0; l < params.weights.size(); ++l) {
            sq += params.weights[l].squaredNorm();
            result.grad.weights[l] += tau * params.weights[l];
        }
        result.loss += 0.5 * tau * sq;
    }
    return result;
}

PerSampleTape per_sample_backprop(const MlpArchitecture& arch, const Parameters& params,
                                  const Dataset& batch) {
    if (!params.all_finite())
        throw std::invalid_argument("per_sample_backprop: non-finite parameters");
    const ForwardTape tape = forward_tape(arch, params, batch.inputs);
    const HeadGrad hg = head_gradient(arch, tape.output, batch);
    const auto g = backward_sweep(arch, params, tape, hg.output_grad);

    const int B = batch.size();
    const int L = arch.num_weight_layers();
    PerSampleTape out;
    out.q.resize(B);
    out.g.resize(B);
    out.grad_flat.resize(B);
    for (int n = 0; n < B; ++n) {
        out.q[n].resize(L);
        out.g[n].resize(L);
        Eigen::VectorXd flat(arch.param_count());
        int offset = 0;
        for (int l = 0; l < L; ++l) {
            out.q[n][l] = tape.q[l].row(n).transpose();
            out.g[n][l] = g[l].row(n).transpose();
            const auto& qn = out.q[n][l];
            const auto& gn = out.g[n][l];
            for (int i = 0; i < qn.size(); ++i)
                for (int j = 0; j < gn.size(); ++j) flat[offset++] = qn[i] * gn[j];
        }
        out.grad_flat[n] = std::move(flat);
    }
    return out;
}

TrainResult train_map(const MlpArchitecture& arch, const Dataset& data,
                      const TrainConfig& config) {
    arch.validate();
    config.validate();
    data.validate_for(arch);

    const int N = data.size();
    const int batch = (config.batch_size == 0 || config.batch_size >= N) ? N : config.batch_size;

    TrainResult result;
    result.theta_map = Parameters::random_init(arch, config.seed);
    std::vector<Eigen::MatrixXd> velocity;
    for (const auto& w : result.theta_map.weights)
        velocity.push_back(Eigen::MatrixXd::Zero(w.rows(), w.cols()));

    std::vector<int> order(N);
    std::iota(order.begin(), order.end(), 0);

    const double full_loss0 =
        loss_and_gradient(arch, result.theta_map, data, config).loss;
    result.trace.emplace_back(0, full_loss0);

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        if (batch < N) {
            CounterRng shuffle_rng(derive_seed(config.seed, 1000 + epoch));
            for (int i = N - 1; i > 0; --i)
                std::swap(order[i], order[static_cast<int>(shuffle_rng.below(i + 1))]);
        }
        for (int start = 0; start < N; start += batch) {
            const int count = std::min(batch, N - start);
            Dataset mini = (batch == N)
                               ? data
                               : data.subset({order.begin() + start, order.begin() + start + count});
            LossGrad lg = loss_and_gradient(arch, result.theta_map, mini, config);
            // Minibatch data gradient rescaled to estimate the full-sum gradient;
            // the regularizer gradient tau*theta is already included once.
            const double scale = static_cast<double>(N) / count;
            const double tau = config.prior_precision();
            for (std::size_t l = 0; l < result.theta_map.weights.size(); ++l) {
                Eigen::MatrixXd grad = lg.grad.weights[l];
                if (batch < N && tau > 0)
                    grad = (grad - tau * result.theta_map.weights[l]) * scale +
                           tau * result.theta_map.weights[l];
                else if (batch < N)
                    grad *= scale;
                if (config.optimizer == Optimizer::gd_momentum) {
                    velocity[l] = config.momentum * velocity[l] - config.learning_rate * grad;
                    result.theta_map.weights[l] += velocity[l];
                } else {
                    result.theta_map.weights[l] -= config.learning_rate * grad;
                }
            }
        }
        const double full_loss = loss_and_gradient(arch, result.theta_map, data, config).loss;
        if (!std::isfinite(full_loss) || !result.theta_map.all_finite())
            throw std::runtime_error("training diverged; last finite epoch " +
                                     std::to_string(result.trace.back().first));
        result.trace.emplace_back(epoch, full_loss);
    }

    // Plateau check over the final 10% of epochs.
    const std::size_t tail_start =
        result.trace.size() - std::max<std::size_t>(1, result.trace.size() / 10);
    for (std::size_t k = tail_start; k + 1 < result.trace.size(); ++k) {
        const double tol = 1e-6 * std::abs(result.trace[k].second);
        if (result.trace[k + 1].second > result.trace[k].second + tol) {
            result.plateau_warning = true;
            break;
        }
    }
    return result;
}

} // namespace gla
