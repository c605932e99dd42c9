#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace gla {

enum class Activation { relu, tanh };
enum class Task { regression, classification };
enum class Optimizer { gd, gd_momentum };

std::string to_string(Activation a);
std::string to_string(Task t);
std::string to_string(Optimizer o);
Activation activation_from_string(const std::string& s);
Task task_from_string(const std::string& s);
Optimizer optimizer_from_string(const std::string& s);

/// Fully-connected architecture. Hidden layers use `activation`; the head is
/// identity for regression and softmax (applied in the loss / predictive
/// path, forward() returns logits) for classification. When `use_bias` is
/// set, layer l holds an (in_l + 1) x out_l weight matrix whose last row is
/// the bias, fed by appending a constant 1 to the layer input.
struct MlpArchitecture {
    std::vector<int> layer_sizes;
    Activation activation = Activation::tanh;
    Task task = Task::regression;
    bool use_bias = true;

    int input_dim() const { return layer_sizes.front(); }
    int output_dim() const { return layer_sizes.back(); }
    int num_weight_layers() const { return static_cast<int>(layer_sizes.size()) - 1; }
    // Rows (fan-in, +1 if biased) and columns (fan-out) of each weight matrix.
    std::vector<std::pair<int, int>> layer_shapes() const;
    int param_count() const;

    void validate() const; // throws std::invalid_argument
};

/// Per-layer weights. Flattening is row-major over (input index, output
/// index) within a layer, layers concatenated in order; this convention is
/// shared with every curvature structure and sampler.
struct Parameters {
    std::vector<Eigen::MatrixXd> weights;

    int param_count() const;
    bool all_finite() const;
    Eigen::VectorXd flatten() const;
    static Parameters unflatten(const MlpArchitecture& arch, const Eigen::VectorXd& flat);
    static Parameters zeros(const MlpArchitecture& arch);
    // Uniform(-s, s) with s = 1/sqrt(fan_in), one substream per layer.
    static Parameters random_init(const MlpArchitecture& arch, std::uint64_t seed);
};

/// Either a regression set (targets filled) or a classification set (labels
/// filled, values in [0, num_classes)).
struct Dataset {
    Eigen::MatrixXd inputs;  // N x I
    Eigen::MatrixXd targets; // N x O, regression only
    std::vector<int> labels; // N, classification only
    int num_classes = 0;
    std::string name;

    int size() const { return static_cast<int>(inputs.rows()); }
    Task task() const { return labels.empty() ? Task::regression : Task::classification; }
    Dataset subset(const std::vector<int>& indices) const;
    void validate() const;
    void validate_for(const MlpArchitecture& arch) const;
};

struct TrainConfig {
    double prior_std = 1.0; // beta; +inf disables the regularizer
    double learning_rate = 1e-2;
    int epochs = 100;
    int batch_size = 0; // 0 or >= N means full batch
    std::uint64_t seed = 0;
    Optimizer optimizer = Optimizer::gd_momentum;
    double momentum = 0.9;

    double prior_precision() const { return 1.0 / (prior_std * prior_std); }
    void validate() const;
};

/// Batch forward pass; returns logits (classification) or values (regression).
Eigen::MatrixXd forward(const MlpArchitecture& arch, const Parameters& params,
                        const Eigen::MatrixXd& x);

/// Row-wise softmax with max-subtraction.
Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits);

struct LossGrad {
    double loss = 0.0;
    Parameters grad;
};

/// Regularized loss sum_n nll(x_n, y_n) + 0.5 * beta^-2 * ||theta||^2 and its
/// gradient. The regression NLL is 0.5 * ||y - f||^2 (unit noise variance,
/// additive constant dropped); classification is categorical cross-entropy.
LossGrad loss_and_gradient(const MlpArchitecture& arch, const Parameters& params,
                           const Dataset& batch, const TrainConfig& config);

/// Per-datum backprop record: for datum n and layer l, `q[n][l]` is the layer
/// input (bias 1 appended when biased), `g[n][l]` the gradient w.r.t. the
/// layer's pre-activation output, and `grad_flat[n]` the flattened gradient
/// of the unregularized per-sample NLL; its layer-l block is q g^T.
struct PerSampleTape {
    std::vector<std::vector<Eigen::VectorXd>> q;
    std::vector<std::vector<Eigen::VectorXd>> g;
    std::vector<Eigen::VectorXd> grad_flat;

    int size() const { return static_cast<int>(grad_flat.size()); }
};

PerSampleTape per_sample_backprop(const MlpArchitecture& arch, const Parameters& params,
                                  const Dataset& batch);

struct TrainResult {
    Parameters theta_map;
    std::vector<std::pair<int, double>> trace; // (epoch, full regularized loss)
    bool plateau_warning = false; // trace rose by more than 1e-6*|loss| in the last 10%
};

/// Deterministic (momentum-optional) gradient-descent MAP training. Throws on
/// non-finite loss, reporting the last finite epoch.
TrainResult train_map(const MlpArchitecture& arch, const Dataset& data,
                      const TrainConfig& config);

} // namespace gla
