#pragma once

#include "gla/mlp.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

namespace gla {

enum class CurvatureKind { full, diag, block_diag, kfac, ekfac };

std::string to_string(CurvatureKind k);
CurvatureKind curvature_kind_from_string(const std::string& s);
std::vector<CurvatureKind> all_curvature_kinds();

// Per-layer Kronecker factorization of the curvature block.
struct KronFactors {
    Eigen::MatrixXd q_cov; // (in[+1]) x (in[+1]) input second-moment factor
    Eigen::MatrixXd g_cov; // out x out output-gradient second-moment factor
};

// Eigendecomposition of a Kronecker pair, plus per-direction scales.
struct KronEigenbasis {
    Eigen::MatrixXd u_q;        // eigenvectors of q_cov
    Eigen::MatrixXd u_g;        // eigenvectors of g_cov
    Eigen::VectorXd s_q;        // eigenvalues of q_cov
    Eigen::VectorXd s_g;        // eigenvalues of g_cov
    Eigen::VectorXd scales;     // per-direction curvature scale, length rows*cols,
                                // index p = i*cols + j over (i, j) eigendirections
};

// Curvature of the negative log-likelihood around a fixed parameter point,
// in one of five structural families. Only the payload matching `kind` is
// populated.
struct CurvatureEstimate {
    CurvatureKind kind = CurvatureKind::diag;
    int param_count = 0;
    int dataset_size = 0;
    std::vector<std::pair<int, int>> layer_shapes;

    Eigen::MatrixXd full;                 // kind == full: P x P
    Eigen::VectorXd diagonal;             // kind == diag: P
    std::vector<Eigen::MatrixXd> blocks;  // kind == block_diag: per-layer P_l x P_l
    std::vector<KronFactors> kron;        // kind == kfac: per-layer factors
    std::vector<KronEigenbasis> ekfac;    // kind == ekfac: per-layer basis + scales

    int num_layers() const { return static_cast<int>(layer_shapes.size()); }
    int layer_param_count(int l) const {
        return layer_shapes[l].first * layer_shapes[l].second;
    }
    // Densify this estimate's implied P x P matrix (throws above the size cap).
    Eigen::MatrixXd dense(int cap = 4096) const;
    void validate() const;
};

struct FisherOptions {
    std::uint64_t seed = 0;   // reserved for sampled variants
    int full_cap = 2000;      // refuse full curvature above this many parameters
};

// Empirical sum-of-outer-products curvature at theta for the given structure.
CurvatureEstimate estimate_fisher(CurvatureKind kind, const MlpArchitecture& arch,
                                  const Parameters& theta, const Dataset& data,
                                  const FisherOptions& options = {});

// All five structures from one shared per-sample sweep.
std::vector<CurvatureEstimate> estimate_all_fishers(const MlpArchitecture& arch,
                                                    const Parameters& theta, const Dataset& data,
                                                    const std::vector<CurvatureKind>& kinds,
                                                    const FisherOptions& options = {});

// Dense layer block implied by Kronecker factors scaled by the dataset size,
// in the row-major (input, output) flattening.
Eigen::MatrixXd kron_block_to_dense(const Eigen::MatrixXd& q_cov, const Eigen::MatrixXd& g_cov,
                                    int dataset_size);

// Rescale the eigenbasis of a Kronecker estimate so its diagonal matches the
// exact per-direction second moments of the projected gradients.
CurvatureEstimate ekfac_from_kfac(const CurvatureEstimate& kfac_estimate,
                                  const PerSampleTape& tape);

// Tempered curvature: precision H = T * M + tau * I with tau = 1 / prior_std^2.
struct TemperedHessian {
    CurvatureKind kind = CurvatureKind::diag;
    double temperature = 1.0;
    double prior_precision = 0.0;
    double jitter = 0.0;          // extra multiple of I added for positive-definiteness
    int param_count = 0;
    std::vector<std::pair<int, int>> layer_shapes;

    Eigen::MatrixXd full;                 // full: P x P tempered precision
    Eigen::VectorXd diagonal;             // diag: P tempered precision diagonal
    std::vector<Eigen::MatrixXd> blocks;  // block_diag: tempered per-layer blocks
    std::vector<KronEigenbasis> kron;     // kfac / ekfac: eigenbasis with *tempered*
                                          // per-direction precisions in `scales`

    int num_layers() const { return static_cast<int>(layer_shapes.size()); }
    double log_det() const;
    // v' H v for a flat direction v.
    double quadratic_form(const Eigen::VectorXd& v) const;
    // H^{-1} v for a flat vector v (structure-aware solve).
    Eigen::VectorXd solve(const Eigen::VectorXd& v) const;
    Eigen::MatrixXd dense(int cap = 4096) const;
    Eigen::MatrixXd dense_covariance(int cap = 4096) const;
    double trace_covariance() const;
};

// Build H = T * M + tau * I. Adds jitter when a tempered eigendirection falls
// below a small floor, so downstream factorizations stay positive-definite.
TemperedHessian temper(const CurvatureEstimate& estimate, double temperature,
                       double prior_precision);

// tau = 1 / beta^2; an infinite prior std maps to zero precision.
double prior_precision_from_std(double prior_std);

// Frobenius norm of the implied matrix (layer == -1: whole matrix).
double frobenius_norm(const CurvatureEstimate& estimate, int layer = -1);

} // namespace gla
