#pragma once

#include "gla/curvature.hpp"
#include "gla/mlp.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace gla {

// Gaussian posterior centered at the trained parameters with covariance equal
// to the inverse tempered precision. Sampling is counter-indexed: draw `s` is
// a pure function of (seed, s), independent of call order.
struct GlaPosterior {
    Eigen::VectorXd theta_map;   // flat mode, length P
    TemperedHessian precision;   // H = T * M + tau * I (plus any recorded jitter)
    std::uint64_t seed = 0;

    // Cached factorizations for sampling (structure-dependent).
    Eigen::MatrixXd chol_lower;               // full: L with L L' = H
    Eigen::VectorXd coord_std;                // diag: 1 / sqrt(h_p)
    std::vector<Eigen::MatrixXd> block_chol;  // block_diag: per-layer L

    int param_count() const { return static_cast<int>(theta_map.size()); }
    // Draw with the given index; deterministic in (seed, index).
    Eigen::VectorXd sample(int index) const;
    std::vector<Eigen::VectorXd> sample_many(int count, int first_index = 0) const;
    double log_density(const Eigen::VectorXd& theta) const;
};

GlaPosterior build_posterior(const Eigen::VectorXd& theta_map, const TemperedHessian& precision,
                             std::uint64_t seed);

// Zero-curvature posterior: an isotropic Gaussian prior as a sampling object.
GlaPosterior prior_only(int param_count, double prior_std, std::uint64_t seed);

// Ratio of total posterior variances, trace Cov(b) / trace Cov(a); < 1 when
// `b` is the more concentrated (hotter) posterior. Structures must match.
double contraction_ratio(const GlaPosterior& a, const GlaPosterior& b);

// Laplace estimate of the log normalizing constant given the negative log
// joint at the mode and the curvature there:
//   log Z ~= -nlj + (P/2) log(2 pi) - (1/2) log det H.
double laplace_log_evidence(double negative_log_joint_at_mode, const TemperedHessian& precision);

} // namespace gla
