#include "gla/posterior.hpp"

#include "gla/rng.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace gla {

namespace {

std::vector<int> block_offsets(const std::vector<std::pair<int, int>>& shapes) {
    std::vector<int> off;
    int o = 0;
    for (const auto& [r, c] : shapes) {
        off.push_back(o);
        o += r * c;
    }
    return off;
}

} // namespace

GlaPosterior build_posterior(const Eigen::VectorXd& theta_map, const TemperedHessian& precision,
                             std::uint64_t seed) {
    if (theta_map.size() != precision.param_count)
        throw std::invalid_argument("posterior mode length does not match precision size");
    if (!theta_map.allFinite())
        throw std::invalid_argument("posterior mode has non-finite entries");

    GlaPosterior post;
    post.theta_map = theta_map;
    post.precision = precision;
    post.seed = seed;

    switch (precision.kind) {
        case CurvatureKind::full: {
            Eigen::LLT<Eigen::MatrixXd> llt(precision.full);
            if (llt.info() != Eigen::Success)
                throw std::runtime_error("tempered precision is not positive-definite");
            post.chol_lower = llt.matrixL();
            break;
        }
        case CurvatureKind::diag: {
            if ((precision.diagonal.array() <= 0).any())
                throw std::runtime_error("tempered precision has nonpositive diagonal entries");
            post.coord_std = precision.diagonal.array().rsqrt();
            break;
        }
        case CurvatureKind::block_diag: {
            for (const auto& b : precision.blocks) {
                Eigen::LLT<Eigen::MatrixXd> llt(b);
                if (llt.info() != Eigen::Success)
                    throw std::runtime_error("tempered block is not positive-definite");
                post.block_chol.emplace_back(llt.matrixL());
            }
            break;
        }
        case CurvatureKind::kfac:
        case CurvatureKind::ekfac:
            for (const auto& k : precision.kron)
                if ((k.scales.array() <= 0).any())
                    throw std::runtime_error("tempered eigenvalues are not all positive");
            break;
    }
    return post;
}

Eigen::VectorXd GlaPosterior::sample(int index) const {
    if (index < 0) throw std::invalid_argument("sample index must be nonnegative");
    const int P = param_count();
    Eigen::VectorXd z(P);
    const std::uint64_t base = static_cast<std::uint64_t>(index) * static_cast<std::uint64_t>(P);
    for (int p = 0; p < P; ++p) z[p] = CounterRng::normal_at(seed, base + p);

    Eigen::VectorXd delta(P);
    switch (precision.kind) {
        case CurvatureKind::full:
            // H = L L', so L^{-T} z has covariance H^{-1}.
            delta = chol_lower.transpose().triangularView<Eigen::Upper>().solve(z);
            break;
        case CurvatureKind::diag:
            delta = coord_std.cwiseProduct(z);
            break;
        case CurvatureKind::block_diag: {
            const auto off = block_offsets(precision.layer_shapes);
            for (std::size_t l = 0; l < block_chol.size(); ++l) {
                const int n = static_cast<int>(block_chol[l].rows());
                delta.segment(off[l], n) =
                    block_chol[l].transpose().triangularView<Eigen::Upper>().solve(
                        z.segment(off[l], n));
            }
            break;
        }
        case CurvatureKind::kfac:
        case CurvatureKind::ekfac: {
            // Matrix-normal draw per layer: scale the eigenbasis coordinates,
            // rotate back, never densifying the Kronecker block.
            const auto off = block_offsets(precision.layer_shapes);
            for (int l = 0; l < precision.num_layers(); ++l) {
                const auto [rows, cols] = precision.layer_shapes[l];
                const auto& k = precision.kron[l];
                Eigen::MatrixXd zt(rows, cols);
                for (int i = 0; i < rows; ++i)
                    for (int j = 0; j < cols; ++j)
                        zt(i, j) = z[off[l] + i * cols + j] / std::sqrt(k.scales[i * cols + j]);
                const Eigen::MatrixXd dw = k.u_q * zt * k.u_g.transpose();
                for (int i = 0; i < rows; ++i)
                    for (int j = 0; j < cols; ++j) delta[off[l] + i * cols + j] = dw(i, j);
            }
            break;
        }
    }
    return theta_map + delta;
}

std::vector<Eigen::VectorXd> GlaPosterior::sample_many(int count, int first_index) const {
    std::vector<Eigen::VectorXd> out;
    out.reserve(count);
    for (int s = 0; s < count; ++s) out.push_back(sample(first_index + s));
    return out;
}

double GlaPosterior::log_density(const Eigen::VectorXd& theta) const {
    if (theta.size() != param_count())
        throw std::invalid_argument("log_density: vector length mismatch");
    const Eigen::VectorXd d = theta - theta_map;
    return 0.5 * precision.log_det() -
           0.5 * param_count() * std::log(2.0 * std::numbers::pi) -
           0.5 * precision.quadratic_form(d);
}

GlaPosterior prior_only(int param_count, double prior_std, std::uint64_t seed) {
    if (param_count <= 0) throw std::invalid_argument("prior_only: param count must be positive");
    if (!(prior_std > 0)) throw std::invalid_argument("prior_only: prior std must be positive");
    TemperedHessian h;
    h.kind = CurvatureKind::diag;
    h.temperature = 1.0;
    h.prior_precision = 1.0 / (prior_std * prior_std);
    h.param_count = param_count;
    h.layer_shapes = {{param_count, 1}};
    h.diagonal = Eigen::VectorXd::Constant(param_count, h.prior_precision);
    return build_posterior(Eigen::VectorXd::Zero(param_count), h, seed);
}

double contraction_ratio(const GlaPosterior& a, const GlaPosterior& b) {
    if (a.precision.kind != b.precision.kind)
        throw std::invalid_argument("contraction_ratio: posterior structures differ");
    if (a.param_count() != b.param_count())
        throw std::invalid_argument("contraction_ratio: posterior sizes differ");
    const double denom = a.precision.trace_covariance();
    if (!(denom > 0)) throw std::invalid_argument("contraction_ratio: denominator trace is zero");
    return b.precision.trace_covariance() / denom;
}

double laplace_log_evidence(double negative_log_joint_at_mode, const TemperedHessian& precision) {
    return -negative_log_joint_at_mode +
           0.5 * precision.param_count * std::log(2.0 * std::numbers::pi) -
           0.5 * precision.log_det();
}

} // namespace gla
