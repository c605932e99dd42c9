#include "gla/curvature.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace gla {

namespace {

constexpr double kEigenFloor = 1e-10;

// Kronecker product in the flattening p = i * cols + j: rows-side factor A,
// cols-side factor B.
Eigen::MatrixXd kron_product(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
    Eigen::MatrixXd out(a.rows() * b.rows(), a.cols() * b.cols());
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

Eigen::VectorXd clamped_eigenvalues(const Eigen::VectorXd& v) {
    return v.cwiseMax(0.0);
}

struct LayerOffsets {
    std::vector<int> offset;
    std::vector<int> size;
};

LayerOffsets layer_offsets(const std::vector<std::pair<int, int>>& shapes) {
    LayerOffsets lo;
    int off = 0;
    for (const auto& [r, c] : shapes) {
        lo.offset.push_back(off);
        lo.size.push_back(r * c);
        off += r * c;
    }
    return lo;
}

void check_cap(int p, int cap, const char* what) {
    if (p > cap)
        throw std::invalid_argument(std::string(what) + " refused for " + std::to_string(p) +
                                    " parameters (cap " + std::to_string(cap) + ")");
}

} // namespace

std::string to_string(CurvatureKind k) {
    switch (k) {
        case CurvatureKind::full: return "full";
        case CurvatureKind::diag: return "diag";
        case CurvatureKind::block_diag: return "block_diag";
        case CurvatureKind::kfac: return "kfac";
        case CurvatureKind::ekfac: return "ekfac";
    }
    throw std::invalid_argument("invalid curvature kind");
}

CurvatureKind curvature_kind_from_string(const std::string& s) {
    if (s == "full") return CurvatureKind::full;
    if (s == "diag") return CurvatureKind::diag;
    if (s == "block_diag" || s == "block-diag" || s == "blockdiag")
        return CurvatureKind::block_diag;
    if (s == "kfac") return CurvatureKind::kfac;
    if (s == "ekfac") return CurvatureKind::ekfac;
    throw std::invalid_argument("unknown curvature kind: " + s);
}

std::vector<CurvatureKind> all_curvature_kinds() {
    return {CurvatureKind::full, CurvatureKind::diag, CurvatureKind::block_diag,
            CurvatureKind::kfac, CurvatureKind::ekfac};
}

Eigen::MatrixXd kron_block_to_dense(const Eigen::MatrixXd& q_cov, const Eigen::MatrixXd& g_cov,
                                    int dataset_size) {
    return static_cast<double>(dataset_size) * kron_product(q_cov, g_cov);
}

void CurvatureEstimate::validate() const {
    int total = 0;
    for (const auto& [r, c] : layer_shapes) total += r * c;
    if (total != param_count)
        throw std::invalid_argument("curvature layer shapes do not sum to param count");
    if (dataset_size < 1) throw std::invalid_argument("curvature dataset size must be positive");
    switch (kind) {
        case CurvatureKind::full:
            if (full.rows() != param_count || full.cols() != param_count)
                throw std::invalid_argument("full curvature has wrong shape");
            break;
        case CurvatureKind::diag:
            if (diagonal.size() != param_count)
                throw std::invalid_argument("diagonal curvature has wrong length");
            break;
        case CurvatureKind::block_diag:
            if (static_cast<int>(blocks.size()) != num_layers())
                throw std::invalid_argument("block curvature has wrong layer count");
            for (int l = 0; l < num_layers(); ++l)
                if (blocks[l].rows() != layer_param_count(l) ||
                    blocks[l].cols() != layer_param_count(l))
                    throw std::invalid_argument("block curvature layer " + std::to_string(l) +
                                                " has wrong shape");
            break;
        case CurvatureKind::kfac:
            if (static_cast<int>(kron.size()) != num_layers())
                throw std::invalid_argument("kfac curvature has wrong layer count");
            for (int l = 0; l < num_layers(); ++l)
                if (kron[l].q_cov.rows() != layer_shapes[l].first ||
                    kron[l].g_cov.rows() != layer_shapes[l].second)
                    throw std::invalid_argument("kfac factors for layer " + std::to_string(l) +
                                                " have wrong shape");
            break;
        case CurvatureKind::ekfac:
            if (static_cast<int>(ekfac.size()) != num_layers())
                throw std::invalid_argument("ekfac curvature has wrong layer count");
            for (int l = 0; l < num_layers(); ++l)
                if (ekfac[l].scales.size() != layer_param_count(l))
                    throw std::invalid_argument("ekfac scales for layer " + std::to_string(l) +
                                                " have wrong length");
            break;
    }
}

Eigen::MatrixXd CurvatureEstimate::dense(int cap) const {
    check_cap(param_count, cap, "dense curvature");
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(param_count, param_count);
    const auto lo = layer_offsets(layer_shapes);
    switch (kind) {
        case CurvatureKind::full:
            out = full;
            break;
        case CurvatureKind::diag:
            out = diagonal.asDiagonal();
            break;
        case CurvatureKind::block_diag:
            for (int l = 0; l < num_layers(); ++l)
                out.block(lo.offset[l], lo.offset[l], lo.size[l], lo.size[l]) = blocks[l];
            break;
        case CurvatureKind::kfac:
            for (int l = 0; l < num_layers(); ++l)
                out.block(lo.offset[l], lo.offset[l], lo.size[l], lo.size[l]) =
                    kron_block_to_dense(kron[l].q_cov, kron[l].g_cov, dataset_size);
            break;
        case CurvatureKind::ekfac:
            for (int l = 0; l < num_layers(); ++l) {
                const Eigen::MatrixXd u = kron_product(ekfac[l].u_q, ekfac[l].u_g);
                out.block(lo.offset[l], lo.offset[l], lo.size[l], lo.size[l]) =
                    u * ekfac[l].scales.asDiagonal() * u.transpose();
            }
            break;
    }
    return out;
}

namespace {

CurvatureEstimate make_estimate(CurvatureKind kind, const MlpArchitecture& arch,
                                const Dataset& data) {
    CurvatureEstimate est;
    est.kind = kind;
    est.param_count = arch.param_count();
    est.dataset_size = data.size();
    est.layer_shapes = arch.layer_shapes();
    return est;
}

CurvatureEstimate build_from_tape(CurvatureKind kind, const MlpArchitecture& arch,
                                  const Dataset& data, const PerSampleTape& tape,
                                  const FisherOptions& options) {
    CurvatureEstimate est = make_estimate(kind, arch, data);
    const int N = data.size();
    const int L = est.num_layers();
    const auto lo = layer_offsets(est.layer_shapes);

    switch (kind) {
        case CurvatureKind::full: {
            check_cap(est.param_count, options.full_cap, "full curvature");
            est.full = Eigen::MatrixXd::Zero(est.param_count, est.param_count);
            for (int n = 0; n < N; ++n)
                est.full.selfadjointView<Eigen::Lower>().rankUpdate(tape.grad_flat[n]);
            est.full = est.full.selfadjointView<Eigen::Lower>();
            break;
        }
        case CurvatureKind::diag: {
            est.diagonal = Eigen::VectorXd::Zero(est.param_count);
            for (int n = 0; n < N; ++n)
                est.diagonal += tape.grad_flat[n].cwiseAbs2();
            break;
        }
        case CurvatureKind::block_diag: {
            est.blocks.resize(L);
            for (int l = 0; l < L; ++l)
                est.blocks[l] = Eigen::MatrixXd::Zero(lo.size[l], lo.size[l]);
            for (int n = 0; n < N; ++n)
                for (int l = 0; l < L; ++l) {
                    const auto seg = tape.grad_flat[n].segment(lo.offset[l], lo.size[l]);
                    est.blocks[l].selfadjointView<Eigen::Lower>().rankUpdate(seg);
                }
            for (int l = 0; l < L; ++l)
                est.blocks[l] = est.blocks[l].selfadjointView<Eigen::Lower>();
            break;
        }
        case CurvatureKind::kfac: {
            est.kron.resize(L);
            for (int l = 0; l < L; ++l) {
                const int rows = est.layer_shapes[l].first;
                const int cols = est.layer_shapes[l].second;
                est.kron[l].q_cov = Eigen::MatrixXd::Zero(rows, rows);
                est.kron[l].g_cov = Eigen::MatrixXd::Zero(cols, cols);
            }
            for (int n = 0; n < N; ++n)
                for (int l = 0; l < L; ++l) {
                    est.kron[l].q_cov.selfadjointView<Eigen::Lower>().rankUpdate(tape.q[n][l]);
                    est.kron[l].g_cov.selfadjointView<Eigen::Lower>().rankUpdate(tape.g[n][l]);
                }
            for (int l = 0; l < L; ++l) {
                est.kron[l].q_cov =
                    Eigen::MatrixXd(est.kron[l].q_cov.selfadjointView<Eigen::Lower>()) / N;
                est.kron[l].g_cov =
                    Eigen::MatrixXd(est.kron[l].g_cov.selfadjointView<Eigen::Lower>()) / N;
            }
            break;
        }
        case CurvatureKind::ekfac: {
            const CurvatureEstimate kfac =
                build_from_tape(CurvatureKind::kfac, arch, data, tape, options);
            return ekfac_from_kfac(kfac, tape);
        }
    }
    return est;
}

} // namespace

CurvatureEstimate ekfac_from_kfac(const CurvatureEstimate& kfac_estimate,
                                  const PerSampleTape& tape) {
    if (kfac_estimate.kind != CurvatureKind::kfac)
        throw std::invalid_argument("ekfac_from_kfac expects a kfac estimate");
    kfac_estimate.validate();
    CurvatureEstimate est = kfac_estimate;
    est.kind = CurvatureKind::ekfac;
    est.kron.clear();

    const int L = est.num_layers();
    const int N = static_cast<int>(tape.size());
    est.ekfac.resize(L);
    for (int l = 0; l < L; ++l) {
        const auto& factors = kfac_estimate.kron[l];
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eq(factors.q_cov);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eg(factors.g_cov);
        if (eq.info() != Eigen::Success || eg.info() != Eigen::Success)
            throw std::runtime_error("eigendecomposition failed for layer " + std::to_string(l));
        KronEigenbasis basis;
        basis.u_q = eq.eigenvectors();
        basis.u_g = eg.eigenvectors();
        basis.s_q = clamped_eigenvalues(eq.eigenvalues());
        basis.s_g = clamped_eigenvalues(eg.eigenvalues());

        const int rows = est.layer_shapes[l].first;
        const int cols = est.layer_shapes[l].second;
        basis.scales = Eigen::VectorXd::Zero(rows * cols);
        for (int n = 0; n < N; ++n) {
            const Eigen::VectorXd wq = basis.u_q.transpose() * tape.q[n][l];
            const Eigen::VectorXd wg = basis.u_g.transpose() * tape.g[n][l];
            for (int i = 0; i < rows; ++i) {
                const double wq2 = wq[i] * wq[i];
                for (int j = 0; j < cols; ++j)
                    basis.scales[i * cols + j] += wq2 * wg[j] * wg[j];
            }
        }
        est.ekfac[l] = std::move(basis);
    }
    return est;
}

CurvatureEstimate estimate_fisher(CurvatureKind kind, const MlpArchitecture& arch,
                                  const Parameters& theta, const Dataset& data,
                                  const FisherOptions& options) {
    arch.validate();
    data.validate_for(arch);
    const PerSampleTape tape = per_sample_backprop(arch, theta, data);
    return build_from_tape(kind, arch, data, tape, options);
}

std::vector<CurvatureEstimate> estimate_all_fishers(const MlpArchitecture& arch,
                                                    const Parameters& theta, const Dataset& data,
                                                    const std::vector<CurvatureKind>& kinds,
                                                    const FisherOptions& options) {
    arch.validate();
    data.validate_for(arch);
    const PerSampleTape tape = per_sample_backprop(arch, theta, data);
    std::vector<CurvatureEstimate> out;
    out.reserve(kinds.size());
    for (CurvatureKind kind : kinds)
        out.push_back(build_from_tape(kind, arch, data, tape, options));
    return out;
}

double prior_precision_from_std(double prior_std) {
    if (!(prior_std > 0)) throw std::invalid_argument("prior std must be positive");
    if (std::isinf(prior_std)) return 0.0;
    return 1.0 / (prior_std * prior_std);
}

TemperedHessian temper(const CurvatureEstimate& estimate, double temperature,
                       double prior_precision) {
    if (!(temperature > 0)) throw std::invalid_argument("temperature must be positive");
    if (!(prior_precision >= 0)) throw std::invalid_argument("prior precision must be nonnegative");
    estimate.validate();

    TemperedHessian h;
    h.kind = estimate.kind;
    h.temperature = temperature;
    h.prior_precision = prior_precision;
    h.param_count = estimate.param_count;
    h.layer_shapes = estimate.layer_shapes;

    const double T = temperature;
    const double tau = prior_precision;
    double min_eig = std::numeric_limits<double>::infinity();
    double max_eig = -std::numeric_limits<double>::infinity();
    const auto track = [&](double lo, double hi) {
        min_eig = std::min(min_eig, lo);
        max_eig = std::max(max_eig, hi);
    };

    switch (estimate.kind) {
        case CurvatureKind::full: {
            h.full = T * estimate.full;
            h.full.diagonal().array() += tau;
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h.full, Eigen::EigenvaluesOnly);
            track(es.eigenvalues().minCoeff(), es.eigenvalues().maxCoeff());
            break;
        }
        case CurvatureKind::diag: {
            h.diagonal = (T * estimate.diagonal).array() + tau;
            track(h.diagonal.minCoeff(), h.diagonal.maxCoeff());
            break;
        }
        case CurvatureKind::block_diag: {
            h.blocks.resize(estimate.num_layers());
            for (int l = 0; l < estimate.num_layers(); ++l) {
                h.blocks[l] = T * estimate.blocks[l];
                h.blocks[l].diagonal().array() += tau;
                Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h.blocks[l],
                                                                  Eigen::EigenvaluesOnly);
                track(es.eigenvalues().minCoeff(), es.eigenvalues().maxCoeff());
            }
            break;
        }
        case CurvatureKind::kfac: {
            h.kron.resize(estimate.num_layers());
            for (int l = 0; l < estimate.num_layers(); ++l) {
                const auto& factors = estimate.kron[l];
                Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eq(factors.q_cov);
                Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eg(factors.g_cov);
                if (eq.info() != Eigen::Success || eg.info() != Eigen::Success)
                    throw std::runtime_error("eigendecomposition failed for layer " +
                                             std::to_string(l));
                KronEigenbasis basis;
                basis.u_q = eq.eigenvectors();
                basis.u_g = eg.eigenvectors();
                basis.s_q = clamped_eigenvalues(eq.eigenvalues());
                basis.s_g = clamped_eigenvalues(eg.eigenvalues());
                const int cols = estimate.layer_shapes[l].second;
                basis.scales = Eigen::VectorXd::Zero(estimate.layer_param_count(l));
                for (int i = 0; i < basis.s_q.size(); ++i)
                    for (int j = 0; j < cols; ++j)
                        basis.scales[i * cols + j] =
                            T * estimate.dataset_size * basis.s_q[i] * basis.s_g[j] + tau;
                track(basis.scales.minCoeff(), basis.scales.maxCoeff());
                h.kron[l] = std::move(basis);
            }
            break;
        }
        case CurvatureKind::ekfac: {
            h.kron.resize(estimate.num_layers());
            for (int l = 0; l < estimate.num_layers(); ++l) {
                KronEigenbasis basis = estimate.ekfac[l];
                basis.scales = (T * basis.scales).array() + tau;
                track(basis.scales.minCoeff(), basis.scales.maxCoeff());
                h.kron[l] = std::move(basis);
            }
            break;
        }
    }

    if (min_eig < kEigenFloor) {
        h.jitter = kEigenFloor * (1.0 + std::max(max_eig, 0.0));
        switch (h.kind) {
            case CurvatureKind::full:
                h.full.diagonal().array() += h.jitter;
                break;
            case CurvatureKind::diag:
                h.diagonal.array() += h.jitter;
                break;
            case CurvatureKind::block_diag:
                for (auto& b : h.blocks) b.diagonal().array() += h.jitter;
                break;
            case CurvatureKind::kfac:
            case CurvatureKind::ekfac:
                for (auto& k : h.kron) k.scales.array() += h.jitter;
                break;
        }
    }
    return h;
}

namespace {

// Reshape a layer slice to its (rows x cols) weight-matrix view in the
// p = i * cols + j flattening.
Eigen::MatrixXd to_matrix(const Eigen::VectorXd& flat, int rows, int cols) {
    Eigen::MatrixXd m(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) m(i, j) = flat[i * cols + j];
    return m;
}

Eigen::VectorXd to_flat(const Eigen::MatrixXd& m) {
    Eigen::VectorXd v(m.size());
    for (int i = 0; i < m.rows(); ++i)
        for (int j = 0; j < m.cols(); ++j) v[i * m.cols() + j] = m(i, j);
    return v;
}

} // namespace

double TemperedHessian::log_det() const {
    switch (kind) {
        case CurvatureKind::full: {
            Eigen::LLT<Eigen::MatrixXd> llt(full);
            if (llt.info() != Eigen::Success)
                throw std::runtime_error("tempered precision is not positive-definite");
            return 2.0 * Eigen::MatrixXd(llt.matrixL()).diagonal().array().log().sum();
        }
        case CurvatureKind::diag:
            return diagonal.array().log().sum();
        case CurvatureKind::block_diag: {
            double sum = 0.0;
            for (const auto& b : blocks) {
                Eigen::LLT<Eigen::MatrixXd> llt(b);
                if (llt.info() != Eigen::Success)
                    throw std::runtime_error("tempered block is not positive-definite");
                sum += 2.0 * Eigen::MatrixXd(llt.matrixL()).diagonal().array().log().sum();
            }
            return sum;
        }
        case CurvatureKind::kfac:
        case CurvatureKind::ekfac: {
            double sum = 0.0;
            for (const auto& k : kron) sum += k.scales.array().log().sum();
            return sum;
        }
    }
    throw std::invalid_argument("invalid curvature kind");
}

double TemperedHessian::quadratic_form(const Eigen::VectorXd& v) const {
    if (v.size() != param_count)
        throw std::invalid_argument("quadratic_form: vector length mismatch");
    switch (kind) {
        case CurvatureKind::full:
            return v.dot(full.selfadjointView<Eigen::Lower>() * v);
        case CurvatureKind::diag:
            return diagonal.dot(v.cwiseAbs2());
        case CurvatureKind::block_diag: {
            const auto lo = layer_offsets(layer_shapes);
            double sum = 0.0;
            for (int l = 0; l < num_layers(); ++l) {
                const auto seg = v.segment(lo.offset[l], lo.size[l]);
                sum += seg.dot(blocks[l] * seg);
            }
            return sum;
        }
        case CurvatureKind::kfac:
        case CurvatureKind::ekfac: {
            const auto lo = layer_offsets(layer_shapes);
            double sum = 0.0;
            for (int l = 0; l < num_layers(); ++l) {
                const auto [rows, cols] = layer_shapes[l];
                const Eigen::MatrixXd vm =
                    to_matrix(v.segment(lo.offset[l], lo.size[l]), rows, cols);
                const Eigen::MatrixXd w = kron[l].u_q.transpose() * vm * kron[l].u_g;
                sum += kron[l].scales.dot(to_flat(w).cwiseAbs2());
            }
            return sum;
        }
    }
    throw std::invalid_argument("invalid curvature kind");
}

Eigen::VectorXd TemperedHessian::solve(const Eigen::VectorXd& v) const {
    if (v.size() != param_count)
        throw std::invalid_argument("solve: vector length mismatch");
    switch (kind) {
        case CurvatureKind::full: {
            Eigen::LLT<Eigen::MatrixXd> llt(full);
            if (llt.info() != Eigen::Success)
                throw std::runtime_error("tempered precision is not positive-definite");
            return llt.solve(v);
        }
        case CurvatureKind::diag:
            return v.cwiseQuotient(diagonal);
        case CurvatureKind::block_diag: {
            const auto lo = layer_offsets(layer_shapes);
            Eigen::VectorXd out(param_count);
            for (int l = 0; l < num_layers(); ++l) {
                Eigen::LLT<Eigen::MatrixXd> llt(blocks[l]);
                if (llt.info() != Eigen::Success)
                    throw std::runtime_error("tempered block is not positive-definite");
                out.segment(lo.offset[l], lo.size[l]) =
                    llt.solve(v.segment(lo.offset[l], lo.size[l]));
            }
            return out;
        }
        case CurvatureKind::kfac:
        case CurvatureKind::ekfac: {
            const auto lo = layer_offsets(layer_shapes);
            Eigen::VectorXd out(param_count);
            for (int l = 0; l < num_layers(); ++l) {
                const auto [rows, cols] = layer_shapes[l];
                const Eigen::MatrixXd vm =
                    to_matrix(v.segment(lo.offset[l], lo.size[l]), rows, cols);
                Eigen::MatrixXd w = kron[l].u_q.transpose() * vm * kron[l].u_g;
                for (int i = 0; i < rows; ++i)
                    for (int j = 0; j < cols; ++j) w(i, j) /= kron[l].scales[i * cols + j];
                out.segment(lo.offset[l], lo.size[l]) =
                    to_flat(kron[l].u_q * w * kron[l].u_g.transpose());
            }
            return out;
        }
    }
    throw std::invalid_argument("invalid curvature kind");
}

Eigen::MatrixXd TemperedHessian::dense(int cap) const {
    check_cap(param_count, cap, "dense tempered precision");
    const auto lo = layer_offsets(layer_shapes);
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(param_count, param_count);
    switch (kind) {
        case CurvatureKind::full:
            out = full;
            break;
        case CurvatureKind::diag:
            out = diagonal.asDiagonal();
            break;
        case CurvatureKind::block_diag:
            for (int l = 0; l < num_layers(); ++l)
                out.block(lo.offset[l], lo.offset[l], lo.size[l], lo.size[l]) = blocks[l];
            break;
        case CurvatureKind::kfac:
        case CurvatureKind::ekfac:
            for (int l = 0; l < num_layers(); ++l) {
                const Eigen::MatrixXd u = kron_product(kron[l].u_q, kron[l].u_g);
                out.block(lo.offset[l], lo.offset[l], lo.size[l], lo.size[l]) =
                    u * kron[l].scales.asDiagonal() * u.transpose();
            }
            break;
    }
    return out;
}

Eigen::MatrixXd TemperedHessian::dense_covariance(int cap) const {
    check_cap(param_count, cap, "dense covariance");
    const auto lo = layer_offsets(layer_shapes);
    Eigen::MatrixXd out = Eigen::MatrixXd::Zero(param_count, param_count);
    switch (kind) {
        case CurvatureKind::full: {
            Eigen::LLT<Eigen::MatrixXd> llt(full);
            if (llt.info() != Eigen::Success)
                throw std::runtime_error("tempered precision is not positive-definite");
            out = llt.solve(Eigen::MatrixXd::Identity(param_count, param_count));
            break;
        }
        case CurvatureKind::diag:
            out = diagonal.cwiseInverse().asDiagonal();
            break;
        case CurvatureKind::block_diag:
            for (int l = 0; l < num_layers(); ++l) {
                Eigen::LLT<Eigen::MatrixXd> llt(blocks[l]);
                if (llt.info() != Eigen::Success)
                    throw std::runtime_error("tempered block is not positive-definite");
                out.block(lo.offset[l], lo.offset[l], lo.size[l], lo.size[l]) =
                    llt.solve(Eigen::MatrixXd::Identity(lo.size[l], lo.size[l]));
            }
            break;
        case CurvatureKind::kfac:
        case CurvatureKind::ekfac:
            for (int l = 0; l < num_layers(); ++l) {
                const Eigen::MatrixXd u = kron_product(kron[l].u_q, kron[l].u_g);
                out.block(lo.offset[l], lo.offset[l], lo.size[l], lo.size[l]) =
                    u * kron[l].scales.cwiseInverse().asDiagonal() * u.transpose();
            }
            break;
    }
    return out;
}

double TemperedHessian::trace_covariance() const {
    switch (kind) {
        case CurvatureKind::full: {
            Eigen::LLT<Eigen::MatrixXd> llt(full);
            if (llt.info() != Eigen::Success)
                throw std::runtime_error("tempered precision is not positive-definite");
            const Eigen::MatrixXd linv = llt.matrixL().solve(
                Eigen::MatrixXd::Identity(param_count, param_count));
            return linv.squaredNorm();
        }
        case CurvatureKind::diag:
            return diagonal.cwiseInverse().sum();
        case CurvatureKind::block_diag: {
            double sum = 0.0;
            for (const auto& b : blocks) {
                Eigen::LLT<Eigen::MatrixXd> llt(b);
                if (llt.info() != Eigen::Success)
                    throw std::runtime_error("tempered block is not positive-definite");
                const Eigen::MatrixXd linv = llt.matrixL().solve(
                    Eigen::MatrixXd::Identity(b.rows(), b.cols()));
                sum += linv.squaredNorm();
            }
            return sum;
        }
        case CurvatureKind::kfac:
        case CurvatureKind::ekfac: {
            double sum = 0.0;
            for (const auto& k : kron) sum += k.scales.cwiseInverse().sum();
            return sum;
        }
    }
    throw std::invalid_argument("invalid curvature kind");
}

double frobenius_norm(const CurvatureEstimate& estimate, int layer) {
    estimate.validate();
    const auto lo = layer_offsets(estimate.layer_shapes);
    const auto layer_norm_sq = [&](int l) -> double {
        switch (estimate.kind) {
            case CurvatureKind::full:
                return estimate.full.block(lo.offset[l], lo.offset[l], lo.size[l], lo.size[l])
                    .squaredNorm();
            case CurvatureKind::diag:
                return estimate.diagonal.segment(lo.offset[l], lo.size[l]).squaredNorm();
            case CurvatureKind::block_diag:
                return estimate.blocks[l].squaredNorm();
            case CurvatureKind::kfac: {
                const double n = static_cast<double>(estimate.dataset_size);
                return n * n * estimate.kron[l].q_cov.squaredNorm() *
                       estimate.kron[l].g_cov.squaredNorm();
            }
            case CurvatureKind::ekfac:
                return estimate.ekfac[l].scales.squaredNorm();
        }
        throw std::invalid_argument("invalid curvature kind");
    };
    if (layer >= 0) {
        if (layer >= estimate.num_layers())
            throw std::invalid_argument("frobenius_norm: layer out of range");
        return std::sqrt(layer_norm_sq(layer));
    }
    if (estimate.kind == CurvatureKind::full) return estimate.full.norm();
    double sum = 0.0;
    for (int l = 0; l < estimate.num_layers(); ++l) sum += layer_norm_sq(l);
    return std::sqrt(sum);
}

} // namespace gla
