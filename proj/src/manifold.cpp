#include "m3d/manifold.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

#include "m3d/matrix_io.hpp"
#include "m3d/pairwise.hpp"

namespace m3d {

KernelKind kernel_from_string(const std::string& s) {
    if (s == "linear") return KernelKind::linear;
    if (s == "rbf") return KernelKind::rbf;
    throw M3dError("unknown kernel kind: " + s);
}

std::string to_string(KernelKind k) {
    return k == KernelKind::linear ? "linear" : "rbf";
}

Matrix build_kernel(const Matrix& z, const KernelConfig& config, double* sigma_used) {
    if (z.rows() < 1) throw M3dError("kernel needs at least one sample");
    if (config.kind == KernelKind::linear) {
        if (sigma_used) *sigma_used = 0.0;
        return par::gram(z);
    }
    Matrix d2 = par::pairwise_sqdist(z);
    double sigma = config.bandwidth > 0 ? config.bandwidth : median_pairwise_distance(d2);
    if (sigma_used) *sigma_used = sigma;
    return par::rbf_from_sqdist(d2, sigma);
}

Matrix eval_kernel(const Matrix& a, const Matrix& b, KernelKind kind, double sigma) {
    if (kind == KernelKind::linear) return a * b.transpose();
    return par::rbf_from_sqdist(par::pairwise_sqdist(a, b), sigma);
}

namespace {

/// Largest-magnitude entry of each column made positive (first occurrence
/// wins on exact ties).
void fix_signs(Matrix& m) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
        Eigen::Index best = 0;
        for (Eigen::Index r = 1; r < m.rows(); ++r)
            if (std::abs(m(r, c)) > std::abs(m(best, c))) best = r;
        if (m(best, c) < 0) m.col(c) = -m.col(c);
    }
}

/// Full eigenbasis of the covariance of centered rows, eigenvalues
/// descending. Returns the basis and the rank (eigenvalues above tolerance).
std::pair<Matrix, int> covariance_eigenbasis(const Matrix& rows) {
    Eigen::RowVectorXd mean = rows.colwise().mean();
    Matrix centered = rows.rowwise() - mean;
    Matrix cov = centered.transpose() * centered / std::max<double>(1.0, double(rows.rows() - 1));
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (cov + cov.transpose()));
    if (es.info() != Eigen::Success) throw M3dError("pca eigendecomposition failed");
    const Eigen::Index d = cov.rows();
    Matrix basis(d, d);
    Vector evals(d);
    for (Eigen::Index k = 0; k < d; ++k) {  // ascending -> descending
        basis.col(k) = es.eigenvectors().col(d - 1 - k);
        evals[k] = es.eigenvalues()[d - 1 - k];
    }
    fix_signs(basis);
    double tol = std::max(evals[0], 0.0) * 1e-12 + 1e-300;
    int rank = 0;
    while (rank < d && evals[rank] > tol) ++rank;
    return {basis, rank};
}

}  // namespace

Matrix TcaModel::transform(const Matrix& x) const {
    if (x.cols() != training_features.cols())
        throw M3dError("tca transform: feature dimension mismatch");
    Matrix kx = eval_kernel(x, training_features, kernel_kind, bandwidth);
    return kx * projection;
}

TcaModel fit_tca(const Matrix& source_x, const Matrix& target_x, int d_tca,
                 const KernelConfig& kernel, double regularizer) {
    const Eigen::Index n = source_x.rows(), m = target_x.rows();
    if (n < 1 || m < 1) throw M3dError("fit_tca: empty domain");
    if (source_x.cols() != target_x.cols()) throw M3dError("fit_tca: dimension mismatch");
    if (regularizer <= 0) throw M3dError("fit_tca: regularizer must be > 0");
    const Eigen::Index total = n + m;
    const Eigen::Index dim = source_x.cols();
    if (d_tca < 1 || d_tca > std::min(total, dim))
        throw M3dError("fit_tca: d_tca must satisfy 1 <= d_tca <= min(n+m, D); got " +
                       std::to_string(d_tca));

    Matrix x(total, dim);
    x << source_x, target_x;

    TcaModel model;
    model.kernel_kind = kernel.kind;
    model.d_tca = d_tca;
    model.training_features = x;

    // The MMD coefficient matrix is the rank-1 outer product of this vector.
    Vector u0(total);
    u0.head(n).setConstant(1.0 / static_cast<double>(n));
    u0.tail(m).setConstant(-1.0 / static_cast<double>(m));

    if (kernel.kind == KernelKind::linear) {
        // K = X X^T, so every eigenvector with a nonzero eigenvalue lies in
        // range(X). Solve the pencil restricted to that subspace: exact and
        // O(N D^2) instead of O(N^3).
        model.bandwidth = 0.0;
        Eigen::ColPivHouseholderQR<Matrix> qr(x);
        const auto rank = static_cast<Eigen::Index>(qr.rank());
        if (d_tca > rank)
            throw M3dError("fit_tca: d_tca = " + std::to_string(d_tca) +
                           " exceeds the pooled data rank " + std::to_string(rank) +
                           "; lower d_tca");
        Matrix thin_q = qr.householderQ() * Matrix::Identity(total, rank);
        Matrix kq = x * (thin_q.transpose() * x).transpose();  // K Q, N x r
        Vector colsum = kq.colwise().sum();                    // (K Q)^T 1
        Matrix a = kq.transpose() * kq -
                   colsum * colsum.transpose() / static_cast<double>(total);
        Vector ku0 = kq.transpose() * u0;
        Matrix b = ku0 * ku0.transpose();
        b.diagonal().array() += regularizer;
        a = 0.5 * (a + a.transpose());

        Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> es(a, b);
        if (es.info() != Eigen::Success)
            throw M3dError("fit_tca: generalized eigensolver failed");
        Matrix top(rank, d_tca);
        for (int c = 0; c < d_tca; ++c)  // eigenvalues ascend; take the top
            top.col(c) = es.eigenvectors().col(rank - 1 - c);
        model.projection = thin_q * top;
    } else {
        Matrix k = build_kernel(x, kernel, &model.bandwidth);
        Vector k1 = k.rowwise().sum();
        Matrix a = k * k;
        a.noalias() -= k1 * (k1.transpose() / static_cast<double>(total));
        Vector ku0 = k * u0;
        Matrix b = ku0 * ku0.transpose();
        b.diagonal().array() += regularizer;
        a = 0.5 * (a + a.transpose());

        Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> es(a, b);
        if (es.info() != Eigen::Success)
            throw M3dError("fit_tca: generalized eigensolver failed");
        model.projection.resize(total, d_tca);
        for (int c = 0; c < d_tca; ++c)
            model.projection.col(c) = es.eigenvectors().col(total - 1 - c);
        fix_signs(model.projection);
        model.embedded = k * model.projection;
        return model;
    }
    fix_signs(model.projection);
    model.embedded = x * (x.transpose() * model.projection);  // K W for K = X X^T
    return model;
}

TcaModel fit_tca(const DomainPair& pair, int d_tca, const KernelConfig& kernel,
                 double regularizer) {
    return fit_tca(pair.source.features, pair.target.features, d_tca, kernel, regularizer);
}

GeodesicKernel gfk_from_bases(const Matrix& source_basis, const Matrix& complement,
                              const Matrix& target_basis) {
    const Eigen::Index d = source_basis.rows();
    const auto q_eff = static_cast<int>(source_basis.cols());
    if (target_basis.rows() != d || complement.rows() != d ||
        target_basis.cols() != q_eff || complement.cols() != d - q_eff)
        throw M3dError("gfk_from_bases: inconsistent basis shapes");

    GeodesicKernel gk;
    gk.q = q_eff;
    gk.source_basis = source_basis;
    gk.complement = complement;
    gk.target_basis = target_basis;

    // Paired SVDs sharing the right factor: Ps^T Pt = U1 G V^T and
    // Rs^T Pt = -U2 S V^T, with diag(G) = cos(theta), diag(S) = sin(theta).
    Eigen::JacobiSVD<Matrix> svd(gk.source_basis.transpose() * gk.target_basis,
                                 Eigen::ComputeFullU | Eigen::ComputeFullV);
    Matrix u1 = svd.matrixU();
    Matrix v = svd.matrixV();
    gk.principal_angles.resize(q_eff);
    for (int k = 0; k < q_eff; ++k) {
        double c = std::clamp(svd.singularValues()[k], 0.0, 1.0);
        gk.principal_angles[k] = std::acos(c);
    }

    Matrix b = gk.complement.transpose() * gk.target_basis * v;  // (d-q) x q
    Matrix u2 = Matrix::Zero(d - q_eff, q_eff);
    for (int k = 0; k < q_eff; ++k) {
        double s = std::sin(gk.principal_angles[k]);
        if (s > 1e-12) u2.col(k) = -b.col(k) / s;
        // theta ~ 0: the column is annihilated by lambda2 = lambda3 = 0
    }

    Vector l1(q_eff), l2(q_eff), l3(q_eff);
    for (int k = 0; k < q_eff; ++k) {
        double t = gk.principal_angles[k];
        if (t < 1e-8) {
            l1[k] = 2.0;
            l2[k] = 0.0;
            l3[k] = 0.0;
        } else {
            l1[k] = 1.0 + std::sin(2.0 * t) / (2.0 * t);
            l2[k] = (std::cos(2.0 * t) - 1.0) / (2.0 * t);
            l3[k] = 1.0 - std::sin(2.0 * t) / (2.0 * t);
        }
    }

    Matrix psu1 = gk.source_basis * u1;  // d x q
    Matrix rsu2 = gk.complement * u2;    // d x q
    gk.g = psu1 * l1.asDiagonal() * psu1.transpose() +
           psu1 * l2.asDiagonal() * rsu2.transpose() +
           rsu2 * l2.asDiagonal() * psu1.transpose() +
           rsu2 * l3.asDiagonal() * rsu2.transpose();
    gk.g = 0.5 * (gk.g + gk.g.transpose());

    Eigen::SelfAdjointEigenSolver<Matrix> es(gk.g);
    if (es.info() != Eigen::Success) throw M3dError("gfk: eigendecomposition of G failed");
    Vector clamped = es.eigenvalues().cwiseMax(0.0);
    gk.g_sqrt = es.eigenvectors() * clamped.cwiseSqrt().asDiagonal() * es.eigenvectors().transpose();
    gk.g_sqrt = 0.5 * (gk.g_sqrt + gk.g_sqrt.transpose());
    return gk;
}

GeodesicKernel fit_gfk(const Matrix& source_reduced, const Matrix& target_reduced, int q) {
    if (source_reduced.cols() != target_reduced.cols())
        throw M3dError("fit_gfk: reduced dimensions differ");
    const Eigen::Index d = source_reduced.cols();
    if (q < 1 || q > d / 2)
        throw M3dError("fit_gfk: subspace dimension q must satisfy 1 <= q <= d/2 (d = " +
                       std::to_string(d) + ", q = " + std::to_string(q) + ")");

    auto [src_basis, src_rank] = covariance_eigenbasis(source_reduced);
    auto [tgt_basis, tgt_rank] = covariance_eigenbasis(target_reduced);
    int q_eff = std::min({q, src_rank, tgt_rank});
    if (q_eff < 1) throw M3dError("fit_gfk: a domain has rank-0 covariance");
    if (q_eff < q)
        std::cerr << "fit_gfk: reducing q from " << q << " to covariance rank " << q_eff
                  << "\n";

    return gfk_from_bases(src_basis.leftCols(q_eff), src_basis.rightCols(d - q_eff),
                          tgt_basis.leftCols(q_eff));
}

PcaModel fit_pca(const Matrix& x, int d) {
    if (d < 1 || d > x.cols()) throw M3dError("fit_pca: bad target dimension");
    auto [basis, rank] = covariance_eigenbasis(x);
    (void)rank;
    PcaModel model;
    model.mean = x.colwise().mean();
    model.components = basis.leftCols(d);
    return model;
}

void save_manifold_model(const ManifoldModel& model, const std::string& path,
                         const std::string& config_echo) {
    io::NamedMatrices data;
    data.kind = "manifold";
    data.echo = config_echo;
    Matrix scalars(1, 4);
    scalars << static_cast<double>(model.tca.kernel_kind == KernelKind::rbf ? 1 : 0),
        model.tca.bandwidth, static_cast<double>(model.tca.d_tca),
        static_cast<double>(model.gfk.q);
    data.entries = {
        {"scalars", scalars},
        {"tca.projection", model.tca.projection},
        {"tca.training_features", model.tca.training_features},
        {"tca.embedded", model.tca.embedded},
        {"gfk.source_basis", model.gfk.source_basis},
        {"gfk.target_basis", model.gfk.target_basis},
        {"gfk.complement", model.gfk.complement},
        {"gfk.theta", model.gfk.principal_angles},
        {"gfk.g", model.gfk.g},
        // g_sqrt is recomputable but stored for bit-exact round trips
        {"gfk.g_sqrt", model.gfk.g_sqrt},
    };
    io::save_named_matrices(data, path);
}

ManifoldModel load_manifold_model(const std::string& path, std::string* config_echo) {
    io::NamedMatrices data = io::load_named_matrices(path, "manifold");
    if (config_echo) *config_echo = data.echo;
    ManifoldModel model;
    const Matrix& scalars = data.get("scalars");
    if (scalars.size() != 4) throw M3dError("model file missing scalar block: " + path);
    model.tca.kernel_kind = scalars(0, 0) != 0 ? KernelKind::rbf : KernelKind::linear;
    model.tca.bandwidth = scalars(0, 1);
    model.tca.d_tca = static_cast<int>(scalars(0, 2));
    model.gfk.q = static_cast<int>(scalars(0, 3));
    model.tca.projection = data.get("tca.projection");
    model.tca.training_features = data.get("tca.training_features");
    model.tca.embedded = data.get("tca.embedded");
    model.gfk.source_basis = data.get("gfk.source_basis");
    model.gfk.target_basis = data.get("gfk.target_basis");
    model.gfk.complement = data.get("gfk.complement");
    model.gfk.principal_angles = data.get("gfk.theta").col(0);
    model.gfk.g = data.get("gfk.g");
    model.gfk.g_sqrt = data.get("gfk.g_sqrt");
    return model;
}

}  // namespace m3d
