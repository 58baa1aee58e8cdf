#include "m3d/alignment.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>
#include <random>

namespace m3d {

namespace {

/// Full-batch subgradient descent on the L2-regularized hinge loss.
/// Inputs are standardized first so the fixed step schedule is scale-free.
/// 200 iterations, step 0.1/sqrt(t), L2 strength 1e-3.
Vector train_hinge(const Matrix& x, const Vector& y) {
    const Eigen::Index n = x.rows(), d = x.cols();
    Vector w = Vector::Zero(d + 1);  // last entry = bias
    Matrix xb(n, d + 1);
    xb << x, Vector::Ones(n);
    const double reg = 1e-3;
    for (int t = 1; t <= 200; ++t) {
        Vector margins = (xb * w).cwiseProduct(y);
        Vector grad = reg * w;
        for (Eigen::Index i = 0; i < n; ++i)
            if (margins[i] < 1.0) grad -= y[i] / static_cast<double>(n) * xb.row(i).transpose();
        w -= 0.1 / std::sqrt(static_cast<double>(t)) * grad;
    }
    return w;
}

double misclassification(const Matrix& x, const Vector& y, const Vector& w) {
    Eigen::Index wrong = 0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
        double score = x.row(i).dot(w.head(x.cols())) + w[w.size() - 1];
        if ((score >= 0 ? 1.0 : -1.0) != y[i]) ++wrong;
    }
    return static_cast<double>(wrong) / static_cast<double>(x.rows());
}

}  // namespace

double a_distance(const Matrix& a, const Matrix& b, std::uint64_t seed) {
    if (a.rows() < 2 || b.rows() < 2) {
        std::cerr << "a_distance: fewer than 2 samples on one side, returning 0\n";
        return 0.0;
    }
    if (a.cols() != b.cols()) throw M3dError("a_distance: dimension mismatch");

    // Pooled standardization keeps the fixed subgradient schedule sensible
    // across feature scales.
    Matrix pooled(a.rows() + b.rows(), a.cols());
    pooled << a, b;
    Eigen::RowVectorXd mean = pooled.colwise().mean();
    Eigen::RowVectorXd sd =
        ((pooled.rowwise() - mean).array().square().colwise().mean()).sqrt().matrix();
    for (Eigen::Index j = 0; j < sd.size(); ++j) sd[j] = std::max(sd[j], 1e-12);
    auto standardize = [&](const Matrix& x) -> Matrix {
        return (x.rowwise() - mean).array().rowwise() / sd.array();
    };
    Matrix as = standardize(a), bs = standardize(b);

    std::mt19937_64 rng(seed);
    auto half_split = [&](Eigen::Index n) {
        std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
        std::iota(idx.begin(), idx.end(), 0);
        std::shuffle(idx.begin(), idx.end(), rng);
        std::vector<Eigen::Index> first(idx.begin(), idx.begin() + n / 2);
        std::vector<Eigen::Index> second(idx.begin() + n / 2, idx.end());
        return std::pair{first, second};
    };
    auto [a1, a2] = half_split(as.rows());
    auto [b1, b2] = half_split(bs.rows());

    auto assemble = [&](const std::vector<Eigen::Index>& ia, const std::vector<Eigen::Index>& ib) {
        Matrix x(static_cast<Eigen::Index>(ia.size() + ib.size()), as.cols());
        Vector y(x.rows());
        Eigen::Index r = 0;
        for (auto i : ia) { x.row(r) = as.row(i); y[r++] = -1.0; }
        for (auto i : ib) { x.row(r) = bs.row(i); y[r++] = 1.0; }
        return std::pair{x, y};
    };

    auto [x_train1, y_train1] = assemble(a1, b1);
    auto [x_test1, y_test1] = assemble(a2, b2);
    auto [x_train2, y_train2] = assemble(a2, b2);
    auto [x_test2, y_test2] = assemble(a1, b1);

    double eps = 0.5 * (misclassification(x_test1, y_test1, train_hinge(x_train1, y_train1)) +
                        misclassification(x_test2, y_test2, train_hinge(x_train2, y_train2)));
    return std::clamp(2.0 * (1.0 - 2.0 * eps), 0.0, 2.0);
}

MuEstimate estimate_mu(const Matrix& source_z, const std::vector<int>& source_labels,
                       const Matrix& target_z, const std::vector<int>& target_pseudo,
                       int class_count, std::uint64_t seed) {
    if (source_labels.size() != static_cast<std::size_t>(source_z.rows()) ||
        target_pseudo.size() != static_cast<std::size_t>(target_z.rows()))
        throw M3dError("estimate_mu: label arrays do not match feature rows");
    for (int y : target_pseudo)
        if (y < 0 || y >= class_count)
            throw M3dError("estimate_mu: pseudo label outside [0, C)");

    MuEstimate est;
    est.d_marginal = a_distance(source_z, target_z, splitmix64(seed));
    est.d_conditional.assign(static_cast<std::size_t>(class_count), 0.0);

    auto rows_with = [](const Matrix& z, const std::vector<int>& labels, int c) {
        std::vector<Eigen::Index> rows;
        for (std::size_t i = 0; i < labels.size(); ++i)
            if (labels[i] == c) rows.push_back(static_cast<Eigen::Index>(i));
        Matrix out(static_cast<Eigen::Index>(rows.size()), z.cols());
        for (std::size_t i = 0; i < rows.size(); ++i)
            out.row(static_cast<Eigen::Index>(i)) = z.row(rows[i]);
        return out;
    };

    double sum_dc = 0.0;
    for (int c = 0; c < class_count; ++c) {
        Matrix sc = rows_with(source_z, source_labels, c);
        Matrix tc = rows_with(target_z, target_pseudo, c);
        if (sc.rows() == 0 || tc.rows() == 0) continue;  // skipped class
        double dc = a_distance(sc, tc, splitmix64(seed + 1 + static_cast<std::uint64_t>(c)));
        est.d_conditional[static_cast<std::size_t>(c)] = dc;
        sum_dc += dc;
    }

    double denom = est.d_marginal + sum_dc;
    est.mu = denom > 0.0 ? 1.0 - est.d_marginal / denom : 0.5;
    est.mu = std::clamp(est.mu, 0.0, 1.0);
    return est;
}

Matrix build_m0(int n, int m) {
    if (n < 1 || m < 1) throw M3dError("build_m0: need n, m >= 1");
    const Eigen::Index total = n + m;
    Matrix m0(total, total);
    const double ss = 1.0 / (static_cast<double>(n) * n);
    const double tt = 1.0 / (static_cast<double>(m) * m);
    const double st = -1.0 / (static_cast<double>(n) * m);
    for (Eigen::Index i = 0; i < total; ++i)
        for (Eigen::Index j = 0; j < total; ++j) {
            bool is = i < n, js = j < n;
            m0(i, j) = (is && js) ? ss : (!is && !js) ? tt : st;
        }
    return m0;
}

Matrix build_mc(const std::vector<int>& source_labels, const std::vector<int>& target_pseudo,
                int c) {
    const auto n = static_cast<Eigen::Index>(source_labels.size());
    const auto m = static_cast<Eigen::Index>(target_pseudo.size());
    if (c < 0) throw M3dError("build_mc: negative class index");
    Eigen::Index nc = 0, mc = 0;
    for (int y : source_labels) nc += (y == c);
    for (int y : target_pseudo) mc += (y == c);
    Matrix out = Matrix::Zero(n + m, n + m);
    if (nc == 0 || mc == 0) return out;

    const double ss = 1.0 / (static_cast<double>(nc) * nc);
    const double tt = 1.0 / (static_cast<double>(mc) * mc);
    const double st = -1.0 / (static_cast<double>(mc) * nc);
    auto in_class = [&](Eigen::Index i) {
        return i < n ? source_labels[static_cast<std::size_t>(i)] == c
                     : target_pseudo[static_cast<std::size_t>(i - n)] == c;
    };
    for (Eigen::Index i = 0; i < n + m; ++i) {
        if (!in_class(i)) continue;
        for (Eigen::Index j = 0; j < n + m; ++j) {
            if (!in_class(j)) continue;
            bool is = i < n, js = j < n;
            out(i, j) = (is && js) ? ss : (!is && !js) ? tt : st;
        }
    }
    return out;
}

AlignmentState build_alignment(const Matrix& source_z, const std::vector<int>& source_labels,
                               const Matrix& target_z, const std::vector<int>& target_pseudo,
                               int class_count, std::uint64_t seed, double mu_override) {
    AlignmentState state;
    const int n = static_cast<int>(source_z.rows());
    const int m = static_cast<int>(target_z.rows());
    if (mu_override >= 0.0) {
        if (mu_override > 1.0) throw M3dError("mu override must lie in [0, 1]");
        state.mu = mu_override;
        state.d_conditional.assign(static_cast<std::size_t>(class_count), 0.0);
    } else {
        MuEstimate est =
            estimate_mu(source_z, source_labels, target_z, target_pseudo, class_count, seed);
        state.mu = est.mu;
        state.d_marginal = est.d_marginal;
        state.d_conditional = std::move(est.d_conditional);
    }
    state.m0 = build_m0(n, m);
    state.mc_sum = Matrix::Zero(n + m, n + m);
    for (int c = 0; c < class_count; ++c)
        state.mc_sum += build_mc(source_labels, target_pseudo, c);
    state.m = (1.0 - state.mu) * state.m0 + state.mu * state.mc_sum;
    return state;
}

}  // namespace m3d
