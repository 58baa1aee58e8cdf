#include "m3d/pairwise.hpp"

#include <algorithm>
#include <cmath>

namespace m3d {

namespace {

// Per-entry computations; both backends call exactly these.

inline double sqdist_entry(const Matrix& xt, Eigen::Index i, Eigen::Index j) {
    return (xt.col(i) - xt.col(j)).squaredNorm();
}

inline double dot_entry(const Matrix& xt, Eigen::Index i, Eigen::Index j) {
    return xt.col(i).dot(xt.col(j));
}

inline double cosine_entry(const Matrix& xt, const Vector& norms, Eigen::Index i,
                           Eigen::Index j) {
    if (norms[i] == 0.0 || norms[j] == 0.0) return 0.0;
    return xt.col(i).dot(xt.col(j)) / (norms[i] * norms[j]);
}

inline void knn_column(const Matrix& sqdist, int p, Eigen::Index j, Eigen::MatrixXi& out) {
    const Eigen::Index n = sqdist.rows();
    std::vector<int> idx;
    idx.reserve(static_cast<std::size_t>(n) - 1);
    for (Eigen::Index i = 0; i < n; ++i)
        if (i != j) idx.push_back(static_cast<int>(i));
    std::partial_sort(idx.begin(), idx.begin() + p, idx.end(), [&](int a, int b) {
        double da = sqdist(a, j), db = sqdist(b, j);
        if (da != db) return da < db;
        return a < b;
    });
    for (int k = 0; k < p; ++k) out(k, j) = idx[static_cast<std::size_t>(k)];
}

template <bool Parallel>
Matrix sqdist_impl(const Matrix& x) {
    const Eigen::Index n = x.rows();
    Matrix xt = x.transpose();
    Matrix out(n, n);
#pragma omp parallel for schedule(static) if (Parallel)
    for (Eigen::Index i = 0; i < n; ++i) {
        out(i, i) = 0.0;
        for (Eigen::Index j = i + 1; j < n; ++j) {
            double v = sqdist_entry(xt, i, j);
            out(i, j) = v;
            out(j, i) = v;
        }
    }
    return out;
}

template <bool Parallel>
Matrix sqdist_cross_impl(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols()) throw M3dError("pairwise_sqdist: dimension mismatch");
    Matrix at = a.transpose(), bt = b.transpose();
    Matrix out(a.rows(), b.rows());
#pragma omp parallel for schedule(static) if (Parallel)
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < b.rows(); ++j)
            out(i, j) = (at.col(i) - bt.col(j)).squaredNorm();
    return out;
}

template <bool Parallel>
Matrix gram_impl(const Matrix& x) {
    const Eigen::Index n = x.rows();
    Matrix xt = x.transpose();
    Matrix out(n, n);
#pragma omp parallel for schedule(static) if (Parallel)
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i; j < n; ++j) {
            double v = dot_entry(xt, i, j);
            out(i, j) = v;
            out(j, i) = v;
        }
    return out;
}

template <bool Parallel>
Matrix rbf_impl(const Matrix& sqdist, double sigma) {
    if (sigma <= 0) throw M3dError("rbf bandwidth must be > 0");
    const double inv = 1.0 / (2.0 * sigma * sigma);
    Matrix out(sqdist.rows(), sqdist.cols());
#pragma omp parallel for schedule(static) if (Parallel)
    for (Eigen::Index i = 0; i < sqdist.rows(); ++i)
        for (Eigen::Index j = 0; j < sqdist.cols(); ++j)
            out(i, j) = std::exp(-sqdist(i, j) * inv);
    return out;
}

template <bool Parallel>
Matrix cosine_impl(const Matrix& x) {
    const Eigen::Index n = x.rows();
    Matrix xt = x.transpose();
    Vector norms(n);
    for (Eigen::Index i = 0; i < n; ++i) norms[i] = xt.col(i).norm();
    Matrix out(n, n);
#pragma omp parallel for schedule(static) if (Parallel)
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i; j < n; ++j) {
            double v = cosine_entry(xt, norms, i, j);
            out(i, j) = v;
            out(j, i) = v;
        }
    return out;
}

template <bool Parallel>
Eigen::MatrixXi knn_impl(const Matrix& sqdist, int p) {
    const Eigen::Index n = sqdist.rows();
    if (p < 1 || p >= n) throw M3dError("neighbor count p must satisfy 1 <= p < n");
    Eigen::MatrixXi out(p, n);
#pragma omp parallel for schedule(static) if (Parallel)
    for (Eigen::Index j = 0; j < n; ++j) knn_column(sqdist, p, j, out);
    return out;
}

}  // namespace

namespace serial {
Matrix pairwise_sqdist(const Matrix& x) { return sqdist_impl<false>(x); }
Matrix pairwise_sqdist(const Matrix& a, const Matrix& b) { return sqdist_cross_impl<false>(a, b); }
Matrix gram(const Matrix& x) { return gram_impl<false>(x); }
Matrix rbf_from_sqdist(const Matrix& d, double s) { return rbf_impl<false>(d, s); }
Matrix cosine_similarity(const Matrix& x) { return cosine_impl<false>(x); }
Eigen::MatrixXi knn_from_sqdist(const Matrix& d, int p) { return knn_impl<false>(d, p); }
}  // namespace serial

namespace par {
Matrix pairwise_sqdist(const Matrix& x) { return sqdist_impl<true>(x); }
Matrix pairwise_sqdist(const Matrix& a, const Matrix& b) { return sqdist_cross_impl<true>(a, b); }
Matrix gram(const Matrix& x) { return gram_impl<true>(x); }
Matrix rbf_from_sqdist(const Matrix& d, double s) { return rbf_impl<true>(d, s); }
Matrix cosine_similarity(const Matrix& x) { return cosine_impl<true>(x); }
Eigen::MatrixXi knn_from_sqdist(const Matrix& d, int p) { return knn_impl<true>(d, p); }
}  // namespace par

double median_pairwise_distance(const Matrix& sqdist) {
    const Eigen::Index n = sqdist.rows();
    std::vector<double> vals;
    vals.reserve(static_cast<std::size_t>(n) * (static_cast<std::size_t>(n) - 1) / 2);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j) vals.push_back(sqdist(i, j));
    if (vals.empty()) return 1.0;
    auto mid = vals.begin() + static_cast<std::ptrdiff_t>(vals.size() / 2);
    std::nth_element(vals.begin(), mid, vals.end());
    double med = std::sqrt(*mid);
    return med > 0.0 ? med : 1.0;
}

}  // namespace m3d
