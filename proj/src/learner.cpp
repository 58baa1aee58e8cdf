#include "m3d/learner.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "m3d/pairwise.hpp"

namespace m3d {

Graph build_laplacian(const Matrix& z, const GraphConfig& config) {
    const Eigen::Index n = z.rows();
    if (config.p < 1 || config.p >= n)
        throw M3dError("build_laplacian: p must satisfy 1 <= p < sample count");

    Matrix sim = par::cosine_similarity(z);

    // p nearest by similarity, tie-inclusive: every point whose similarity
    // reaches the p-th best counts as a neighbor (so identical points form
    // the complete graph for any p).
    Vector cutoff(n);
#pragma omp parallel for schedule(static)
    for (Eigen::Index j = 0; j < n; ++j) {
        std::vector<double> col;
        col.reserve(static_cast<std::size_t>(n) - 1);
        for (Eigen::Index i = 0; i < n; ++i)
            if (i != j) col.push_back(sim(i, j));
        std::nth_element(col.begin(), col.begin() + (config.p - 1), col.end(),
                         std::greater<>());
        cutoff[j] = col[static_cast<std::size_t>(config.p - 1)];
    }

    Graph g;
    g.w = Matrix::Zero(n, n);
    for (Eigen::Index j = 0; j < n; ++j)
        for (Eigen::Index i = j + 1; i < n; ++i)
            if (sim(i, j) >= cutoff[j] || sim(i, j) >= cutoff[i]) {
                double v = std::clamp(sim(i, j), 0.0, 1.0);
                g.w(i, j) = v;
                g.w(j, i) = v;
            }
    g.l = Matrix(g.w.rowwise().sum().asDiagonal()) - g.w;
    return g;
}

BetaSolution solve_beta(const Matrix& k, const Vector& a_diag, const Matrix& y,
                        const Matrix& m, const Matrix& l, double eta, double lambda,
                        double rho) {
    const Eigen::Index total = k.rows();
    if (k.cols() != total || a_diag.size() != total || y.cols() != total ||
        m.rows() != total || l.rows() != total)
        throw M3dError("solve_beta: dimension mismatch");
    if (eta <= 0) throw M3dError("solve_beta: eta must be > 0");

    Matrix coeff = a_diag.asDiagonal().toDenseMatrix();
    coeff += lambda * m + rho * l;
    Matrix system = coeff * k + eta * Matrix::Identity(total, total);
    Matrix rhs = a_diag.asDiagonal() * y.transpose();

    Eigen::PartialPivLU<Matrix> lu(system);
    double rcond = lu.rcond();
    if (!(rcond > 1e-12))
        throw M3dError("solve_beta: system is ill-conditioned (rcond=" +
                       std::to_string(rcond) + "); increase eta");
    BetaSolution sol;
    sol.rcond = rcond;
    sol.beta = lu.solve(rhs);
    double denom = rhs.norm();
    sol.residual_rel = denom > 0 ? (system * sol.beta - rhs).norm() / denom : 0.0;
    return sol;
}

WeakKind weak_from_string(const std::string& s) {
    if (s == "knn") return WeakKind::knn;
    if (s == "gnb") return WeakKind::gnb;
    if (s == "dtree" || s == "dt") return WeakKind::dtree;
    throw M3dError("unknown weak classifier kind: " + s);
}

std::string to_string(WeakKind k) {
    switch (k) {
        case WeakKind::knn: return "knn";
        case WeakKind::gnb: return "gnb";
        case WeakKind::dtree: return "dtree";
    }
    return "?";
}

namespace {

Matrix knn_predict(const Matrix& src, const std::vector<int>& labels, int class_count,
                   const Matrix& tgt, int k) {
    const Eigen::Index n = src.rows(), m = tgt.rows();
    k = std::min<int>(k, static_cast<int>(n));
    Matrix out = Matrix::Zero(m, class_count);
    Matrix d2 = par::pairwise_sqdist(tgt, src);  // m x n
    std::vector<int> idx(static_cast<std::size_t>(n));
    for (Eigen::Index t = 0; t < m; ++t) {
        for (Eigen::Index i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = static_cast<int>(i);
        std::partial_sort(idx.begin(), idx.begin() + k, idx.end(), [&](int a, int b) {
            double da = d2(t, a), db = d2(t, b);
            if (da != db) return da < db;
            return a < b;
        });
        for (int j = 0; j < k; ++j)
            out(t, labels[static_cast<std::size_t>(idx[static_cast<std::size_t>(j)])]) += 1.0;
        out.row(t) /= static_cast<double>(k);
    }
    return out;
}

Matrix gnb_predict(const Matrix& src, const std::vector<int>& labels, int class_count,
                   const Matrix& tgt) {
    const Eigen::Index n = src.rows(), d = src.cols(), m = tgt.rows();
    Matrix mean = Matrix::Zero(class_count, d), var = Matrix::Zero(class_count, d);
    Vector counts = Vector::Zero(class_count);
    for (Eigen::Index i = 0; i < n; ++i) {
        counts[labels[static_cast<std::size_t>(i)]] += 1.0;
        mean.row(labels[static_cast<std::size_t>(i)]) += src.row(i);
    }
    for (int c = 0; c < class_count; ++c) {
        if (counts[c] == 0) throw M3dError("gnb: class " + std::to_string(c) + " has no source samples");
        mean.row(c) /= counts[c];
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        auto diff = src.row(i) - mean.row(labels[static_cast<std::size_t>(i)]);
        var.row(labels[static_cast<std::size_t>(i)]) += diff.cwiseProduct(diff);
    }
    const double floor = 1e-9;
    for (int c = 0; c < class_count; ++c)
        var.row(c) = (var.row(c) / counts[c]).cwiseMax(floor);

    Matrix out(m, class_count);
    for (Eigen::Index t = 0; t < m; ++t) {
        Vector logp(class_count);
        for (int c = 0; c < class_count; ++c) {
            double lp = std::log(counts[c] / static_cast<double>(n));
            for (Eigen::Index j = 0; j < d; ++j) {
                double diff = tgt(t, j) - mean(c, j);
                lp -= 0.5 * (std::log(2.0 * std::numbers::pi * var(c, j)) +
                             diff * diff / var(c, j));
            }
            logp[c] = lp;
        }
        double mx = logp.maxCoeff();
        Vector p = (logp.array() - mx).exp();
        out.row(t) = (p / p.sum()).transpose();
    }
    return out;
}

// CART with Gini impurity; first feature / lowest threshold wins exact ties.
struct TreeNode {
    int feature = -1;
    double threshold = 0.0;
    int left = -1, right = -1;
    Vector leaf_prob;
};

class Cart {
  public:
    Cart(const Matrix& x, const std::vector<int>& y, int class_count, int max_depth)
        : x_(x), y_(y), c_(class_count), max_depth_(max_depth) {
        std::vector<Eigen::Index> all(static_cast<std::size_t>(x.rows()));
        for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<Eigen::Index>(i);
        root_ = build(all, 0);
    }

    Vector predict(const Eigen::Ref<const Eigen::RowVectorXd>& row) const {
        int node = root_;
        while (nodes_[static_cast<std::size_t>(node)].feature >= 0) {
            const auto& nd = nodes_[static_cast<std::size_t>(node)];
            node = row[nd.feature] < nd.threshold ? nd.left : nd.right;
        }
        return nodes_[static_cast<std::size_t>(node)].leaf_prob;
    }

  private:
    Vector class_freq(const std::vector<Eigen::Index>& rows) const {
        Vector f = Vector::Zero(c_);
        for (auto i : rows) f[y_[static_cast<std::size_t>(i)]] += 1.0;
        return f / static_cast<double>(rows.size());
    }

    static double gini(const Vector& counts, double total) {
        if (total == 0) return 0.0;
        double g = 1.0;
        for (Eigen::Index c = 0; c < counts.size(); ++c) {
            double p = counts[c] / total;
            g -= p * p;
        }
        return g;
    }

    int build(const std::vector<Eigen::Index>& rows, int depth) {
        TreeNode node;
        Vector freq = class_freq(rows);
        bool pure = false;
        for (Eigen::Index c = 0; c < freq.size(); ++c) pure |= freq[c] == 1.0;
        if (pure || depth >= max_depth_ || rows.size() < 2) {
            node.leaf_prob = freq;
            nodes_.push_back(std::move(node));
            return static_cast<int>(nodes_.size() - 1);
        }

        double best_impurity = std::numeric_limits<double>::infinity();
        int best_feature = -1;
        double best_thr = 0.0;
        const double total = static_cast<double>(rows.size());
        std::vector<std::pair<double, int>> vals(rows.size());
        for (Eigen::Index f = 0; f < x_.cols(); ++f) {
            for (std::size_t i = 0; i < rows.size(); ++i)
                vals[i] = {x_(rows[i], f), y_[static_cast<std::size_t>(rows[i])]};
            std::sort(vals.begin(), vals.end());
            Vector left = Vector::Zero(c_), right = Vector::Zero(c_);
            for (const auto& [v, lab] : vals) right[lab] += 1.0;
            for (std::size_t i = 0; i + 1 < vals.size(); ++i) {
                left[vals[i].second] += 1.0;
                right[vals[i].second] -= 1.0;
                if (vals[i].first == vals[i + 1].first) continue;
                double nl = static_cast<double>(i + 1), nr = total - nl;
                double imp = (nl * gini(left, nl) + nr * gini(right, nr)) / total;
                if (imp < best_impurity) {
                    best_impurity = imp;
                    best_feature = static_cast<int>(f);
                    best_thr = 0.5 * (vals[i].first + vals[i + 1].first);
                }
            }
        }
        Vector parent_counts = freq * total;
        if (best_feature < 0 || best_impurity >= gini(parent_counts, total)) {
            node.leaf_prob = freq;
            nodes_.push_back(std::move(node));
            return static_cast<int>(nodes_.size() - 1);
        }

        std::vector<Eigen::Index> lrows, rrows;
        for (auto i : rows)
            (x_(i, best_feature) < best_thr ? lrows : rrows).push_back(i);
        node.feature = best_feature;
        node.threshold = best_thr;
        nodes_.push_back(node);
        int self = static_cast<int>(nodes_.size() - 1);
        int left = build(lrows, depth + 1);
        int right = build(rrows, depth + 1);
        nodes_[static_cast<std::size_t>(self)].left = left;
        nodes_[static_cast<std::size_t>(self)].right = right;
        return self;
    }

    const Matrix& x_;
    const std::vector<int>& y_;
    int c_;
    int max_depth_;
    std::vector<TreeNode> nodes_;
    int root_ = 0;
};

Matrix dtree_predict(const Matrix& src, const std::vector<int>& labels, int class_count,
                     const Matrix& tgt, int max_depth) {
    Cart tree(src, labels, class_count, max_depth);
    Matrix out(tgt.rows(), class_count);
    for (Eigen::Index t = 0; t < tgt.rows(); ++t)
        out.row(t) = tree.predict(tgt.row(t)).transpose();
    return out;
}

}  // namespace

Matrix weak_classifier_fit_predict(WeakKind kind, const Matrix& source_x,
                                   const std::vector<int>& source_labels, int class_count,
                                   const Matrix& target_x, const WeakParams& params) {
    if (source_x.rows() < 1) throw M3dError("weak classifier: empty source");
    if (source_labels.size() != static_cast<std::size_t>(source_x.rows()))
        throw M3dError("weak classifier: label count mismatch");
    if (class_count < 2) throw M3dError("weak classifier: need at least 2 classes");
    for (int y : source_labels)
        if (y < 0 || y >= class_count) throw M3dError("weak classifier: label out of range");

    switch (kind) {
        case WeakKind::knn:
            return knn_predict(source_x, source_labels, class_count, target_x, params.knn_k);
        case WeakKind::gnb:
            return gnb_predict(source_x, source_labels, class_count, target_x);
        case WeakKind::dtree:
            return dtree_predict(source_x, source_labels, class_count, target_x,
                                 params.tree_max_depth);
    }
    throw M3dError("unknown weak classifier kind");
}

}  // namespace m3d
