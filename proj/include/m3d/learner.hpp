#pragma once

#include <string>
#include <vector>

#include "m3d/common.hpp"
#include "m3d/kernel.hpp"

namespace m3d {

struct GraphConfig {
    int p = 10;  // neighbor count; similarity is cosine
};

struct Graph {
    Matrix w;  // symmetric p-NN cosine similarity, negatives clamped to 0
    Matrix l;  // D - W; row sums 0
};

/// W_ij = cosine(z_i, z_j) when i is among the p nearest of j or vice versa
/// (nearest by cosine similarity), 0 otherwise; W_ii = 0; zero-norm rows get
/// similarity 0 everywhere.
Graph build_laplacian(const Matrix& z, const GraphConfig& config);

struct BetaSolution {
    Matrix beta;          // (n+m) x C
    double residual_rel;  // |S*beta - A*Y^T|_F / |A*Y^T|_F
    double rcond;
};

/// Solves ((A + lambda*M + rho*L) K + eta I) beta = A Y^T by partial-pivot LU.
/// a_diag holds the 0/1 source indicator; y is C x (n+m) with zero target
/// columns. Throws when the condition estimate exceeds 1e12.
BetaSolution solve_beta(const Matrix& k, const Vector& a_diag, const Matrix& y,
                        const Matrix& m, const Matrix& l, double eta, double lambda,
                        double rho);

enum class WeakKind { knn, gnb, dtree };
WeakKind weak_from_string(const std::string& s);
std::string to_string(WeakKind k);

struct WeakParams {
    int knn_k = 5;
    int tree_max_depth = 10;
};

/// Trains on the labeled source rows and returns class-probability estimates
/// for the target rows (m x C): neighbor vote fractions for knn, normalized
/// Gaussian likelihoods for gnb, leaf class frequencies for the CART tree.
Matrix weak_classifier_fit_predict(WeakKind kind, const Matrix& source_x,
                                   const std::vector<int>& source_labels, int class_count,
                                   const Matrix& target_x, const WeakParams& params = {});

}  // namespace m3d
