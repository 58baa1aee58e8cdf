#pragma once

#include <vector>

#include "m3d/common.hpp"

namespace m3d {

/// Adaptive factor and the composite MMD matrix for one iteration.
struct AlignmentState {
    double mu = 0.5;
    double d_marginal = 0.0;               // A-distance between the domains
    std::vector<double> d_conditional;     // per-class A-distances (skipped classes 0)
    Matrix m0;                             // (n+m) x (n+m)
    Matrix mc_sum;                         // sum over classes with members on both sides
    Matrix m;                              // (1-mu)*m0 + mu*mc_sum
};

/// Proxy for the distribution gap: 2*(1 - 2*eps), clamped to [0, 2], where
/// eps is the held-out misclassification rate of a linear hinge-loss domain
/// classifier (stratified 2-fold, averaged). Deterministic in `seed`.
/// Either set having fewer than 2 rows yields 0.
double a_distance(const Matrix& a, const Matrix& b, std::uint64_t seed);

struct MuEstimate {
    double mu;
    double d_marginal;
    std::vector<double> d_conditional;
};

/// mu = 1 - d_A / (d_A + sum_c d_c). Classes missing from either domain are
/// skipped; a zero denominator falls back to mu = 0.5.
MuEstimate estimate_mu(const Matrix& source_z, const std::vector<int>& source_labels,
                       const Matrix& target_z, const std::vector<int>& target_pseudo,
                       int class_count, std::uint64_t seed);

/// Marginal MMD coefficient matrix: 1/n^2, 1/m^2 on the diagonal blocks,
/// -1/(n*m) on the cross blocks.
Matrix build_m0(int n, int m);

/// Class-conditional MMD coefficient matrix for class c; all-zero when the
/// class is missing from either domain.
Matrix build_mc(const std::vector<int>& source_labels, const std::vector<int>& target_pseudo,
                int c);

/// Assembles the full state for one iteration. mu_override in [0,1] skips the
/// A-distance estimation (fixed-mu ablations); pass a negative value for the
/// dynamic estimate.
AlignmentState build_alignment(const Matrix& source_z, const std::vector<int>& source_labels,
                               const Matrix& target_z, const std::vector<int>& target_pseudo,
                               int class_count, std::uint64_t seed, double mu_override = -1.0);

}  // namespace m3d
