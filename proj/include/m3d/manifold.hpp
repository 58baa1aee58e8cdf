#pragma once

#include <string>
#include <vector>

#include "m3d/common.hpp"
#include "m3d/dataset.hpp"
#include "m3d/kernel.hpp"

namespace m3d {

/// Transfer component analysis fitted on pooled source+target rows.
/// The embedding of a sample x is k(x, training rows) * projection.
struct TcaModel {
    Matrix projection;         // (n+m) x d_tca, sign-fixed eigenvectors
    Matrix training_features;  // retained for kernel evaluation
    KernelKind kernel_kind = KernelKind::linear;
    double bandwidth = 1.0;    // resolved value
    int d_tca = 0;
    Matrix embedded;           // (n+m) x d_tca embedding of the training rows

    Matrix transform(const Matrix& x) const;
};

/// Geodesic flow kernel between the source and target subspaces of the
/// reduced space. G acts on reduced feature vectors; z = G_sqrt * x.
struct GeodesicKernel {
    Matrix source_basis;      // d x q
    Matrix target_basis;      // d x q
    Matrix complement;        // d x (d-q), orthogonal complement of source_basis
    Vector principal_angles;  // q entries, nondecreasing, in [0, pi/2]
    Matrix g;                 // d x d, PSD
    Matrix g_sqrt;            // d x d, PSD square root
    int q = 0;

    Vector transform(const Vector& x) const { return g_sqrt * x; }
    /// Rows of x are samples.
    Matrix transform_rows(const Matrix& x) const { return x * g_sqrt; }
};

/// Maximizes the centered-kernel variance while minimizing the domain MMD:
/// top-d_tca eigenvectors of K H K w = lambda (K M0 K + eps I) w.
/// Deterministic: eigenvector signs fixed so the largest-magnitude entry is
/// positive.
TcaModel fit_tca(const Matrix& source_x, const Matrix& target_x, int d_tca,
                 const KernelConfig& kernel, double regularizer);
TcaModel fit_tca(const DomainPair& pair, int d_tca, const KernelConfig& kernel,
                 double regularizer);

/// Builds G from per-domain PCA bases of the reduced rows. q must satisfy
/// q <= d/2 so the complement admits a full-width second rotation; if a
/// domain covariance has rank < q, q is reduced to the rank (warning on
/// stderr).
GeodesicKernel fit_gfk(const Matrix& source_reduced, const Matrix& target_reduced, int q);

/// The same construction from explicit orthonormal bases: source_basis and
/// target_basis are d x q, complement spans the orthogonal complement of
/// source_basis. G depends only on the spanned subspaces, not basis signs.
GeodesicKernel gfk_from_bases(const Matrix& source_basis, const Matrix& complement,
                              const Matrix& target_basis);

/// Plain PCA reduction, used by the pca-instead-of-tca ablation.
struct PcaModel {
    Eigen::RowVectorXd mean;
    Matrix components;  // D x d
    Matrix transform(const Matrix& x) const {
        return (x.rowwise() - mean) * components;
    }
};
PcaModel fit_pca(const Matrix& x, int d);

struct ManifoldModel {
    TcaModel tca;
    GeodesicKernel gfk;
};

/// Versioned binary container: named row-major f64 matrices plus a config
/// echo string.
void save_manifold_model(const ManifoldModel& model, const std::string& path,
                         const std::string& config_echo);
ManifoldModel load_manifold_model(const std::string& path, std::string* config_echo = nullptr);

}  // namespace m3d
