#pragma once

#include <string>

#include "m3d/common.hpp"

namespace m3d {

enum class KernelKind { linear, rbf };

KernelKind kernel_from_string(const std::string& s);
std::string to_string(KernelKind k);

/// bandwidth == 0 requests the median heuristic (median pairwise distance
/// over the rows the kernel is built from).
struct KernelConfig {
    KernelKind kind = KernelKind::rbf;
    double bandwidth = 0.0;
};

/// Symmetric kernel matrix over the rows of z. For rbf,
/// K_ij = exp(-|z_i - z_j|^2 / (2 sigma^2)). If sigma_used is non-null it
/// receives the resolved bandwidth (median heuristic already applied).
Matrix build_kernel(const Matrix& z, const KernelConfig& config, double* sigma_used = nullptr);

/// Cross-kernel between the rows of a and b with an already-resolved bandwidth.
Matrix eval_kernel(const Matrix& a, const Matrix& b, KernelKind kind, double sigma);

}  // namespace m3d
