#pragma once

#include <vector>

#include "m3d/common.hpp"

// Pairwise sample-matrix kernels. Each entry is computed by one scalar
// routine shared between the two backends, so m3d::par results are bitwise
// equal to m3d::serial for any thread count; tests and tools/bench_kernels
// rely on that. Rows of the input are samples.

namespace m3d {

namespace serial {

Matrix pairwise_sqdist(const Matrix& x);
Matrix pairwise_sqdist(const Matrix& a, const Matrix& b);
Matrix gram(const Matrix& x);
Matrix rbf_from_sqdist(const Matrix& sqdist, double sigma);
/// Cosine similarity; rows with zero norm get similarity 0 everywhere.
Matrix cosine_similarity(const Matrix& x);
/// Column j holds the p nearest sample indices to sample j (self excluded),
/// ties broken by lower index.
Eigen::MatrixXi knn_from_sqdist(const Matrix& sqdist, int p);

}  // namespace serial

namespace par {

Matrix pairwise_sqdist(const Matrix& x);
Matrix pairwise_sqdist(const Matrix& a, const Matrix& b);
Matrix gram(const Matrix& x);
Matrix rbf_from_sqdist(const Matrix& sqdist, double sigma);
Matrix cosine_similarity(const Matrix& x);
Eigen::MatrixXi knn_from_sqdist(const Matrix& sqdist, int p);

}  // namespace par

/// Median of the n*(n-1)/2 pairwise Euclidean distances; falls back to 1
/// when the median is zero (all points identical).
double median_pairwise_distance(const Matrix& sqdist);

}  // namespace m3d
