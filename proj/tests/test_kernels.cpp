#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <omp.h>

#include <random>

#include "m3d/pairwise.hpp"

using namespace m3d;

namespace {

Matrix random_matrix(int n, int d, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss;
    Matrix x(n, d);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < d; ++j) x(i, j) = gauss(rng);
    return x;
}

}  // namespace

TEST_CASE("parallel kernels match the serial reference bitwise") {
    Matrix x = random_matrix(67, 9, 1);
    Matrix y = random_matrix(31, 9, 2);
    for (int threads : {1, 2, 4}) {
        omp_set_num_threads(threads);
        CAPTURE(threads);
        CHECK(par::pairwise_sqdist(x) == serial::pairwise_sqdist(x));
        CHECK(par::pairwise_sqdist(x, y) == serial::pairwise_sqdist(x, y));
        CHECK(par::gram(x) == serial::gram(x));
        Matrix d2 = serial::pairwise_sqdist(x);
        CHECK(par::rbf_from_sqdist(d2, 1.3) == serial::rbf_from_sqdist(d2, 1.3));
        CHECK(par::cosine_similarity(x) == serial::cosine_similarity(x));
        CHECK(par::knn_from_sqdist(d2, 5) == serial::knn_from_sqdist(d2, 5));
    }
}

TEST_CASE("sqdist basics") {
    Matrix x(3, 2);
    x << 0, 0, 3, 4, 0, 1;
    Matrix d = serial::pairwise_sqdist(x);
    CHECK(d(0, 1) == 25.0);
    CHECK(d(0, 2) == 1.0);
    CHECK(d(1, 1) == 0.0);
    CHECK(d == d.transpose().eval());
}

TEST_CASE("cosine similarity handles zero rows") {
    Matrix x(3, 2);
    x << 1, 0, 0, 0, 0, 2;
    Matrix s = serial::cosine_similarity(x);
    CHECK(s(0, 1) == 0.0);
    CHECK(s(1, 2) == 0.0);
    CHECK(s(0, 2) == 0.0);
    CHECK(s(0, 0) == 1.0);
}

TEST_CASE("knn tie-break picks the lower index") {
    Matrix d2(4, 4);
    d2 << 0, 1, 1, 2,
          1, 0, 1, 1,
          1, 1, 0, 1,
          2, 1, 1, 0;
    auto nn = serial::knn_from_sqdist(d2, 2);
    CHECK(nn(0, 0) == 1);  // ties at distance 1: indices 1 and 2
    CHECK(nn(1, 0) == 2);
    CHECK(nn(0, 3) == 1);
    CHECK(nn(1, 3) == 2);
}

TEST_CASE("median pairwise distance") {
    Matrix x(3, 1);
    x << 0.0, 3.0, 7.0;  // pairwise distances 3, 4, 7
    CHECK(median_pairwise_distance(serial::pairwise_sqdist(x)) == doctest::Approx(4.0));
    Matrix same = Matrix::Zero(4, 2);
    CHECK(median_pairwise_distance(serial::pairwise_sqdist(same)) == 1.0);
}
