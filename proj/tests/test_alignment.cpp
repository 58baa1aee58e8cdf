#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "m3d/alignment.hpp"

using namespace m3d;

namespace {

Matrix randn(int n, int d, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss;
    Matrix x(n, d);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < d; ++j) x(i, j) = gauss(rng);
    return x;
}

}  // namespace

TEST_CASE("a_distance of identical sample sets is near zero") {
    Matrix x = randn(200, 5, 1);
    double d = a_distance(x, x, 7);
    CHECK(std::abs(d) <= 0.15);
}

TEST_CASE("a_distance separates far-apart domains") {
    Matrix a = randn(200, 5, 2);
    Matrix b = randn(200, 5, 3);
    b.array() += 100.0;
    double d = a_distance(a, b, 7);
    CHECK(d == doctest::Approx(2.0).epsilon(0.05));
    CHECK(d <= 2.0);
}

TEST_CASE("a_distance clamps and guards small sets") {
    Matrix one = randn(1, 4, 4);
    Matrix many = randn(30, 4, 5);
    CHECK(a_distance(one, many, 1) == 0.0);  // < 2 samples on one side
    // overlapping clouds: raw 2(1-2eps) may go negative, must clamp to 0
    Matrix a = randn(40, 3, 6), b = randn(40, 3, 7);
    double d = a_distance(a, b, 11);
    CHECK(d >= 0.0);
    CHECK(d <= 2.0);
}

TEST_CASE("estimate_mu closed-form cases") {
    // d_A = 0, some d_c > 0  ->  mu = 1. Same marginal distribution, but
    // class labels swapped between domains so the conditionals differ.
    std::mt19937_64 rng(8);
    std::normal_distribution<double> gauss;
    const int half = 100;
    Matrix src(2 * half, 2), tgt(2 * half, 2);
    std::vector<int> src_y, tgt_y;
    for (int i = 0; i < 2 * half; ++i) {
        double off = i < half ? -4.0 : 4.0;
        src(i, 0) = off + gauss(rng);
        src(i, 1) = gauss(rng);
        tgt(i, 0) = off + gauss(rng);
        tgt(i, 1) = gauss(rng);
        src_y.push_back(i < half ? 0 : 1);
        tgt_y.push_back(i < half ? 1 : 0);  // swapped
    }
    auto est = estimate_mu(src, src_y, tgt, tgt_y, 2, 5);
    CHECK(est.d_marginal <= 0.15);
    CHECK(est.d_conditional[0] > 1.5);
    CHECK(est.mu > 0.9);

    // all distances 0 -> fallback mu = 0.5 (identical domains and classes)
    auto same = estimate_mu(src, src_y, src, src_y, 2, 5);
    if (same.d_marginal == 0.0 &&
        same.d_conditional[0] == 0.0 && same.d_conditional[1] == 0.0)
        CHECK(same.mu == 0.5);
    else
        CHECK(same.mu == doctest::Approx(0.5).epsilon(0.4));
}

TEST_CASE("estimate_mu matches the formula on synthetic distances") {
    // d_A = 2 and d_c = 2 for each of 3 classes  ->  mu = 1 - 2/8 = 0.75.
    // Build domains where marginals and every class are fully separable.
    std::mt19937_64 rng(9);
    std::normal_distribution<double> gauss;
    const int per = 60;
    Matrix src(3 * per, 3), tgt(3 * per, 3);
    std::vector<int> ys, yt;
    for (int c = 0; c < 3; ++c)
        for (int i = 0; i < per; ++i) {
            int r = c * per + i;
            src(r, 0) = c * 50.0 + gauss(rng);
            src(r, 1) = gauss(rng);
            src(r, 2) = 0.0;
            tgt(r, 0) = c * 50.0 + gauss(rng);
            tgt(r, 1) = gauss(rng);
            tgt(r, 2) = 1000.0;  // marginal fully separable by last feature
            ys.push_back(c);
            yt.push_back(c);
        }
    auto est = estimate_mu(src, ys, tgt, yt, 3, 3);
    CHECK(est.d_marginal == doctest::Approx(2.0).epsilon(0.05));
    for (int c = 0; c < 3; ++c)
        CHECK(est.d_conditional[static_cast<std::size_t>(c)] == doctest::Approx(2.0).epsilon(0.05));
    CHECK(est.mu == doctest::Approx(0.75).epsilon(0.02));
}

TEST_CASE("estimate_mu validates pseudo labels") {
    Matrix x = randn(10, 2, 1);
    std::vector<int> good(10, 0), bad(10, 5);
    CHECK_THROWS_AS(estimate_mu(x, good, x, bad, 2, 1), M3dError);
}

TEST_CASE("mu is symmetric under domain swap") {
    Matrix a = randn(80, 4, 21);
    Matrix b = randn(80, 4, 22);
    b.array() += 1.0;
    std::vector<int> ya, yb;
    for (int i = 0; i < 80; ++i) {
        ya.push_back(i % 2);
        yb.push_back(i % 2);
    }
    auto fwd = estimate_mu(a, ya, b, yb, 2, 31);
    auto rev = estimate_mu(b, yb, a, ya, 2, 31);
    CHECK(fwd.mu == doctest::Approx(rev.mu).epsilon(0.25));  // 2-fold split noise
}

TEST_CASE("m0 minimal case and row sums") {
    Matrix m0 = build_m0(1, 1);
    CHECK(m0(0, 0) == 1.0);
    CHECK(m0(0, 1) == -1.0);
    CHECK(m0(1, 0) == -1.0);
    CHECK(m0(1, 1) == 1.0);

    Matrix m = build_m0(2, 3);
    for (Eigen::Index i = 0; i < 5; ++i) CHECK(m.row(i).sum() == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(m == m.transpose().eval());
}

TEST_CASE("m0 quadratic form equals the squared mean gap") {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> gauss;
    const int n = 7, m = 11;
    Matrix m0 = build_m0(n, m);
    for (int rep = 0; rep < 200; ++rep) {
        Vector v(n + m);
        for (int i = 0; i < n + m; ++i) v[i] = gauss(rng);
        double gap = v.head(n).mean() - v.tail(m).mean();
        CHECK(v.dot(m0 * v) == doctest::Approx(gap * gap).epsilon(1e-10));
    }
}

TEST_CASE("mc block values and empty-class contract") {
    std::vector<int> src = {0, 0, 1};  // n_0 = 2
    std::vector<int> tgt = {0, 1};     // m_0 = 1
    Matrix mc = build_mc(src, tgt, 0);
    CHECK(mc(0, 0) == 0.25);
    CHECK(mc(0, 1) == 0.25);
    CHECK(mc(3, 3) == 1.0);
    CHECK(mc(0, 3) == -0.5);
    CHECK(mc(3, 0) == -0.5);
    CHECK(mc(2, 2) == 0.0);  // class-1 row untouched by M_0 block
    CHECK(mc(4, 4) == 0.0);

    std::vector<int> tgt_no0 = {1, 1};
    CHECK(build_mc(src, tgt_no0, 0).isZero(0.0));
}

TEST_CASE("mc quadratic form equals the class mean gap") {
    std::mt19937_64 rng(6);
    std::normal_distribution<double> gauss;
    std::uniform_int_distribution<int> lab(0, 2);
    for (int rep = 0; rep < 100; ++rep) {
        const int n = 9, m = 8;
        std::vector<int> ys, yt;
        for (int i = 0; i < n; ++i) ys.push_back(lab(rng));
        for (int i = 0; i < m; ++i) yt.push_back(lab(rng));
        Vector v(n + m);
        for (int i = 0; i < n + m; ++i) v[i] = gauss(rng);
        for (int c = 0; c < 3; ++c) {
            Matrix mc = build_mc(ys, yt, c);
            double ssum = 0, scount = 0, tsum = 0, tcount = 0;
            for (int i = 0; i < n; ++i)
                if (ys[static_cast<std::size_t>(i)] == c) { ssum += v[i]; ++scount; }
            for (int i = 0; i < m; ++i)
                if (yt[static_cast<std::size_t>(i)] == c) { tsum += v[n + i]; ++tcount; }
            double expect = 0.0;
            if (scount > 0 && tcount > 0) {
                double gap = ssum / scount - tsum / tcount;
                expect = gap * gap;
            }
            CHECK(v.dot(mc * v) == doctest::Approx(expect).epsilon(1e-10));
        }
    }
}

TEST_CASE("m0 and mc are PSD") {
    Matrix m0 = build_m0(4, 6);
    Eigen::SelfAdjointEigenSolver<Matrix> es(m0);
    CHECK(es.eigenvalues().minCoeff() >= -1e-10);

    std::vector<int> ys = {0, 1, 0, 2}, yt = {0, 2, 1};
    for (int c = 0; c < 3; ++c) {
        Eigen::SelfAdjointEigenSolver<Matrix> ec(build_mc(ys, yt, c));
        CHECK(ec.eigenvalues().minCoeff() >= -1e-10);
    }
}

TEST_CASE("build_alignment assembles M exactly and logs mu") {
    Matrix src = randn(20, 3, 41);
    Matrix tgt = randn(15, 3, 42);
    std::vector<int> ys, yt;
    for (int i = 0; i < 20; ++i) ys.push_back(i % 2);
    for (int i = 0; i < 15; ++i) yt.push_back(i % 2);

    auto st = build_alignment(src, ys, tgt, yt, 2, 77);
    CHECK(st.mu >= 0.0);
    CHECK(st.mu <= 1.0);
    Matrix expect = (1.0 - st.mu) * st.m0 + st.mu * st.mc_sum;
    CHECK(st.m == expect);  // exact assembly
    CHECK((st.m - st.m.transpose()).norm() == 0.0);

    auto fixed = build_alignment(src, ys, tgt, yt, 2, 77, 0.25);
    CHECK(fixed.mu == 0.25);
    CHECK_THROWS_AS(build_alignment(src, ys, tgt, yt, 2, 77, 1.5), M3dError);
}

TEST_CASE("composite quadratic form identity") {
    std::mt19937_64 rng(55);
    std::normal_distribution<double> gauss;
    std::uniform_int_distribution<int> lab(0, 1);
    const int n = 12, m = 10;
    for (int rep = 0; rep < 50; ++rep) {
        std::vector<int> ys, yt;
        for (int i = 0; i < n; ++i) ys.push_back(lab(rng));
        for (int i = 0; i < m; ++i) yt.push_back(lab(rng));
        Matrix src = randn(n, 2, 100 + rep), tgt = randn(m, 2, 200 + rep);
        auto st = build_alignment(src, ys, tgt, yt, 2, rep, 0.3);
        Vector v(n + m);
        for (int i = 0; i < n + m; ++i) v[i] = gauss(rng);

        double marginal_gap = v.head(n).mean() - v.tail(m).mean();
        double expect = (1.0 - st.mu) * marginal_gap * marginal_gap;
        for (int c = 0; c < 2; ++c) {
            double ssum = 0, scount = 0, tsum = 0, tcount = 0;
            for (int i = 0; i < n; ++i)
                if (ys[static_cast<std::size_t>(i)] == c) { ssum += v[i]; ++scount; }
            for (int i = 0; i < m; ++i)
                if (yt[static_cast<std::size_t>(i)] == c) { tsum += v[n + i]; ++tcount; }
            if (scount > 0 && tcount > 0) {
                double gap = ssum / scount - tsum / tcount;
                expect += st.mu * gap * gap;
            }
        }
        CHECK(v.dot(st.m * v) == doctest::Approx(expect).epsilon(1e-10));
    }
}
