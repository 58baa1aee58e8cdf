#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>

#include "m3d/analysis.hpp"
#include "m3d/stats.hpp"

using namespace m3d;

namespace {

std::mt19937_64 rng(314);

Vector gaussian_vector(int n) {
    std::normal_distribution<double> gauss;
    Vector v(n);
    for (int i = 0; i < n; ++i) v[i] = gauss(rng);
    return v;
}

}  // namespace

TEST_CASE("digamma matches known values") {
    // psi(1) = -gamma, psi(0.5) = -gamma - 2 ln 2
    const double gamma = 0.5772156649015329;
    CHECK(stats::digamma(1.0) == doctest::Approx(-gamma).epsilon(1e-10));
    CHECK(stats::digamma(0.5) ==
          doctest::Approx(-gamma - 2 * std::log(2.0)).epsilon(1e-10));
    CHECK(stats::digamma(10.0) == doctest::Approx(2.2517525890667214).epsilon(1e-10));
}

TEST_CASE("incomplete beta and t-distribution sanity") {
    CHECK(stats::incomplete_beta(2.0, 3.0, 0.0) == 0.0);
    CHECK(stats::incomplete_beta(2.0, 3.0, 1.0) == 1.0);
    // I_x(1,1) = x
    CHECK(stats::incomplete_beta(1.0, 1.0, 0.42) == doctest::Approx(0.42).epsilon(1e-12));
    // two-sided p of t = 0 is 1; large |t| shrinks to 0
    CHECK(stats::student_t_two_sided(0.0, 5.0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(stats::student_t_two_sided(50.0, 5.0) < 1e-6);
    // t with 1 dof is Cauchy: P(|T| > 1) = 0.5
    CHECK(stats::student_t_two_sided(1.0, 1.0) == doctest::Approx(0.5).epsilon(1e-9));
}

TEST_CASE("mi of an independent feature is near zero") {
    const int n = 2000;
    Vector feature = gaussian_vector(n);
    std::vector<int> labels;
    for (int i = 0; i < n; ++i) labels.push_back(i % 2);
    double mi = mutual_information_cd(feature, labels, 3);
    CHECK(mi <= 0.05);
    CHECK(mi >= 0.0);
}

TEST_CASE("mi of the sign feature approaches ln 2") {
    const int n = 2000;
    Vector feature = gaussian_vector(n);
    std::vector<int> labels;
    for (int i = 0; i < n; ++i) labels.push_back(feature[i] > 0 ? 1 : 0);
    double mi = mutual_information_cd(feature, labels, 3);
    CHECK(std::abs(mi - std::log(2.0)) <= 0.1);
}

TEST_CASE("mi edge cases") {
    Vector constant = Vector::Zero(100);
    std::vector<int> labels;
    for (int i = 0; i < 100; ++i) labels.push_back(i % 2);
    CHECK(mutual_information_cd(constant, labels, 3) == 0.0);

    Vector feature = gaussian_vector(50);
    std::vector<int> single(50, 1);
    CHECK(mutual_information_cd(feature, single, 3) == 0.0);
}

TEST_CASE("mi is invariant to strictly monotone transforms") {
    const int n = 2000;
    Vector feature = gaussian_vector(n);
    std::vector<int> labels;
    for (int i = 0; i < n; ++i) labels.push_back(feature[i] > 0.5 ? 1 : 0);
    double base = mutual_information_cd(feature, labels, 3);
    Vector cubed = feature.array() * feature.array() * feature.array() + 5.0 * feature.array();
    double transformed = mutual_information_cd(cubed, labels, 3);
    CHECK(std::abs(base - transformed) <= 0.05);
}

TEST_CASE("mi_map normalizes and finds the planted feature") {
    const int n = 600;
    std::normal_distribution<double> gauss;
    Matrix x(n, 5);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < 5; ++j) x(i, j) = gauss(rng);
    Matrix soft = Matrix::Zero(n, 2);
    for (int i = 0; i < n; ++i) {
        int cls = x(i, 3) > 0 ? 1 : 0;  // feature 3 carries the signal
        soft(i, cls) = 1.0;
    }
    auto mi = mi_map(x, soft, 3);
    CHECK(mi.values.rows() == 2);
    CHECK(mi.values.cols() == 5);
    CHECK(mi.values.maxCoeff() == 1.0);
    Eigen::Index r = 0, c = 0;
    mi.values.maxCoeff(&r, &c);
    CHECK(c == 3);
    CHECK(mi.values.minCoeff() >= 0.0);
}

TEST_CASE("mi_map of constant features is all zeros") {
    Matrix x = Matrix::Ones(50, 4);
    Matrix soft = Matrix::Zero(50, 2);
    for (int i = 0; i < 50; ++i) soft(i, i % 2) = 1.0;
    auto mi = mi_map(x, soft, 3);
    CHECK(mi.values.isZero(0.0));
}

TEST_CASE("mi_map is invariant to sample permutation") {
    const int n = 300;
    std::normal_distribution<double> gauss;
    Matrix x(n, 3);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < 3; ++j) x(i, j) = gauss(rng);
    Matrix soft = Matrix::Zero(n, 2);
    for (int i = 0; i < n; ++i) soft(i, x(i, 1) > 0 ? 1 : 0) = 1.0;

    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    Matrix xp(n, 3);
    Matrix softp = Matrix::Zero(n, 2);
    for (int i = 0; i < n; ++i) {
        xp.row(i) = x.row(perm[static_cast<std::size_t>(i)]);
        softp.row(i) = soft.row(perm[static_cast<std::size_t>(i)]);
    }
    auto a = mi_map(x, soft, 3);
    auto b = mi_map(xp, softp, 3);
    CHECK((a.values - b.values).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("bh_fdr matches the hand-computed step-up") {
    auto adj = bh_fdr({0.01, 0.02, 0.03});
    CHECK(adj[0] == doctest::Approx(0.03).epsilon(1e-12));
    CHECK(adj[1] == doctest::Approx(0.03).epsilon(1e-12));
    CHECK(adj[2] == doctest::Approx(0.03).epsilon(1e-12));

    auto ones = bh_fdr({1.0, 1.0, 1.0, 1.0});
    for (double v : ones) CHECK(v == 1.0);

    auto single = bh_fdr({0.2});
    CHECK(single[0] == 0.2);

    CHECK_THROWS_AS(bh_fdr({-0.1}), M3dError);
    CHECK_THROWS_AS(bh_fdr({1.5}), M3dError);
}

TEST_CASE("bh_fdr is pointwise >= input and rank-monotone") {
    std::uniform_real_distribution<double> u(0, 1);
    for (int rep = 0; rep < 20; ++rep) {
        std::vector<double> p;
        for (int i = 0; i < 25; ++i) p.push_back(u(rng));
        auto adj = bh_fdr(p);
        for (std::size_t i = 0; i < p.size(); ++i) {
            CHECK(adj[i] >= p[i] - 1e-15);
            CHECK(adj[i] <= 1.0);
        }
        std::vector<double> sorted = p;
        std::sort(sorted.begin(), sorted.end());
        auto sorted_adj = bh_fdr(sorted);
        for (std::size_t i = 1; i < sorted_adj.size(); ++i)
            CHECK(sorted_adj[i] >= sorted_adj[i - 1] - 1e-15);
    }
}

namespace {

FeatureDataset subjects_dataset(const std::vector<std::pair<double, double>>& mean_sd,
                                int n_per_subject, int label) {
    FeatureDataset ds;
    const int s = static_cast<int>(mean_sd.size());
    ds.features.resize(s * n_per_subject, 1);
    std::normal_distribution<double> gauss;
    for (int subj = 0; subj < s; ++subj)
        for (int i = 0; i < n_per_subject; ++i) {
            int row = subj * n_per_subject + i;
            ds.features(row, 0) =
                mean_sd[static_cast<std::size_t>(subj)].first +
                mean_sd[static_cast<std::size_t>(subj)].second * gauss(rng);
            ds.labels.push_back(label);
            ds.subject_ids.push_back(subj);
            ds.session_ids.push_back(0);
        }
    ds.class_count = label + 1;
    return ds;
}

}  // namespace

TEST_CASE("pairwise tests: null calibration keeps rejections rare") {
    std::vector<std::pair<double, double>> subjects(11, {0.0, 1.0});  // 55 pairs
    auto ds = subjects_dataset(subjects, 100, 0);
    auto tm = pairwise_tests(ds, 0);
    int rejected = 0, total = 0;
    for (Eigen::Index i = 0; i < tm.adjusted.rows(); ++i)
        for (Eigen::Index j = i + 1; j < tm.adjusted.cols(); ++j) {
            ++total;
            if (tm.adjusted(i, j) < 0.05) ++rejected;
        }
    CHECK(total == 55);
    CHECK(static_cast<double>(rejected) / total <= 0.05 + 0.03);
}

TEST_CASE("pairwise tests: strong separation is detected") {
    auto ds = subjects_dataset({{0.0, 1.0}, {5.0, 1.0}}, 100, 0);
    auto tm = pairwise_tests(ds, 0);
    CHECK(tm.adjusted(0, 1) < 1e-6);
    CHECK(tm.p_values(0, 1) == tm.adjusted(0, 1));  // single pair: BH is identity
    CHECK(tm.test_used(0, 1) != 0);
}

TEST_CASE("pairwise tests: small groups are untestable") {
    auto ds = subjects_dataset({{0.0, 1.0}, {1.0, 1.0}, {2.0, 1.0}}, 2, 0);
    auto tm = pairwise_tests(ds, 0);
    CHECK(tm.test_used(0, 1) == 0);
    CHECK(std::isnan(tm.p_values(0, 1)));
}

TEST_CASE("pairwise tests pick the rank-sum branch for heavy tails") {
    // lognormal-ish data fails the normality screen
    std::vector<std::pair<double, double>> subjects(2, {0.0, 1.0});
    auto ds = subjects_dataset(subjects, 60, 0);
    for (Eigen::Index i = 0; i < ds.features.rows(); ++i)
        ds.features(i, 0) = std::exp(2.0 * ds.features(i, 0));
    auto tm = pairwise_tests(ds, 0);
    CHECK(tm.test_used(0, 1) == static_cast<int>(TestUsed::rank_sum));
}

TEST_CASE("pairwise tests respect the emotion filter") {
    auto ds0 = subjects_dataset({{0.0, 1.0}, {0.2, 1.0}}, 50, 0);
    auto ds1 = subjects_dataset({{5.0, 1.0}, {-5.0, 1.0}}, 50, 1);
    // merge the two label groups
    FeatureDataset ds = ds0;
    Matrix merged(ds0.features.rows() + ds1.features.rows(), 1);
    merged << ds0.features, ds1.features;
    ds.features = merged;
    ds.labels.insert(ds.labels.end(), ds1.labels.begin(), ds1.labels.end());
    ds.subject_ids.insert(ds.subject_ids.end(), ds1.subject_ids.begin(), ds1.subject_ids.end());
    ds.session_ids.insert(ds.session_ids.end(), ds1.session_ids.begin(), ds1.session_ids.end());
    ds.class_count = 2;

    auto tm0 = pairwise_tests(ds, 0);  // close means
    auto tm1 = pairwise_tests(ds, 1);  // far means
    CHECK(tm0.p_values(0, 1) > 1e-4);
    CHECK(tm1.p_values(0, 1) < 1e-8);
}

TEST_CASE("rank-sum and welch agree qualitatively on normal data") {
    std::normal_distribution<double> gauss;
    std::vector<double> a, b;
    for (int i = 0; i < 100; ++i) {
        a.push_back(gauss(rng));
        b.push_back(gauss(rng) + 3.0);
    }
    auto w = stats::welch_t_test(a, b);
    auto r = stats::rank_sum_test(a, b);
    CHECK(w.p_value < 1e-10);
    CHECK(r.p_value < 1e-10);

    std::vector<double> same_a(a.begin(), a.begin() + 50), same_b(a.begin() + 50, a.end());
    CHECK(stats::welch_t_test(same_a, same_b).p_value > 0.01);
    CHECK(stats::rank_sum_test(same_a, same_b).p_value > 0.01);
}

TEST_CASE("dagostino screen accepts gaussian and rejects uniform-squared") {
    std::normal_distribution<double> gauss;
    std::vector<double> normal;
    for (int i = 0; i < 500; ++i) normal.push_back(gauss(rng));
    CHECK(stats::dagostino_k2(normal).p_value > 0.01);

    std::vector<double> skewed;
    for (int i = 0; i < 500; ++i) {
        double v = gauss(rng);
        skewed.push_back(std::exp(v));
    }
    CHECK(stats::dagostino_k2(skewed).p_value < 1e-6);
}

TEST_CASE("analysis exports write files") {
    Matrix x(40, 3);
    std::normal_distribution<double> gauss;
    for (int i = 0; i < 40; ++i)
        for (int j = 0; j < 3; ++j) x(i, j) = gauss(rng);
    Matrix soft = Matrix::Zero(40, 2);
    for (int i = 0; i < 40; ++i) soft(i, i % 2) = 1.0;
    auto mi = mi_map(x, soft, 3);
    auto dir = std::filesystem::temp_directory_path();
    CHECK_NOTHROW(write_mi_csv(mi, (dir / "m3d_mi.csv").string()));
    CHECK_NOTHROW(write_mi_json(mi, (dir / "m3d_mi.json").string()));

    auto ds = subjects_dataset({{0.0, 1.0}, {1.0, 1.0}, {2.0, 1.0}}, 30, 0);
    auto tm = pairwise_tests(ds, 0);
    CHECK_NOTHROW(write_tests_csv(tm, (dir / "m3d_tests.csv").string()));
    CHECK_NOTHROW(write_tests_json(tm, (dir / "m3d_tests.json").string()));
}
