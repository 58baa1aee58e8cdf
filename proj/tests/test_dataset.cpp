#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <set>

#include "m3d/dataset.hpp"

using namespace m3d;

namespace {

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

FeatureDataset tiny_dataset() {
    FeatureDataset ds;
    ds.features.resize(4, 3);
    ds.features << 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 0.25, -1.5, 1e-9, -7.0, 8.5, 2.125;
    ds.labels = {0, 1, 1, kUnlabeled};
    ds.subject_ids = {0, 0, 1, 1};
    ds.session_ids = {0, 0, 0, 1};
    ds.class_count = 2;
    return ds;
}

}  // namespace

TEST_CASE("csv load reflects structure") {
    auto path = temp_path("m3d_tiny.csv");
    {
        std::ofstream out(path);
        out << "f0,f1,f2,label,subject,session\n";
        out << "1,2,3,0,0,0\n";
        out << "4,5,6,1,0,0\n";
        out << "7,8,9,1,1,0\n";
        out << "10,11,12,-1,1,0\n";
    }
    auto ds = load_dataset(path, FileFormat::csv);
    CHECK(ds.num_samples() == 4);
    CHECK(ds.num_features() == 3);
    CHECK(ds.class_count == 2);
    CHECK(ds.labels[3] == kUnlabeled);
    CHECK(ds.features(2, 1) == 8.0);
    CHECK(ds.feature_names[1] == "f1");
}

TEST_CASE("csv with nan cell names row and column") {
    auto path = temp_path("m3d_nan.csv");
    {
        std::ofstream out(path);
        out << "f0,f1,label,subject,session\n";
        out << "1,2,0,0,0\n";
        out << "3,nan,1,0,0\n";
    }
    try {
        load_dataset(path, FileFormat::csv);
        FAIL("expected load error");
    } catch (const M3dError& e) {
        std::string msg = e.what();
        CHECK(msg.find("row 1") != std::string::npos);
        CHECK(msg.find("f1") != std::string::npos);
    }
}

TEST_CASE("csv rejects malformed header") {
    auto path = temp_path("m3d_badheader.csv");
    {
        std::ofstream out(path);
        out << "f0,f1,label,subject\n1,2,0,0\n";
    }
    CHECK_THROWS_AS(load_dataset(path, FileFormat::csv), M3dError);
}

TEST_CASE("csv round trip is exact") {
    auto ds = tiny_dataset();
    ds.features(0, 0) = 0.1 + 0.2;  // not representable exactly
    ds.features(1, 2) = std::numbers::pi;
    auto path = temp_path("m3d_roundtrip.csv");
    save_dataset(ds, path, FileFormat::csv);
    auto loaded = load_dataset(path, FileFormat::csv);
    CHECK(loaded.features == ds.features);  // bitwise
    CHECK(loaded.labels == ds.labels);
    CHECK(loaded.subject_ids == ds.subject_ids);
    CHECK(loaded.session_ids == ds.session_ids);
}

TEST_CASE("binary round trip is exact") {
    auto ds = tiny_dataset();
    ds.feature_names = {"alpha", "beta", "gamma"};
    auto path = temp_path("m3d_roundtrip.bin");
    save_dataset(ds, path, FileFormat::binary);
    auto loaded = load_dataset(path, FileFormat::binary);
    CHECK(loaded.features == ds.features);
    CHECK(loaded.labels == ds.labels);
    CHECK(loaded.subject_ids == ds.subject_ids);
    CHECK(loaded.session_ids == ds.session_ids);
    CHECK(loaded.feature_names == ds.feature_names);
    CHECK(loaded.class_count == ds.class_count);
}

TEST_CASE("binary format rejects wrong magic") {
    auto path = temp_path("m3d_notbinary.bin");
    {
        std::ofstream out(path, std::ios::binary);
        out << "garbage data here";
    }
    CHECK_THROWS_AS(load_dataset(path, FileFormat::binary), M3dError);
}

TEST_CASE("loso splits per protocol") {
    SUBCASE("15 subjects single session -> 15 folds of 14 sources") {
        auto ds = synth_subjects(1, 15, 3, 3, 1.0, 0.1, 0.5);
        auto plan = make_loso_splits(ds, Protocol::cross_subject_single_session);
        CHECK(plan.folds.size() == 15);
        for (const auto& f : plan.folds) {
            CHECK(f.source_subjects.size() == 14);
            CHECK(f.target_subjects.size() == 1);
            CHECK(f.sessions == std::vector<int>{0});
        }
    }
    SUBCASE("2 subjects -> 2 folds") {
        auto ds = synth_subjects(1, 2, 3, 2, 1.0, 0.1, 0.5);
        auto plan = make_loso_splits(ds, Protocol::cross_subject_cross_session);
        CHECK(plan.folds.size() == 2);
    }
    SUBCASE("16 subjects -> 16 folds") {
        auto ds = synth_subjects(1, 16, 2, 3, 1.0, 0.1, 0.5);
        auto plan = make_loso_splits(ds, Protocol::cross_subject_single_session);
        CHECK(plan.folds.size() == 16);
    }
    SUBCASE("single subject errors") {
        auto ds = synth_subjects(1, 2, 3, 2, 1.0, 0.1, 0.5);
        for (auto& s : ds.subject_ids) s = 7;
        CHECK_THROWS_AS(make_loso_splits(ds, Protocol::cross_subject_single_session), M3dError);
    }
    SUBCASE("cross-session pools all sessions") {
        auto ds = synth_subjects(1, 4, 2, 2, 1.0, 0.1, 0.5, 6, 3);
        auto plan = make_loso_splits(ds, Protocol::cross_subject_cross_session);
        CHECK(plan.folds[0].sessions.empty());
        auto pair = extract_fold(ds, plan.folds[0]);
        std::set<int> sessions(pair.target.session_ids.begin(), pair.target.session_ids.end());
        CHECK(sessions.size() == 3);
    }
    SUBCASE("ten-fold partitions subjects") {
        auto ds = synth_subjects(1, 12, 2, 2, 1.0, 0.1, 0.5);
        auto plan = make_loso_splits(ds, Protocol::ten_fold_cross_subject);
        CHECK(plan.folds.size() == 10);
        std::set<int> seen;
        for (const auto& f : plan.folds)
            for (int s : f.target_subjects) CHECK(seen.insert(s).second);
        CHECK(seen.size() == 12);
    }
}

TEST_CASE("loso targets partition the subject set") {
    auto ds = synth_subjects(5, 9, 2, 3, 2.0, 0.3, 0.7);
    auto plan = make_loso_splits(ds, Protocol::cross_subject_single_session);
    std::set<int> all(ds.subject_ids.begin(), ds.subject_ids.end());
    std::set<int> targets;
    for (const auto& f : plan.folds) {
        for (int s : f.target_subjects) CHECK(targets.insert(s).second);  // disjoint
        for (int s : f.source_subjects)
            CHECK(std::find(f.target_subjects.begin(), f.target_subjects.end(), s) ==
                  f.target_subjects.end());
    }
    CHECK(targets == all);
}

TEST_CASE("synth determinism and zero-shift") {
    auto a = synth_domain_shift(42, 10, 3, 0.0, 0.0, 0.5);
    auto b = synth_domain_shift(42, 10, 3, 0.0, 0.0, 0.5);
    CHECK(a.source.features == b.source.features);
    CHECK(a.target.features == b.target.features);

    // zero shift: same generating distribution, so domain means agree loosely
    auto big = synth_domain_shift(7, 400, 2, 0.0, 0.0, 0.5);
    Eigen::RowVectorXd gap =
        big.source.features.colwise().mean() - big.target.features.colwise().mean();
    CHECK(gap.norm() < 0.2);

    auto c = synth_domain_shift(43, 10, 3, 0.0, 0.0, 0.5);
    CHECK(a.source.features != c.source.features);
}

TEST_CASE("synth validates arguments") {
    CHECK_THROWS_AS(synth_domain_shift(1, 1, 3, 0, 0, 0.5), M3dError);
    CHECK_THROWS_AS(synth_domain_shift(1, 5, 1, 0, 0, 0.5), M3dError);
    CHECK_THROWS_AS(synth_domain_shift(1, 5, 3, 0, 0, 0.0), M3dError);
}

TEST_CASE("de features: 62 channels x 5 bands = 310, channel-major") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> gauss;
    std::vector<Matrix> windows(2, Matrix(62, 200));
    for (auto& w : windows)
        for (Eigen::Index i = 0; i < w.rows(); ++i)
            for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = gauss(rng);
    auto ds = extract_de_features(windows, 200.0, default_bands());
    CHECK(ds.num_samples() == 2);
    CHECK(ds.num_features() == 310);
    CHECK(ds.feature_names[0] == "ch0_delta");
    CHECK(ds.feature_names[4] == "ch0_gamma");
    CHECK(ds.feature_names[5] == "ch1_delta");
}

TEST_CASE("de of white noise matches band-fraction oracle") {
    // For N(0, sigma^2) white noise the expected band variance is
    // sigma^2 * (mirrored bins in band) / N; Monte-Carlo over many windows.
    const double fs = 200.0, sigma = 1.7;
    const int nwin = 10000, nsamp = 200;
    std::vector<Band> bands = {{10.0, 30.0, "test"}};
    std::mt19937_64 rng(11);
    std::normal_distribution<double> gauss(0.0, sigma);
    std::vector<Matrix> windows(nwin, Matrix(1, nsamp));
    for (auto& w : windows)
        for (Eigen::Index j = 0; j < nsamp; ++j) w(0, j) = gauss(rng);
    auto ds = extract_de_features(windows, fs, bands);

    int bins = 0;
    for (int k = 1; k <= nsamp / 2; ++k) {
        double f = k * fs / nsamp;
        if (f >= 10.0 && f <= 30.0) ++bins;
    }
    double band_var = sigma * sigma * 2.0 * bins / nsamp;
    double expected = 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e * band_var);
    // DE is a concave function of the band variance; compare the mean of
    // exp(2 DE)/(2 pi e) (the variance estimate itself) against the truth.
    double mean_var = 0;
    for (Eigen::Index i = 0; i < ds.num_samples(); ++i)
        mean_var += std::exp(2.0 * ds.features(i, 0)) / (2.0 * std::numbers::pi * std::numbers::e);
    mean_var /= nwin;
    CHECK(mean_var == doctest::Approx(band_var).epsilon(0.02));
    double mean_de = ds.features.col(0).mean();
    CHECK(std::abs(mean_de - expected) < 0.05);
}

TEST_CASE("de of silence hits the variance floor") {
    std::vector<Matrix> windows(1, Matrix::Zero(1, 200));
    auto ds = extract_de_features(windows, 200.0, default_bands());
    double floor_de = 0.5 * std::log(2.0 * std::numbers::pi * std::numbers::e * 1e-12);
    CHECK(ds.features(0, 0) == doctest::Approx(floor_de));
}

TEST_CASE("de rejects band above nyquist") {
    std::vector<Matrix> windows(1, Matrix::Zero(1, 200));
    std::vector<Band> bad = {{10.0, 120.0, "bad"}};
    CHECK_THROWS_AS(extract_de_features(windows, 200.0, bad), M3dError);
}

TEST_CASE("validate rejects inconsistent datasets") {
    auto ds = tiny_dataset();
    ds.labels[0] = 5;  // >= class_count
    CHECK_THROWS_AS(ds.validate(), M3dError);
    ds = tiny_dataset();
    ds.features(1, 1) = std::nan("");
    CHECK_THROWS_AS(ds.validate(), M3dError);
}
