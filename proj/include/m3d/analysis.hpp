#pragma once

#include <string>
#include <vector>

#include "m3d/common.hpp"
#include "m3d/dataset.hpp"

namespace m3d {

/// Nonparametric continuous-discrete mutual information (nats): k-NN radius
/// statistics within each label group against the pooled sample, digamma
/// averaged. Labels occurring once are ignored; negative raw estimates clamp
/// to 0; a single-valued label yields 0.
double mutual_information_cd(const Vector& feature, const std::vector<int>& labels, int k = 3);

struct MiMatrix {
    Matrix values;  // class_count x num_features, min-max normalized to [0, 1]
    std::vector<std::string> feature_names;
};

/// MI between every feature column and the hard-label indicator of every
/// class (hard labels = row argmax of soft_predictions). Normalization is
/// min-max over the full matrix; an all-equal matrix maps to zeros.
MiMatrix mi_map(const Matrix& target_features, const Matrix& soft_predictions, int k = 3,
                std::vector<std::string> feature_names = {});

/// Benjamini-Hochberg step-up adjustment, clamped to [0, 1].
std::vector<double> bh_fdr(const std::vector<double>& p);

enum class TestUsed { untestable = 0, welch_t = 1, rank_sum = 2 };

struct TestMatrix {
    std::vector<int> subjects;
    Matrix p_values;            // symmetric; diagonal 1; NaN = untestable
    Matrix adjusted;            // BH over the testable upper triangle
    Eigen::MatrixXi test_used;  // TestUsed codes
};

/// Subject-pair location tests on the per-sample feature mean, restricted to
/// `emotion` (-1 = all labeled samples). Each group passes a D'Agostino
/// normality screen at alpha = 0.05 (groups under 8 samples are treated as
/// non-normal); two normal groups get Welch's t-test, anything else the
/// rank-sum test. Groups under 3 samples mark the cell untestable.
TestMatrix pairwise_tests(const FeatureDataset& ds, int emotion);

void write_mi_csv(const MiMatrix& mi, const std::string& path);
void write_mi_json(const MiMatrix& mi, const std::string& path);
void write_tests_csv(const TestMatrix& tm, const std::string& path);
void write_tests_json(const TestMatrix& tm, const std::string& path);

void write_similarity_csv(const Matrix& similarity, const std::string& path);

}  // namespace m3d
