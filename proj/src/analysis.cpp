#include "m3d/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <set>

#include <json.hpp>

#include "m3d/stats.hpp"

namespace m3d {

double mutual_information_cd(const Vector& feature, const std::vector<int>& labels, int k) {
    if (labels.size() != static_cast<std::size_t>(feature.size()))
        throw M3dError("mutual_information_cd: label count mismatch");
    if (k < 1) throw M3dError("mutual_information_cd: k must be >= 1");

    std::map<int, std::vector<double>> groups;
    for (std::size_t i = 0; i < labels.size(); ++i) groups[labels[i]].push_back(feature[static_cast<Eigen::Index>(i)]);
    if (groups.size() < 2) return 0.0;

    // Drop labels that occur once; they carry no within-group neighbor.
    std::vector<double> pooled;
    for (auto it = groups.begin(); it != groups.end();) {
        if (it->second.size() < 2) {
            it = groups.erase(it);
        } else {
            pooled.insert(pooled.end(), it->second.begin(), it->second.end());
            ++it;
        }
    }
    if (groups.size() < 2) return 0.0;
    std::sort(pooled.begin(), pooled.end());
    const double n = static_cast<double>(pooled.size());

    double mean_psi_k = 0, mean_psi_label = 0, mean_psi_m = 0;
    for (auto& [label, vals] : groups) {
        std::sort(vals.begin(), vals.end());
        const int count = static_cast<int>(vals.size());
        const int kk = std::min(k, count - 1);
        for (int i = 0; i < count; ++i) {
            // distance to the kk-th nearest neighbor inside the group:
            // expand a window around position i in the sorted group
            int lo = i, hi = i;
            double r = 0;
            for (int step = 0; step < kk; ++step) {
                double dl = lo > 0 ? vals[static_cast<std::size_t>(i)] - vals[static_cast<std::size_t>(lo - 1)]
                                   : std::numeric_limits<double>::infinity();
                double dr = hi + 1 < count ? vals[static_cast<std::size_t>(hi + 1)] - vals[static_cast<std::size_t>(i)]
                                           : std::numeric_limits<double>::infinity();
                if (dl <= dr) {
                    --lo;
                    r = dl;
                } else {
                    ++hi;
                    r = dr;
                }
            }
            double radius = std::nextafter(r, 0.0);
            double v = vals[static_cast<std::size_t>(i)];
            // count |x - v| <= radius by comparing subtraction distances, the
            // same arithmetic that produced r (interval endpoints v +- radius
            // would round and readmit the k-th neighbor)
            auto first_ge = std::lower_bound(pooled.begin(), pooled.end(), v);
            double m = 0;
            for (auto it = first_ge; it != pooled.begin();) {
                --it;
                if (v - *it <= radius) ++m;
                else break;
            }
            for (auto it = first_ge; it != pooled.end(); ++it) {
                if (*it - v <= radius) ++m;
                else break;
            }
            mean_psi_k += stats::digamma(static_cast<double>(kk));
            mean_psi_label += stats::digamma(static_cast<double>(count));
            mean_psi_m += stats::digamma(std::max(m, 1.0));
        }
    }
    mean_psi_k /= n;
    mean_psi_label /= n;
    mean_psi_m /= n;
    double mi = stats::digamma(n) + mean_psi_k - mean_psi_label - mean_psi_m;
    return std::max(mi, 0.0);
}

MiMatrix mi_map(const Matrix& target_features, const Matrix& soft_predictions, int k,
                std::vector<std::string> feature_names) {
    if (target_features.rows() != soft_predictions.rows())
        throw M3dError("mi_map: sample counts differ");
    const Eigen::Index d = target_features.cols();
    const int c = static_cast<int>(soft_predictions.cols());
    std::vector<int> hard(static_cast<std::size_t>(target_features.rows()));
    for (Eigen::Index i = 0; i < soft_predictions.rows(); ++i)
        hard[static_cast<std::size_t>(i)] = argmax_row(soft_predictions.row(i));

    MiMatrix out;
    out.values.resize(c, d);
    if (!feature_names.empty() && feature_names.size() != static_cast<std::size_t>(d))
        throw M3dError("mi_map: feature name count mismatch");
    out.feature_names = std::move(feature_names);

#pragma omp parallel for schedule(dynamic) collapse(2)
    for (int cls = 0; cls < c; ++cls)
        for (Eigen::Index f = 0; f < d; ++f) {
            std::vector<int> indicator(hard.size());
            for (std::size_t i = 0; i < hard.size(); ++i) indicator[i] = hard[i] == cls ? 1 : 0;
            out.values(cls, f) = mutual_information_cd(target_features.col(f), indicator, k);
        }

    double lo = out.values.minCoeff(), hi = out.values.maxCoeff();
    if (hi > lo)
        out.values = (out.values.array() - lo) / (hi - lo);
    else
        out.values.setZero();
    return out;
}

std::vector<double> bh_fdr(const std::vector<double>& p) {
    const std::size_t t = p.size();
    for (double v : p)
        if (!(v >= 0.0 && v <= 1.0)) throw M3dError("bh_fdr: p-values must lie in [0, 1]");
    std::vector<std::size_t> order(t);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return p[a] < p[b]; });
    std::vector<double> adjusted(t);
    double running = 1.0;
    for (std::size_t r = t; r-- > 0;) {  // step-up from the largest rank
        double v = p[order[r]] * static_cast<double>(t) / static_cast<double>(r + 1);
        running = std::min(running, std::min(v, 1.0));
        adjusted[order[r]] = running;
    }
    return adjusted;
}

TestMatrix pairwise_tests(const FeatureDataset& ds, int emotion) {
    std::map<int, std::vector<double>> groups;
    for (Eigen::Index i = 0; i < ds.num_samples(); ++i) {
        int label = ds.labels[static_cast<std::size_t>(i)];
        if (label == kUnlabeled) continue;
        if (emotion >= 0 && label != emotion) continue;
        groups[ds.subject_ids[static_cast<std::size_t>(i)]].push_back(
            ds.features.row(i).mean());
    }
    if (groups.size() < 2) throw M3dError("pairwise_tests: need at least 2 subjects");

    TestMatrix tm;
    for (const auto& [subject, _] : groups) tm.subjects.push_back(subject);
    const int s = static_cast<int>(tm.subjects.size());
    const double nan = std::numeric_limits<double>::quiet_NaN();
    tm.p_values = Matrix::Constant(s, s, nan);
    tm.adjusted = Matrix::Constant(s, s, nan);
    tm.test_used = Eigen::MatrixXi::Zero(s, s);
    tm.p_values.diagonal().setOnes();
    tm.adjusted.diagonal().setOnes();

    auto is_normal = [](const std::vector<double>& g) {
        if (g.size() < 8) return false;
        return stats::dagostino_k2(g).p_value >= 0.05;
    };

    std::vector<double> raw;
    std::vector<std::pair<int, int>> cells;
    for (int i = 0; i < s; ++i)
        for (int j = i + 1; j < s; ++j) {
            const auto& a = groups[tm.subjects[static_cast<std::size_t>(i)]];
            const auto& b = groups[tm.subjects[static_cast<std::size_t>(j)]];
            if (a.size() < 3 || b.size() < 3) continue;  // untestable
            stats::TestResult r;
            TestUsed used;
            if (is_normal(a) && is_normal(b)) {
                r = stats::welch_t_test(a, b);
                used = TestUsed::welch_t;
            } else {
                r = stats::rank_sum_test(a, b);
                used = TestUsed::rank_sum;
            }
            tm.p_values(i, j) = tm.p_values(j, i) = r.p_value;
            tm.test_used(i, j) = tm.test_used(j, i) = static_cast<int>(used);
            raw.push_back(r.p_value);
            cells.emplace_back(i, j);
        }

    std::vector<double> adj = bh_fdr(raw);
    for (std::size_t k = 0; k < cells.size(); ++k) {
        auto [i, j] = cells[k];
        tm.adjusted(i, j) = tm.adjusted(j, i) = adj[k];
    }
    return tm;
}

namespace {

std::string g17(double v) {
    if (std::isnan(v)) return "NA";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

void write_mi_csv(const MiMatrix& mi, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw M3dError("cannot write " + path);
    out << "class";
    for (Eigen::Index f = 0; f < mi.values.cols(); ++f) {
        out << ',';
        if (!mi.feature_names.empty())
            out << mi.feature_names[static_cast<std::size_t>(f)];
        else
            out << 'f' << f;
    }
    out << '\n';
    for (Eigen::Index c = 0; c < mi.values.rows(); ++c) {
        out << c;
        for (Eigen::Index f = 0; f < mi.values.cols(); ++f) out << ',' << g17(mi.values(c, f));
        out << '\n';
    }
}

void write_mi_json(const MiMatrix& mi, const std::string& path) {
    nlohmann::json j;
    j["feature_names"] = mi.feature_names;
    auto rows = nlohmann::json::array();
    for (Eigen::Index c = 0; c < mi.values.rows(); ++c) {
        auto row = nlohmann::json::array();
        for (Eigen::Index f = 0; f < mi.values.cols(); ++f) row.push_back(mi.values(c, f));
        rows.push_back(std::move(row));
    }
    j["values"] = std::move(rows);
    std::ofstream out(path);
    if (!out) throw M3dError("cannot write " + path);
    out << j.dump(2) << '\n';
}

void write_tests_csv(const TestMatrix& tm, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw M3dError("cannot write " + path);
    out << "subject_a,subject_b,p,adjusted,test\n";
    const char* names[] = {"untestable", "welch-t", "rank-sum"};
    for (Eigen::Index i = 0; i < tm.p_values.rows(); ++i)
        for (Eigen::Index j = i + 1; j < tm.p_values.cols(); ++j)
            out << tm.subjects[static_cast<std::size_t>(i)] << ','
                << tm.subjects[static_cast<std::size_t>(j)] << ',' << g17(tm.p_values(i, j))
                << ',' << g17(tm.adjusted(i, j)) << ',' << names[tm.test_used(i, j)] << '\n';
}

void write_tests_json(const TestMatrix& tm, const std::string& path) {
    nlohmann::json j;
    j["subjects"] = tm.subjects;
    auto dump = [](const Matrix& m) {
        auto rows = nlohmann::json::array();
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            auto row = nlohmann::json::array();
            for (Eigen::Index k = 0; k < m.cols(); ++k) {
                if (std::isnan(m(i, k)))
                    row.push_back(nullptr);
                else
                    row.push_back(m(i, k));
            }
            rows.push_back(std::move(row));
        }
        return rows;
    };
    j["p_values"] = dump(tm.p_values);
    j["adjusted"] = dump(tm.adjusted);
    auto used = nlohmann::json::array();
    for (Eigen::Index i = 0; i < tm.test_used.rows(); ++i) {
        auto row = nlohmann::json::array();
        for (Eigen::Index k = 0; k < tm.test_used.cols(); ++k) row.push_back(tm.test_used(i, k));
        used.push_back(std::move(row));
    }
    j["test_used"] = std::move(used);
    std::ofstream out(path);
    if (!out) throw M3dError("cannot write " + path);
    out << j.dump(2) << '\n';
}

void write_similarity_csv(const Matrix& similarity, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw M3dError("cannot write " + path);
    for (Eigen::Index i = 0; i < similarity.rows(); ++i) {
        for (Eigen::Index j = 0; j < similarity.cols(); ++j) {
            if (j) out << ',';
            out << g17(similarity(i, j));
        }
        out << '\n';
    }
}

}  // namespace m3d
