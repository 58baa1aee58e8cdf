#include "m3d/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

namespace m3d {

ConfusionMatrix confusion(const std::vector<int>& truth, const std::vector<int>& predicted,
                          int class_count) {
    if (truth.size() != predicted.size())
        throw M3dError("confusion: prediction count differs from truth count");
    ConfusionMatrix cm;
    cm.counts = Eigen::MatrixXi::Zero(class_count, class_count);
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (truth[i] < 0 || truth[i] >= class_count || predicted[i] < 0 ||
            predicted[i] >= class_count)
            throw M3dError("confusion: label outside [0, C)");
        ++cm.counts(truth[i], predicted[i]);
    }
    return cm;
}

MetricSet metrics_from_confusion(const ConfusionMatrix& cm) {
    const int c = static_cast<int>(cm.counts.rows());
    const double total = cm.counts.sum();
    if (total == 0) throw M3dError("metrics: empty confusion matrix");
    MetricSet ms;
    ms.accuracy = static_cast<double>(cm.counts.diagonal().sum()) / total;

    auto safe_div = [&ms](double num, double den) {
        if (den == 0) {
            ms.degenerate = true;
            return 0.0;
        }
        return num / den;
    };

    for (int k = 0; k < c; ++k) {
        double tp = cm.counts(k, k);
        double fn = cm.counts.row(k).sum() - tp;
        double fp = cm.counts.col(k).sum() - tp;
        double tn = total - tp - fn - fp;
        double sens = safe_div(tp, tp + fn);
        double spec = safe_div(tn, tn + fp);
        double prec = safe_div(tp, tp + fp);
        double npv = safe_div(tn, tn + fn);
        double f1 = (prec + sens) > 0 ? 2 * prec * sens / (prec + sens) : 0.0;
        ms.sensitivity += sens;
        ms.specificity += spec;
        ms.precision += prec;
        ms.npv += npv;
        ms.f1 += f1;
    }
    ms.sensitivity /= c;
    ms.specificity /= c;
    ms.precision /= c;
    ms.npv /= c;
    ms.f1 /= c;
    return ms;
}

double macro_auroc(const Matrix& soft_scores, const std::vector<int>& truth) {
    const Eigen::Index n = soft_scores.rows();
    const int c = static_cast<int>(soft_scores.cols());
    if (truth.size() != static_cast<std::size_t>(n))
        throw M3dError("auroc: truth size mismatch");
    double sum = 0;
    int counted = 0;
    std::vector<int> order(static_cast<std::size_t>(n));
    std::vector<double> rank(static_cast<std::size_t>(n));
    for (int cls = 0; cls < c; ++cls) {
        Eigen::Index pos = 0;
        for (int y : truth) pos += (y == cls);
        Eigen::Index neg = n - pos;
        if (pos == 0 || neg == 0) continue;
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](int a, int b) {
            return soft_scores(a, cls) < soft_scores(b, cls);
        });
        // average ranks over score ties
        std::size_t i = 0;
        while (i < order.size()) {
            std::size_t j = i;
            while (j + 1 < order.size() &&
                   soft_scores(order[j + 1], cls) == soft_scores(order[i], cls))
                ++j;
            double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
            for (std::size_t k = i; k <= j; ++k) rank[static_cast<std::size_t>(order[k])] = avg;
            i = j + 1;
        }
        double rank_sum = 0;
        for (Eigen::Index s = 0; s < n; ++s)
            if (truth[static_cast<std::size_t>(s)] == cls) rank_sum += rank[static_cast<std::size_t>(s)];
        double auc = (rank_sum - static_cast<double>(pos) * (static_cast<double>(pos) + 1) / 2.0) /
                     (static_cast<double>(pos) * static_cast<double>(neg));
        sum += auc;
        ++counted;
    }
    if (counted == 0) throw M3dError("auroc: no class has both positives and negatives");
    return sum / counted;
}

MetricSet metrics_from_confusion(const ConfusionMatrix& cm, const Matrix& soft_scores,
                                 const std::vector<int>& truth) {
    MetricSet ms = metrics_from_confusion(cm);
    ms.auroc = macro_auroc(soft_scores, truth);
    ms.auroc_valid = true;
    return ms;
}

Variant variant_from_string(const std::string& s) {
    if (s == "full") return Variant::full;
    if (s == "manifold-only") return Variant::manifold_only;
    if (s == "align-classify-only") return Variant::align_classify_only;
    if (s == "no-manifold") return Variant::no_manifold;
    if (s == "no-ensemble") return Variant::no_ensemble;
    if (s == "fixed-mu-0") return Variant::fixed_mu_0;
    if (s == "fixed-mu-0.5") return Variant::fixed_mu_05;
    if (s == "fixed-mu-1") return Variant::fixed_mu_1;
    if (s == "pca") return Variant::pca_reduction;
    if (s == "ensemble-last") return Variant::ensemble_last;
    if (s == "ensemble-averaging") return Variant::ensemble_averaging;
    if (s == "ensemble-voting") return Variant::ensemble_voting;
    if (s == "ensemble-linkclue") return Variant::ensemble_linkclue;
    throw M3dError("unknown variant: " + s);
}

std::string to_string(Variant v) {
    switch (v) {
        case Variant::full: return "full";
        case Variant::manifold_only: return "manifold-only";
        case Variant::align_classify_only: return "align-classify-only";
        case Variant::no_manifold: return "no-manifold";
        case Variant::no_ensemble: return "no-ensemble";
        case Variant::fixed_mu_0: return "fixed-mu-0";
        case Variant::fixed_mu_05: return "fixed-mu-0.5";
        case Variant::fixed_mu_1: return "fixed-mu-1";
        case Variant::pca_reduction: return "pca";
        case Variant::ensemble_last: return "ensemble-last";
        case Variant::ensemble_averaging: return "ensemble-averaging";
        case Variant::ensemble_voting: return "ensemble-voting";
        case Variant::ensemble_linkclue: return "ensemble-linkclue";
    }
    return "?";
}

PipelineConfig apply_variant(const PipelineConfig& cfg, Variant v) {
    PipelineConfig out = cfg;
    switch (v) {
        case Variant::full:
        case Variant::manifold_only:
            break;
        case Variant::align_classify_only:
            out.reduction = Reduction::none;
            out.use_gfk = false;
            out.ensemble = EnsembleMethod::last;
            break;
        case Variant::no_manifold:
            out.reduction = Reduction::none;
            out.use_gfk = false;
            break;
        case Variant::no_ensemble:
            out.ensemble = EnsembleMethod::last;
            break;
        case Variant::fixed_mu_0: out.fixed_mu = 0.0; break;
        case Variant::fixed_mu_05: out.fixed_mu = 0.5; break;
        case Variant::fixed_mu_1: out.fixed_mu = 1.0; break;
        case Variant::pca_reduction: out.reduction = Reduction::pca; break;
        case Variant::ensemble_last: out.ensemble = EnsembleMethod::last; break;
        case Variant::ensemble_averaging: out.ensemble = EnsembleMethod::averaging; break;
        case Variant::ensemble_voting: out.ensemble = EnsembleMethod::voting; break;
        case Variant::ensemble_linkclue: out.ensemble = EnsembleMethod::linkclue; break;
    }
    return out;
}

PairRunResult run_pair(const DomainPair& pair, const PipelineConfig& cfg, Variant variant,
                       bool keep_similarity) {
    auto start = std::chrono::steady_clock::now();
    PipelineConfig vcfg = apply_variant(cfg, variant);
    PairRunResult res;

    M3dRun run = variant == Variant::manifold_only ? run_manifold_only(pair, vcfg)
                                                   : run_m3d(pair, vcfg);
    ConsensusResult consensus = run_consensus(run.ensemble, vcfg.ensemble, vcfg.linkage,
                                              vcfg.decay);
    res.predictions = std::move(consensus.labels);
    if (keep_similarity) res.similarity = std::move(consensus.similarity);
    res.trace = std::move(run.trace);

    res.mean_scores = Matrix::Zero(pair.target.num_samples(), pair.class_count());
    for (const auto& s : run.ensemble.base_scores) res.mean_scores += s;
    res.mean_scores /= static_cast<double>(run.ensemble.base_scores.size());

    bool labeled = std::none_of(pair.target.labels.begin(), pair.target.labels.end(),
                                [](int y) { return y == kUnlabeled; });
    if (labeled) {
        res.cm = confusion(pair.target.labels, res.predictions, pair.class_count());
        res.metrics = metrics_from_confusion(res.cm, res.mean_scores, pair.target.labels);
        res.has_metrics = true;
    }
    res.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return res;
}

namespace {

void accumulate(MetricSet& acc, const MetricSet& x) {
    acc.accuracy += x.accuracy;
    acc.sensitivity += x.sensitivity;
    acc.specificity += x.specificity;
    acc.precision += x.precision;
    acc.f1 += x.f1;
    acc.auroc += x.auroc;
    acc.npv += x.npv;
}

MetricSet mean_of(const std::vector<const MetricSet*>& sets) {
    MetricSet mean;
    if (sets.empty()) return mean;
    for (const auto* s : sets) accumulate(mean, *s);
    double k = static_cast<double>(sets.size());
    mean.accuracy /= k;
    mean.sensitivity /= k;
    mean.specificity /= k;
    mean.precision /= k;
    mean.f1 /= k;
    mean.auroc /= k;
    mean.npv /= k;
    mean.auroc_valid = std::all_of(sets.begin(), sets.end(),
                                   [](const MetricSet* s) { return s->auroc_valid; });
    return mean;
}

MetricSet std_of(const std::vector<const MetricSet*>& sets, const MetricSet& mean) {
    MetricSet var;
    if (sets.size() < 1) return var;
    for (const auto* s : sets) {
        var.accuracy += (s->accuracy - mean.accuracy) * (s->accuracy - mean.accuracy);
        var.sensitivity +=
            (s->sensitivity - mean.sensitivity) * (s->sensitivity - mean.sensitivity);
        var.specificity +=
            (s->specificity - mean.specificity) * (s->specificity - mean.specificity);
        var.precision += (s->precision - mean.precision) * (s->precision - mean.precision);
        var.f1 += (s->f1 - mean.f1) * (s->f1 - mean.f1);
        var.auroc += (s->auroc - mean.auroc) * (s->auroc - mean.auroc);
        var.npv += (s->npv - mean.npv) * (s->npv - mean.npv);
    }
    double k = static_cast<double>(sets.size());
    var.accuracy = std::sqrt(var.accuracy / k);
    var.sensitivity = std::sqrt(var.sensitivity / k);
    var.specificity = std::sqrt(var.specificity / k);
    var.precision = std::sqrt(var.precision / k);
    var.f1 = std::sqrt(var.f1 / k);
    var.auroc = std::sqrt(var.auroc / k);
    var.npv = std::sqrt(var.npv / k);
    var.auroc_valid = mean.auroc_valid;
    return var;
}

}  // namespace

RunReport run_protocol(const FeatureDataset& ds, const SplitPlan& plan,
                       const PipelineConfig& cfg, Variant variant) {
    auto start = std::chrono::steady_clock::now();
    RunReport report;
    report.protocol = to_string(plan.protocol);
    report.variant = to_string(variant);
    report.config_echo = cfg.echo();
    report.folds.resize(plan.folds.size());

    const int jobs = std::max(1, cfg.jobs);
#pragma omp parallel for schedule(dynamic) num_threads(jobs) if (jobs > 1)
    for (std::size_t f = 0; f < plan.folds.size(); ++f) {
        FoldResult& fr = report.folds[f];
        fr.index = static_cast<int>(f);
        fr.target_subjects = plan.folds[f].target_subjects;
        try {
            PipelineConfig fold_cfg = cfg;
            fold_cfg.seed = derive_seed(cfg.seed, SeedStage::fold, f);
            DomainPair pair = extract_fold(ds, plan.folds[f]);
            fr.run = run_pair(pair, fold_cfg, variant);
            fr.ok = true;
        } catch (const std::exception& e) {
            fr.ok = false;
            fr.error = e.what();
        }
    }

    std::vector<const MetricSet*> ok_metrics;
    for (const auto& fr : report.folds) {
        if (fr.ok && fr.run.has_metrics)
            ok_metrics.push_back(&fr.run.metrics);
        else
            ++report.failed_folds;
    }
    report.mean = mean_of(ok_metrics);
    report.stddev = std_of(ok_metrics, report.mean);
    report.total_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

std::vector<RunReport> ablation_matrix(const FeatureDataset& ds, const SplitPlan& plan,
                                       const PipelineConfig& cfg,
                                       const std::vector<Variant>& variants) {
    std::vector<RunReport> out;
    out.reserve(variants.size());
    for (Variant v : variants) out.push_back(run_protocol(ds, plan, cfg, v));
    return out;
}

namespace {

nlohmann::json metrics_json(const MetricSet& m) {
    nlohmann::json j{{"accuracy", m.accuracy},   {"sensitivity", m.sensitivity},
                     {"specificity", m.specificity}, {"precision", m.precision},
                     {"f1", m.f1},               {"npv", m.npv}};
    if (m.auroc_valid) j["auroc"] = m.auroc;
    if (m.degenerate) j["degenerate"] = true;
    return j;
}

std::string fixed6(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

}  // namespace

void write_report_json(const RunReport& report, const std::string& path) {
    nlohmann::json j;
    j["protocol"] = report.protocol;
    j["variant"] = report.variant;
    nlohmann::json echo = nlohmann::json::object();
    for (const auto& [k, v] : report.config_echo) echo[k] = v;
    j["config"] = echo;
    j["failed_folds"] = report.failed_folds;
    j["total_seconds"] = report.total_seconds;
    j["mean"] = metrics_json(report.mean);
    j["std"] = metrics_json(report.stddev);
    j["folds"] = nlohmann::json::array();
    for (const auto& fr : report.folds) {
        nlohmann::json f;
        f["index"] = fr.index;
        f["target_subjects"] = fr.target_subjects;
        f["ok"] = fr.ok;
        if (!fr.ok) {
            f["error"] = fr.error;
        } else {
            f["seconds"] = fr.run.seconds;
            if (fr.run.has_metrics) f["metrics"] = metrics_json(fr.run.metrics);
            nlohmann::json mu = nlohmann::json::array(), churn = nlohmann::json::array(),
                           residual = nlohmann::json::array();
            for (const auto& t : fr.run.trace) {
                mu.push_back(t.mu);
                churn.push_back(t.churn);
                residual.push_back(t.residual);
            }
            f["mu_trajectory"] = mu;
            f["pseudo_label_churn"] = churn;
            f["beta_residual"] = residual;
        }
        j["folds"].push_back(std::move(f));
    }
    std::ofstream out(path);
    if (!out) throw M3dError("cannot write " + path);
    out << j.dump(2) << '\n';
}

namespace {

void summary_rows(std::ostream& out, const RunReport& report) {
    for (const auto& fr : report.folds) {
        out << report.variant << ",fold" << fr.index << ',';
        if (!fr.ok) {
            out << "error,,,,,,,\n";
            continue;
        }
        const auto& m = fr.run.metrics;
        out << "ok," << fixed6(m.accuracy) << ',' << fixed6(m.sensitivity) << ','
            << fixed6(m.specificity) << ',' << fixed6(m.precision) << ',' << fixed6(m.f1)
            << ',' << (m.auroc_valid ? fixed6(m.auroc) : std::string()) << ','
            << fixed6(m.npv) << '\n';
    }
    out << report.variant << ",mean,ok," << fixed6(report.mean.accuracy) << ','
        << fixed6(report.mean.sensitivity) << ',' << fixed6(report.mean.specificity) << ','
        << fixed6(report.mean.precision) << ',' << fixed6(report.mean.f1) << ','
        << (report.mean.auroc_valid ? fixed6(report.mean.auroc) : std::string()) << ','
        << fixed6(report.mean.npv) << '\n';
    out << report.variant << ",std,ok," << fixed6(report.stddev.accuracy) << ','
        << fixed6(report.stddev.sensitivity) << ',' << fixed6(report.stddev.specificity)
        << ',' << fixed6(report.stddev.precision) << ',' << fixed6(report.stddev.f1) << ','
        << (report.mean.auroc_valid ? fixed6(report.stddev.auroc) : std::string()) << ','
        << fixed6(report.stddev.npv) << '\n';
}

}  // namespace

void write_summary_csv(const RunReport& report, const std::string& path) {
    write_summary_csv(std::vector<RunReport>{report}, path);
}

void write_summary_csv(const std::vector<RunReport>& reports, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw M3dError("cannot write " + path);
    out << "variant,row,status,accuracy,sensitivity,specificity,precision,f1,auroc,npv\n";
    for (const auto& r : reports) summary_rows(out, r);
    if (!out) throw M3dError("write failed: " + path);
}

void write_predictions_csv(const PairRunResult& result, const std::vector<int>& truth,
                           const std::string& path) {
    std::ofstream out(path);
    if (!out) throw M3dError("cannot write " + path);
    out << "index,prediction,truth\n";
    for (std::size_t i = 0; i < result.predictions.size(); ++i) {
        out << i << ',' << result.predictions[i] << ',';
        if (i < truth.size() && truth[i] != kUnlabeled) out << truth[i];
        out << '\n';
    }
}

std::string format_summary_table(const RunReport& report) {
    std::ostringstream os;
    char line[256];
    std::snprintf(line, sizeof line, "%-10s %9s %9s %9s %9s %9s %9s %9s\n", "fold",
                  "accuracy", "sens", "spec", "prec", "f1", "auroc", "npv");
    os << line;
    auto row = [&](const std::string& name, const MetricSet& m) {
        std::snprintf(line, sizeof line,
                      "%-10s %9.4f %9.4f %9.4f %9.4f %9.4f %9.4f %9.4f\n", name.c_str(),
                      m.accuracy, m.sensitivity, m.specificity, m.precision, m.f1,
                      m.auroc_valid ? m.auroc : 0.0, m.npv);
        os << line;
    };
    for (const auto& fr : report.folds) {
        if (fr.ok && fr.run.has_metrics)
            row("fold" + std::to_string(fr.index), fr.run.metrics);
        else
            os << "fold" << fr.index << "  ERROR: " << fr.error << '\n';
    }
    row("mean", report.mean);
    row("std", report.stddev);
    return os.str();
}

}  // namespace m3d
