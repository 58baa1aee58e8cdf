#pragma once

#include <string>
#include <vector>

#include "m3d/config.hpp"
#include "m3d/dataset.hpp"
#include "m3d/pipeline.hpp"

namespace m3d {

struct ConfusionMatrix {
    Eigen::MatrixXi counts;  // rows = true class, cols = predicted

    int total() const { return counts.sum(); }
};

ConfusionMatrix confusion(const std::vector<int>& truth, const std::vector<int>& predicted,
                          int class_count);

/// Macro one-vs-rest metrics. AUROC uses the rank-statistic formulation over
/// soft scores and is flagged invalid when scores are unavailable.
/// Division-by-zero classes contribute 0 and set the degenerate flag.
struct MetricSet {
    double accuracy = 0;
    double sensitivity = 0;
    double specificity = 0;
    double precision = 0;
    double f1 = 0;
    double auroc = 0;
    double npv = 0;
    bool auroc_valid = false;
    bool degenerate = false;  // some one-vs-rest denominator was zero
};

MetricSet metrics_from_confusion(const ConfusionMatrix& cm);
MetricSet metrics_from_confusion(const ConfusionMatrix& cm, const Matrix& soft_scores,
                                 const std::vector<int>& truth);

/// Macro one-vs-rest AUROC with average-rank tie handling.
double macro_auroc(const Matrix& soft_scores, const std::vector<int>& truth);

enum class Variant {
    full,
    manifold_only,
    align_classify_only,
    no_manifold,
    no_ensemble,
    fixed_mu_0,
    fixed_mu_05,
    fixed_mu_1,
    pca_reduction,
    ensemble_last,
    ensemble_averaging,
    ensemble_voting,
    ensemble_linkclue,
};

Variant variant_from_string(const std::string& s);
std::string to_string(Variant v);

/// Config adjustments implied by a variant (fixed mu, reduction swap, ...).
PipelineConfig apply_variant(const PipelineConfig& cfg, Variant v);

struct PairRunResult {
    std::vector<int> predictions;
    Matrix mean_scores;  // m x C, average of the per-iteration soft scores
    Matrix similarity;   // m x m, only when keep_similarity and linkclue ran
    MetricSet metrics;   // valid only when the target carries labels
    bool has_metrics = false;
    std::vector<IterationTrace> trace;
    ConfusionMatrix cm;
    double seconds = 0;
};

/// One source->target adaptation run plus consensus and metrics.
PairRunResult run_pair(const DomainPair& pair, const PipelineConfig& cfg, Variant variant,
                       bool keep_similarity = false);

struct FoldResult {
    int index = 0;
    std::vector<int> target_subjects;
    PairRunResult run;
    bool ok = false;
    std::string error;
};

struct RunReport {
    std::string protocol;
    std::string variant;
    std::vector<std::pair<std::string, std::string>> config_echo;
    std::vector<FoldResult> folds;
    MetricSet mean;    // over successful folds
    MetricSet stddev;  // population std over successful folds
    int failed_folds = 0;
    double total_seconds = 0;
};

/// Runs every fold (in parallel when cfg.jobs > 1), applies consensus,
/// aggregates mean/std. A failing fold is recorded and the run continues.
RunReport run_protocol(const FeatureDataset& ds, const SplitPlan& plan,
                       const PipelineConfig& cfg, Variant variant = Variant::full);

/// One report per variant, sharing folds and seeds.
std::vector<RunReport> ablation_matrix(const FeatureDataset& ds, const SplitPlan& plan,
                                       const PipelineConfig& cfg,
                                       const std::vector<Variant>& variants);

void write_report_json(const RunReport& report, const std::string& path);
void write_summary_csv(const RunReport& report, const std::string& path);
void write_summary_csv(const std::vector<RunReport>& reports, const std::string& path);
void write_predictions_csv(const PairRunResult& result, const std::vector<int>& truth,
                           const std::string& path);
std::string format_summary_table(const RunReport& report);

}  // namespace m3d
