#pragma once

#include <optional>
#include <vector>

#include "m3d/alignment.hpp"
#include "m3d/config.hpp"
#include "m3d/dataset.hpp"
#include "m3d/ensemble.hpp"
#include "m3d/learner.hpp"
#include "m3d/manifold.hpp"

namespace m3d {

struct IterationTrace {
    double mu = 0.0;
    double d_marginal = 0.0;
    double churn = 0.0;     // fraction of target pseudo-labels that changed
    double residual = 0.0;  // relative residual of the beta solve
};

/// Everything one execution of the classifier loop produces.
struct M3dRun {
    Matrix z_source, z_target;  // features after the configured transform
    Matrix kernel;              // fixed across iterations
    Graph graph;                // fixed across iterations
    Matrix beta;                // final coefficients, (n+m) x C
    Matrix weak_scores;         // initializer soft labels, m x C
    BaseEnsemble ensemble;      // per-iteration hard labels + soft scores
    std::vector<IterationTrace> trace;
    std::optional<ManifoldModel> manifold;
    int resolved_d = 0;         // dimension actually used after reduction
    int resolved_q = 0;
};

/// Algorithm flow: reduce (TCA by default), embed via the geodesic kernel,
/// initialize pseudo-labels with the weak classifier, then iterate
/// mu -> M -> beta -> soft labels for l rounds. K and the graph Laplacian are
/// built once from the transformed features and reused.
M3dRun run_m3d(const DomainPair& pair, const PipelineConfig& config);

/// Stops after the weak classifier (the manifold-only ablation).
M3dRun run_manifold_only(const DomainPair& pair, const PipelineConfig& config);

/// Classifier-state serialization in the same versioned container as the
/// manifold model: beta, kernel, graph, transformed features, per-iteration
/// labelings/scores and the trace. The manifold sub-model, when present, is
/// not embedded; save it separately via save_manifold_model.
void save_m3d_run(const M3dRun& run, const std::string& path, const std::string& config_echo);
M3dRun load_m3d_run(const std::string& path, std::string* config_echo = nullptr);

}  // namespace m3d
