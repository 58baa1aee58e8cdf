#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "m3d/ensemble.hpp"
#include "m3d/kernel.hpp"
#include "m3d/learner.hpp"

namespace m3d {

enum class Reduction { tca, pca, none };
Reduction reduction_from_string(const std::string& s);
std::string to_string(Reduction r);

/// Full pipeline configuration. A single global seed fans out to per-stage
/// streams. d_tca == 0 requests the automatic value min(128, D, n+m); an
/// explicit d_tca that exceeds min(n+m, D) is an error. q == 0 requests
/// d_tca / 2.
struct PipelineConfig {
    int d_tca = 0;
    int q = 0;
    Reduction reduction = Reduction::tca;
    bool use_gfk = true;
    KernelKind tca_kernel = KernelKind::linear;
    double tca_bandwidth = 0.0;  // 0 = median heuristic
    double tca_regularizer = 1e-3;
    KernelKind kernel = KernelKind::rbf;
    double bandwidth = 0.0;      // 0 = median heuristic
    double eta = 0.1;
    double lambda = 0.4;
    double rho = 1.0;
    int p = 10;                  // graph neighbor count
    int l = 10;                  // classifier iterations
    WeakKind init_classifier = WeakKind::dtree;
    int knn_k = 5;
    int tree_max_depth = 10;
    EnsembleMethod ensemble = EnsembleMethod::linkclue;
    LinkageKind linkage = LinkageKind::single;
    double decay = 0.8;
    double fixed_mu = -1.0;      // < 0 = dynamic estimate
    std::uint64_t seed = 0;
    int jobs = 1;

    void validate() const;

    /// Deterministic key/value echo, embedded in every output artifact.
    std::vector<std::pair<std::string, std::string>> echo() const;
};

/// Flat `key = value` config file; '#' starts a comment. Unknown keys are
/// hard errors. Values in the file override the defaults; later CLI flags
/// may override again.
PipelineConfig load_config_file(const std::string& path);

/// Applies one `key=value` assignment; throws on unknown keys or bad values.
void apply_config_entry(PipelineConfig& cfg, const std::string& key, const std::string& value);

}  // namespace m3d
