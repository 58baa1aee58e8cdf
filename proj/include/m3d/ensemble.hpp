#pragma once

#include <string>
#include <vector>

#include "m3d/common.hpp"

namespace m3d {

enum class EnsembleMethod { last, averaging, voting, linkclue };
enum class SimilarityKind { cts };
enum class LinkageKind { single, complete, average };

EnsembleMethod ensemble_from_string(const std::string& s);
std::string to_string(EnsembleMethod m);
LinkageKind linkage_from_string(const std::string& s);
std::string to_string(LinkageKind k);

/// The per-iteration target labelings produced by the classifier loop.
struct BaseEnsemble {
    Eigen::MatrixXi base_labelings;   // l x m hard labels
    std::vector<Matrix> base_scores;  // optional: l entries of m x C soft scores
    int class_count = 0;

    void validate() const;
    Eigen::Index iterations() const { return base_labelings.rows(); }
    Eigen::Index samples() const { return base_labelings.cols(); }
};

struct ConsensusResult {
    std::vector<int> labels;
    EnsembleMethod method;
    Matrix similarity;  // populated for linkclue only
};

std::vector<int> consensus_last(const BaseEnsemble& ens);
/// argmax of the mean soft scores; requires base_scores.
std::vector<int> consensus_average(const BaseEnsemble& ens);
/// Per-sample majority of hard labels; ties go to the label of the latest
/// iteration among the tied classes.
std::vector<int> consensus_vote(const BaseEnsemble& ens);

/// Connected-triple-based similarity over the cluster graph of all base
/// labelings. Cluster link weight is the shared-member (Jaccard) fraction;
/// the weighted connected-triple count between two clusters is normalized by
/// its maximum over all cluster pairs and scaled by `decay`. The sample-pair
/// similarity averages, over labelings, 1 for co-clustered pairs and the
/// decayed cluster similarity otherwise. Symmetric, unit diagonal, entries
/// in [0, 1].
Matrix cts_similarity(const BaseEnsemble& ens, double decay);

/// Standard agglomerative merging on distance 1 - similarity until k
/// clusters remain; merge ties resolve to the smallest (cluster, cluster)
/// index pair. Returns cluster ids renumbered by smallest member.
std::vector<int> agglomerative(const Matrix& similarity, LinkageKind linkage, int k);

/// CTS similarity, linkage clustering with k = class_count, then each
/// cluster maps to the majority class over all base hard labels of its
/// members (ties to the lowest class).
ConsensusResult consensus_linkclue(const BaseEnsemble& ens, SimilarityKind kind,
                                   LinkageKind linkage, double decay);

ConsensusResult run_consensus(const BaseEnsemble& ens, EnsembleMethod method,
                              LinkageKind linkage, double decay);

}  // namespace m3d
