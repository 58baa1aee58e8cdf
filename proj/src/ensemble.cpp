#include "m3d/ensemble.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace m3d {

EnsembleMethod ensemble_from_string(const std::string& s) {
    if (s == "last") return EnsembleMethod::last;
    if (s == "averaging" || s == "avg") return EnsembleMethod::averaging;
    if (s == "voting" || s == "vote") return EnsembleMethod::voting;
    if (s == "linkclue" || s == "linkclue-cts-sl") return EnsembleMethod::linkclue;
    throw M3dError("unknown ensemble method: " + s);
}

std::string to_string(EnsembleMethod m) {
    switch (m) {
        case EnsembleMethod::last: return "last";
        case EnsembleMethod::averaging: return "averaging";
        case EnsembleMethod::voting: return "voting";
        case EnsembleMethod::linkclue: return "linkclue";
    }
    return "?";
}

LinkageKind linkage_from_string(const std::string& s) {
    if (s == "single" || s == "sl") return LinkageKind::single;
    if (s == "complete" || s == "cl") return LinkageKind::complete;
    if (s == "average" || s == "al") return LinkageKind::average;
    throw M3dError("unknown linkage: " + s);
}

std::string to_string(LinkageKind k) {
    switch (k) {
        case LinkageKind::single: return "single";
        case LinkageKind::complete: return "complete";
        case LinkageKind::average: return "average";
    }
    return "?";
}

void BaseEnsemble::validate() const {
    if (base_labelings.rows() < 1 || base_labelings.cols() < 1)
        throw M3dError("ensemble needs at least one labeling of one sample");
    if (class_count < 1) throw M3dError("ensemble class_count must be >= 1");
    for (Eigen::Index i = 0; i < base_labelings.rows(); ++i)
        for (Eigen::Index j = 0; j < base_labelings.cols(); ++j)
            if (base_labelings(i, j) < 0 || base_labelings(i, j) >= class_count)
                throw M3dError("base labeling entry outside [0, C)");
    for (const auto& s : base_scores)
        if (s.rows() != base_labelings.cols() || s.cols() != class_count)
            throw M3dError("base score shape mismatch");
}

std::vector<int> consensus_last(const BaseEnsemble& ens) {
    ens.validate();
    std::vector<int> out(static_cast<std::size_t>(ens.samples()));
    for (Eigen::Index j = 0; j < ens.samples(); ++j)
        out[static_cast<std::size_t>(j)] = ens.base_labelings(ens.iterations() - 1, j);
    return out;
}

std::vector<int> consensus_average(const BaseEnsemble& ens) {
    ens.validate();
    if (ens.base_scores.size() != static_cast<std::size_t>(ens.iterations()))
        throw M3dError("consensus_average requires soft scores for every labeling");
    Matrix mean = Matrix::Zero(ens.samples(), ens.class_count);
    for (const auto& s : ens.base_scores) mean += s;
    mean /= static_cast<double>(ens.base_scores.size());
    std::vector<int> out(static_cast<std::size_t>(ens.samples()));
    for (Eigen::Index j = 0; j < ens.samples(); ++j)
        out[static_cast<std::size_t>(j)] = argmax_row(mean.row(j));
    return out;
}

std::vector<int> consensus_vote(const BaseEnsemble& ens) {
    ens.validate();
    std::vector<int> out(static_cast<std::size_t>(ens.samples()));
    std::vector<int> counts(static_cast<std::size_t>(ens.class_count));
    for (Eigen::Index j = 0; j < ens.samples(); ++j) {
        std::fill(counts.begin(), counts.end(), 0);
        for (Eigen::Index i = 0; i < ens.iterations(); ++i)
            ++counts[static_cast<std::size_t>(ens.base_labelings(i, j))];
        int best = *std::max_element(counts.begin(), counts.end());
        int winner = -1;
        for (Eigen::Index i = ens.iterations() - 1; i >= 0 && winner < 0; --i) {
            int lab = ens.base_labelings(i, j);
            if (counts[static_cast<std::size_t>(lab)] == best) winner = lab;
        }
        out[static_cast<std::size_t>(j)] = winner;
    }
    return out;
}

namespace {

struct Cluster {
    Eigen::Index labeling;
    std::vector<int> members;  // ascending sample indices
};

double jaccard(const std::vector<int>& a, const std::vector<int>& b) {
    std::size_t inter = 0, ia = 0, ib = 0;
    while (ia < a.size() && ib < b.size()) {
        if (a[ia] == b[ib]) { ++inter; ++ia; ++ib; }
        else if (a[ia] < b[ib]) ++ia;
        else ++ib;
    }
    std::size_t uni = a.size() + b.size() - inter;
    return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace

Matrix cts_similarity(const BaseEnsemble& ens, double decay) {
    ens.validate();
    if (!(decay > 0.0 && decay <= 1.0)) throw M3dError("cts decay must lie in (0, 1]");
    const Eigen::Index l = ens.iterations(), m = ens.samples();

    // One cluster per (labeling, used class value), in ascending order.
    std::vector<Cluster> clusters;
    std::vector<std::vector<int>> cluster_of(static_cast<std::size_t>(l),
                                             std::vector<int>(static_cast<std::size_t>(m), -1));
    for (Eigen::Index t = 0; t < l; ++t)
        for (int c = 0; c < ens.class_count; ++c) {
            Cluster cl;
            cl.labeling = t;
            for (Eigen::Index j = 0; j < m; ++j)
                if (ens.base_labelings(t, j) == c) cl.members.push_back(static_cast<int>(j));
            if (cl.members.empty()) continue;
            for (int j : cl.members)
                cluster_of[static_cast<std::size_t>(t)][static_cast<std::size_t>(j)] =
                    static_cast<int>(clusters.size());
            clusters.push_back(std::move(cl));
        }
    const int nc = static_cast<int>(clusters.size());

    Matrix link(nc, nc);
    for (int a = 0; a < nc; ++a) {
        link(a, a) = 1.0;
        for (int b = a + 1; b < nc; ++b) {
            double w = jaccard(clusters[static_cast<std::size_t>(a)].members,
                               clusters[static_cast<std::size_t>(b)].members);
            link(a, b) = w;
            link(b, a) = w;
        }
    }

    // Weighted connected-triple count, then normalize by the global maximum.
    Matrix wct = Matrix::Zero(nc, nc);
    double wct_max = 0.0;
    for (int a = 0; a < nc; ++a)
        for (int b = a + 1; b < nc; ++b) {
            double sum = 0.0;
            for (int c = 0; c < nc; ++c) {
                if (c == a || c == b) continue;
                sum += std::min(link(a, c), link(b, c));
            }
            wct(a, b) = sum;
            wct(b, a) = sum;
            wct_max = std::max(wct_max, sum);
        }
    Matrix cluster_sim = Matrix::Zero(nc, nc);
    if (wct_max > 0.0) cluster_sim = decay * wct / wct_max;

    Matrix out(m, m);
#pragma omp parallel for schedule(static)
    for (Eigen::Index i = 0; i < m; ++i) {
        out(i, i) = 1.0;
        for (Eigen::Index j = i + 1; j < m; ++j) {
            double acc = 0.0;
            for (Eigen::Index t = 0; t < l; ++t) {
                int ci = cluster_of[static_cast<std::size_t>(t)][static_cast<std::size_t>(i)];
                int cj = cluster_of[static_cast<std::size_t>(t)][static_cast<std::size_t>(j)];
                acc += ci == cj ? 1.0 : cluster_sim(ci, cj);
            }
            double v = acc / static_cast<double>(l);
            out(i, j) = v;
            out(j, i) = v;
        }
    }
    return out;
}

std::vector<int> agglomerative(const Matrix& similarity, LinkageKind linkage, int k) {
    const Eigen::Index m = similarity.rows();
    if (similarity.cols() != m) throw M3dError("agglomerative: similarity must be square");
    if (k < 1 || k > m) throw M3dError("agglomerative: k must satisfy 1 <= k <= m");

    Matrix dist = Matrix::Ones(m, m) - similarity;
    std::vector<bool> active(static_cast<std::size_t>(m), true);
    std::vector<double> size(static_cast<std::size_t>(m), 1.0);
    // Cluster id = smallest member index; merges collapse into the smaller id.
    std::vector<std::vector<int>> members(static_cast<std::size_t>(m));
    for (Eigen::Index i = 0; i < m; ++i) members[static_cast<std::size_t>(i)] = {static_cast<int>(i)};

    Eigen::Index remaining = m;
    while (remaining > k) {
        Eigen::Index bi = -1, bj = -1;
        double best = std::numeric_limits<double>::infinity();
        for (Eigen::Index i = 0; i < m; ++i) {
            if (!active[static_cast<std::size_t>(i)]) continue;
            for (Eigen::Index j = i + 1; j < m; ++j) {
                if (!active[static_cast<std::size_t>(j)]) continue;
                if (dist(i, j) < best) {
                    best = dist(i, j);
                    bi = i;
                    bj = j;
                }
            }
        }
        // Lance-Williams update into bi.
        for (Eigen::Index t = 0; t < m; ++t) {
            if (!active[static_cast<std::size_t>(t)] || t == bi || t == bj) continue;
            double d;
            switch (linkage) {
                case LinkageKind::single: d = std::min(dist(bi, t), dist(bj, t)); break;
                case LinkageKind::complete: d = std::max(dist(bi, t), dist(bj, t)); break;
                case LinkageKind::average:
                default:
                    d = (size[static_cast<std::size_t>(bi)] * dist(bi, t) +
                         size[static_cast<std::size_t>(bj)] * dist(bj, t)) /
                        (size[static_cast<std::size_t>(bi)] + size[static_cast<std::size_t>(bj)]);
            }
            dist(bi, t) = d;
            dist(t, bi) = d;
        }
        size[static_cast<std::size_t>(bi)] += size[static_cast<std::size_t>(bj)];
        auto& mb = members[static_cast<std::size_t>(bj)];
        members[static_cast<std::size_t>(bi)].insert(members[static_cast<std::size_t>(bi)].end(),
                                                     mb.begin(), mb.end());
        active[static_cast<std::size_t>(bj)] = false;
        --remaining;
    }

    std::vector<int> labels(static_cast<std::size_t>(m), -1);
    int next = 0;
    for (Eigen::Index i = 0; i < m; ++i) {
        if (!active[static_cast<std::size_t>(i)]) continue;
        for (int member : members[static_cast<std::size_t>(i)])
            labels[static_cast<std::size_t>(member)] = next;
        ++next;
    }
    return labels;
}

ConsensusResult consensus_linkclue(const BaseEnsemble& ens, SimilarityKind kind,
                                   LinkageKind linkage, double decay) {
    ens.validate();
    if (kind != SimilarityKind::cts) throw M3dError("only cts similarity is implemented");
    ConsensusResult res;
    res.method = EnsembleMethod::linkclue;
    res.similarity = cts_similarity(ens, decay);
    int k = std::min<int>(ens.class_count, static_cast<int>(ens.samples()));
    std::vector<int> clusters = agglomerative(res.similarity, linkage, k);

    // Majority class over all base labels of each cluster's members.
    int ncl = *std::max_element(clusters.begin(), clusters.end()) + 1;
    Eigen::MatrixXi votes = Eigen::MatrixXi::Zero(ncl, ens.class_count);
    for (Eigen::Index j = 0; j < ens.samples(); ++j)
        for (Eigen::Index t = 0; t < ens.iterations(); ++t)
            ++votes(clusters[static_cast<std::size_t>(j)], ens.base_labelings(t, j));
    std::vector<int> cluster_class(static_cast<std::size_t>(ncl));
    for (int c = 0; c < ncl; ++c) {
        int best = 0;
        for (int y = 1; y < ens.class_count; ++y)
            if (votes(c, y) > votes(c, best)) best = y;
        cluster_class[static_cast<std::size_t>(c)] = best;
    }
    res.labels.resize(static_cast<std::size_t>(ens.samples()));
    for (Eigen::Index j = 0; j < ens.samples(); ++j)
        res.labels[static_cast<std::size_t>(j)] =
            cluster_class[static_cast<std::size_t>(clusters[static_cast<std::size_t>(j)])];
    return res;
}

ConsensusResult run_consensus(const BaseEnsemble& ens, EnsembleMethod method,
                              LinkageKind linkage, double decay) {
    ConsensusResult res;
    res.method = method;
    switch (method) {
        case EnsembleMethod::last: res.labels = consensus_last(ens); break;
        case EnsembleMethod::averaging: res.labels = consensus_average(ens); break;
        case EnsembleMethod::voting: res.labels = consensus_vote(ens); break;
        case EnsembleMethod::linkclue:
            return consensus_linkclue(ens, SimilarityKind::cts, linkage, decay);
    }
    return res;
}

}  // namespace m3d
