#pragma once

#include <optional>
#include <string>
#include <vector>

#include "m3d/common.hpp"

namespace m3d {

constexpr int kUnlabeled = -1;

/// Labeled sample matrix with subject/session annotations. The universal
/// currency of the pipeline: rows are samples, columns are features.
struct FeatureDataset {
    Matrix features;                         // num_samples x num_features
    std::vector<int> labels;                 // class index or kUnlabeled
    std::vector<int> subject_ids;
    std::vector<int> session_ids;
    int class_count = 0;
    std::vector<std::string> feature_names;  // empty or size num_features

    Eigen::Index num_samples() const { return features.rows(); }
    Eigen::Index num_features() const { return features.cols(); }

    /// Checks the structural invariants; throws M3dError on violation.
    void validate() const;

    /// Row subset, preserving order.
    FeatureDataset select(const std::vector<Eigen::Index>& rows) const;
};

struct DomainPair {
    FeatureDataset source;  // fully labeled
    FeatureDataset target;  // labels, if present, used for evaluation only

    void validate() const;
    int class_count() const { return std::max(source.class_count, target.class_count); }
};

enum class Protocol {
    cross_subject_single_session,
    cross_subject_cross_session,
    ten_fold_cross_subject,
};

Protocol protocol_from_string(const std::string& s);
std::string to_string(Protocol p);

struct Fold {
    std::vector<int> source_subjects;
    std::vector<int> target_subjects;
    std::vector<int> sessions;  // empty = all sessions
};

struct SplitPlan {
    Protocol protocol;
    std::vector<Fold> folds;
};

enum class FileFormat { csv, binary };

/// CSV schema: header `f0,...,f{D-1},label,subject,session`; label -1 encodes
/// unlabeled. Binary format: magic, version, dims, row-major 64-bit LE floats.
FeatureDataset load_dataset(const std::string& path, FileFormat format);
void save_dataset(const FeatureDataset& ds, const std::string& path, FileFormat format);

/// Guesses csv vs binary from the file extension (.csv => csv, else binary).
FileFormat format_from_path(const std::string& path);

SplitPlan make_loso_splits(const FeatureDataset& ds, Protocol protocol);

/// Materializes one fold of a plan into a source/target pair.
DomainPair extract_fold(const FeatureDataset& ds, const Fold& fold);

/// Synthetic benchmark pair: Gaussian class blobs; the target copy is
/// mean-shifted by `shift` and rotated by `rotation` (radians, applied in the
/// first two feature dimensions). Deterministic in `seed`.
DomainPair synth_domain_shift(std::uint64_t seed, int n_per_class, int class_count,
                              double shift, double rotation, double noise,
                              int dim = 6);

/// Multi-subject synthetic dataset for protocol runs: subject 0 holds the base
/// blobs, subject j a progressively shifted/rotated copy.
FeatureDataset synth_subjects(std::uint64_t seed, int subjects, int n_per_class,
                              int class_count, double shift, double rotation,
                              double noise, int dim = 6, int sessions = 1);

struct Band {
    double lo_hz;
    double hi_hz;
    std::string name;
};

/// Delta 1-3, Theta 4-7, Alpha 8-13, Beta 14-30, Gamma 31-50 Hz.
std::vector<Band> default_bands();

/// Differential entropy per (channel, band) per window, ordered channel-major:
/// DE = 0.5*ln(2*pi*e*var_band) with var_band taken from the periodogram bins
/// inside the band. Variance is floored at 1e-12 before the log.
FeatureDataset extract_de_features(const std::vector<Matrix>& windows,  // channel x time each
                                   double sample_rate_hz, const std::vector<Band>& bands);

}  // namespace m3d
