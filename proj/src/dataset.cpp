#include "m3d/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <complex>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

namespace m3d {

void FeatureDataset::validate() const {
    if (num_samples() < 1 || num_features() < 1)
        throw M3dError("dataset must have at least one sample and one feature");
    const auto n = static_cast<std::size_t>(num_samples());
    if (labels.size() != n || subject_ids.size() != n || session_ids.size() != n)
        throw M3dError("dataset annotation arrays do not match sample count");
    if (!feature_names.empty() &&
        feature_names.size() != static_cast<std::size_t>(num_features()))
        throw M3dError("feature_names size does not match feature count");
    if (class_count < 0) throw M3dError("negative class_count");
    for (Eigen::Index i = 0; i < features.rows(); ++i)
        for (Eigen::Index j = 0; j < features.cols(); ++j)
            if (!std::isfinite(features(i, j)))
                throw M3dError("non-finite feature at row " + std::to_string(i) +
                               ", column " + std::to_string(j));
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == kUnlabeled) continue;
        if (labels[i] < 0 || labels[i] >= class_count)
            throw M3dError("label " + std::to_string(labels[i]) + " at row " +
                           std::to_string(i) + " outside [0, " +
                           std::to_string(class_count) + ")");
    }
}

FeatureDataset FeatureDataset::select(const std::vector<Eigen::Index>& rows) const {
    FeatureDataset out;
    out.features.resize(static_cast<Eigen::Index>(rows.size()), features.cols());
    out.labels.reserve(rows.size());
    out.subject_ids.reserve(rows.size());
    out.session_ids.reserve(rows.size());
    for (std::size_t k = 0; k < rows.size(); ++k) {
        out.features.row(static_cast<Eigen::Index>(k)) = features.row(rows[k]);
        out.labels.push_back(labels[static_cast<std::size_t>(rows[k])]);
        out.subject_ids.push_back(subject_ids[static_cast<std::size_t>(rows[k])]);
        out.session_ids.push_back(session_ids[static_cast<std::size_t>(rows[k])]);
    }
    out.class_count = class_count;
    out.feature_names = feature_names;
    return out;
}

void DomainPair::validate() const {
    source.validate();
    target.validate();
    if (source.num_features() != target.num_features())
        throw M3dError("source and target feature dimensions differ");
    for (int y : source.labels)
        if (y == kUnlabeled) throw M3dError("source domain must be fully labeled");
}

Protocol protocol_from_string(const std::string& s) {
    if (s == "single-session" || s == "cross-subject-single-session")
        return Protocol::cross_subject_single_session;
    if (s == "cross-session" || s == "cross-subject-cross-session")
        return Protocol::cross_subject_cross_session;
    if (s == "ten-fold" || s == "ten-fold-cross-subject")
        return Protocol::ten_fold_cross_subject;
    throw M3dError("unknown protocol: " + s);
}

std::string to_string(Protocol p) {
    switch (p) {
        case Protocol::cross_subject_single_session: return "cross-subject-single-session";
        case Protocol::cross_subject_cross_session: return "cross-subject-cross-session";
        case Protocol::ten_fold_cross_subject: return "ten-fold-cross-subject";
    }
    return "?";
}

namespace {

double parse_double(const std::string& tok, Eigen::Index row, const std::string& col) {
    double v = 0;
    const char* first = tok.data();
    const char* last = tok.data() + tok.size();
    while (first != last && (*first == ' ' || *first == '\t')) ++first;
    while (last != first && (*(last - 1) == ' ' || *(last - 1) == '\t' || *(last - 1) == '\r'))
        --last;
    auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc() || res.ptr != last)
        throw M3dError("malformed numeric value '" + tok + "' at row " +
                       std::to_string(row) + ", column " + col);
    return v;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

FeatureDataset load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw M3dError("cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw M3dError("empty file: " + path);
    auto header = split_csv_line(line);
    if (header.size() < 4)
        throw M3dError("malformed header in " + path +
                       ": need at least one feature plus label,subject,session");
    const std::size_t ncols = header.size();
    if (header[ncols - 3] != "label" || header[ncols - 2] != "subject" ||
        header[ncols - 1] != "session")
        throw M3dError("malformed header in " + path +
                       ": last columns must be label,subject,session");
    const Eigen::Index dim = static_cast<Eigen::Index>(ncols - 3);

    std::vector<double> values;
    FeatureDataset ds;
    ds.feature_names.assign(header.begin(), header.begin() + dim);
    Eigen::Index row = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto toks = split_csv_line(line);
        if (toks.size() != ncols)
            throw M3dError("row " + std::to_string(row) + " in " + path + " has " +
                           std::to_string(toks.size()) + " columns, expected " +
                           std::to_string(ncols));
        for (Eigen::Index j = 0; j < dim; ++j) {
            double v = parse_double(toks[static_cast<std::size_t>(j)], row, header[static_cast<std::size_t>(j)]);
            if (!std::isfinite(v))
                throw M3dError("non-finite value at row " + std::to_string(row) +
                               ", column " + header[static_cast<std::size_t>(j)] + " in " + path);
            values.push_back(v);
        }
        ds.labels.push_back(static_cast<int>(parse_double(toks[ncols - 3], row, "label")));
        ds.subject_ids.push_back(static_cast<int>(parse_double(toks[ncols - 2], row, "subject")));
        ds.session_ids.push_back(static_cast<int>(parse_double(toks[ncols - 1], row, "session")));
        ++row;
    }
    if (row == 0) throw M3dError("no data rows in " + path);
    ds.features.resize(row, dim);
    for (Eigen::Index i = 0; i < row; ++i)
        for (Eigen::Index j = 0; j < dim; ++j)
            ds.features(i, j) = values[static_cast<std::size_t>(i * dim + j)];
    int maxlab = -1;
    for (int y : ds.labels) maxlab = std::max(maxlab, y);
    ds.class_count = maxlab + 1;
    ds.validate();
    return ds;
}

void save_csv(const FeatureDataset& ds, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw M3dError("cannot write " + path);
    const Eigen::Index dim = ds.num_features();
    for (Eigen::Index j = 0; j < dim; ++j) {
        if (!ds.feature_names.empty())
            out << ds.feature_names[static_cast<std::size_t>(j)];
        else
            out << "f" << j;
        out << ',';
    }
    out << "label,subject,session\n";
    char buf[40];
    for (Eigen::Index i = 0; i < ds.num_samples(); ++i) {
        for (Eigen::Index j = 0; j < dim; ++j) {
            // %.17g round-trips doubles exactly
            std::snprintf(buf, sizeof buf, "%.17g", ds.features(i, j));
            out << buf << ',';
        }
        out << ds.labels[static_cast<std::size_t>(i)] << ','
            << ds.subject_ids[static_cast<std::size_t>(i)] << ','
            << ds.session_ids[static_cast<std::size_t>(i)] << '\n';
    }
    if (!out) throw M3dError("write failed: " + path);
}

constexpr char kMagic[8] = {'M', '3', 'D', 'S', 'E', 'T', '\0', '\0'};
constexpr std::uint32_t kBinaryVersion = 1;

template <typename T>
void write_pod(std::ofstream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T read_pod(std::ifstream& in, const std::string& path) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in) throw M3dError("truncated binary dataset: " + path);
    return v;
}

void save_binary(const FeatureDataset& ds, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw M3dError("cannot write " + path);
    out.write(kMagic, sizeof kMagic);
    write_pod(out, kBinaryVersion);
    write_pod(out, static_cast<std::uint64_t>(ds.num_samples()));
    write_pod(out, static_cast<std::uint64_t>(ds.num_features()));
    write_pod(out, static_cast<std::int32_t>(ds.class_count));
    for (Eigen::Index i = 0; i < ds.num_samples(); ++i)
        for (Eigen::Index j = 0; j < ds.num_features(); ++j)
            write_pod(out, ds.features(i, j));
    for (int v : ds.labels) write_pod(out, static_cast<std::int32_t>(v));
    for (int v : ds.subject_ids) write_pod(out, static_cast<std::int32_t>(v));
    for (int v : ds.session_ids) write_pod(out, static_cast<std::int32_t>(v));
    write_pod(out, static_cast<std::uint32_t>(ds.feature_names.size()));
    for (const auto& name : ds.feature_names) {
        write_pod(out, static_cast<std::uint32_t>(name.size()));
        out.write(name.data(), static_cast<std::streamsize>(name.size()));
    }
    if (!out) throw M3dError("write failed: " + path);
}

FeatureDataset load_binary(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw M3dError("cannot open " + path);
    char magic[8];
    in.read(magic, sizeof magic);
    if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
        throw M3dError("bad magic in " + path + " (not an m3d binary dataset)");
    auto version = read_pod<std::uint32_t>(in, path);
    if (version != kBinaryVersion)
        throw M3dError("unsupported binary dataset version " + std::to_string(version));
    auto n = read_pod<std::uint64_t>(in, path);
    auto d = read_pod<std::uint64_t>(in, path);
    FeatureDataset ds;
    ds.class_count = read_pod<std::int32_t>(in, path);
    ds.features.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
    for (Eigen::Index i = 0; i < ds.features.rows(); ++i)
        for (Eigen::Index j = 0; j < ds.features.cols(); ++j)
            ds.features(i, j) = read_pod<double>(in, path);
    ds.labels.resize(n);
    ds.subject_ids.resize(n);
    ds.session_ids.resize(n);
    for (auto& v : ds.labels) v = read_pod<std::int32_t>(in, path);
    for (auto& v : ds.subject_ids) v = read_pod<std::int32_t>(in, path);
    for (auto& v : ds.session_ids) v = read_pod<std::int32_t>(in, path);
    auto names = read_pod<std::uint32_t>(in, path);
    for (std::uint32_t k = 0; k < names; ++k) {
        auto len = read_pod<std::uint32_t>(in, path);
        std::string s(len, '\0');
        in.read(s.data(), len);
        if (!in) throw M3dError("truncated binary dataset: " + path);
        ds.feature_names.push_back(std::move(s));
    }
    ds.validate();
    return ds;
}

}  // namespace

FileFormat format_from_path(const std::string& path) {
    auto dot = path.rfind('.');
    if (dot != std::string::npos && path.substr(dot) == ".csv") return FileFormat::csv;
    return FileFormat::binary;
}

FeatureDataset load_dataset(const std::string& path, FileFormat format) {
    return format == FileFormat::csv ? load_csv(path) : load_binary(path);
}

void save_dataset(const FeatureDataset& ds, const std::string& path, FileFormat format) {
    ds.validate();
    if (format == FileFormat::csv)
        save_csv(ds, path);
    else
        save_binary(ds, path);
}

SplitPlan make_loso_splits(const FeatureDataset& ds, Protocol protocol) {
    std::set<int> subject_set(ds.subject_ids.begin(), ds.subject_ids.end());
    std::vector<int> subjects(subject_set.begin(), subject_set.end());
    if (subjects.size() < 2)
        throw M3dError("LOSO splits need at least 2 distinct subjects, got " +
                       std::to_string(subjects.size()));

    std::vector<int> sessions;  // empty = all
    if (protocol == Protocol::cross_subject_single_session) {
        int first = *std::min_element(ds.session_ids.begin(), ds.session_ids.end());
        sessions = {first};
    }

    SplitPlan plan;
    plan.protocol = protocol;
    if (protocol == Protocol::ten_fold_cross_subject) {
        if (subjects.size() < 10)
            throw M3dError("ten-fold protocol needs at least 10 subjects, got " +
                           std::to_string(subjects.size()));
        const std::size_t k = 10;
        const std::size_t base = subjects.size() / k, extra = subjects.size() % k;
        std::size_t pos = 0;
        for (std::size_t f = 0; f < k; ++f) {
            std::size_t sz = base + (f < extra ? 1 : 0);
            Fold fold;
            fold.sessions = sessions;
            fold.target_subjects.assign(subjects.begin() + static_cast<std::ptrdiff_t>(pos),
                                        subjects.begin() + static_cast<std::ptrdiff_t>(pos + sz));
            for (int s : subjects)
                if (std::find(fold.target_subjects.begin(), fold.target_subjects.end(), s) ==
                    fold.target_subjects.end())
                    fold.source_subjects.push_back(s);
            plan.folds.push_back(std::move(fold));
            pos += sz;
        }
    } else {
        for (int held_out : subjects) {
            Fold fold;
            fold.sessions = sessions;
            fold.target_subjects = {held_out};
            for (int s : subjects)
                if (s != held_out) fold.source_subjects.push_back(s);
            plan.folds.push_back(std::move(fold));
        }
    }
    return plan;
}

DomainPair extract_fold(const FeatureDataset& ds, const Fold& fold) {
    auto in_sessions = [&](int sess) {
        return fold.sessions.empty() ||
               std::find(fold.sessions.begin(), fold.sessions.end(), sess) != fold.sessions.end();
    };
    std::vector<Eigen::Index> src_rows, tgt_rows;
    for (Eigen::Index i = 0; i < ds.num_samples(); ++i) {
        const auto k = static_cast<std::size_t>(i);
        if (!in_sessions(ds.session_ids[k])) continue;
        int subj = ds.subject_ids[k];
        if (std::find(fold.source_subjects.begin(), fold.source_subjects.end(), subj) !=
            fold.source_subjects.end())
            src_rows.push_back(i);
        else if (std::find(fold.target_subjects.begin(), fold.target_subjects.end(), subj) !=
                 fold.target_subjects.end())
            tgt_rows.push_back(i);
    }
    if (src_rows.empty() || tgt_rows.empty())
        throw M3dError("fold selects an empty source or target domain");
    DomainPair pair{ds.select(src_rows), ds.select(tgt_rows)};
    pair.source.class_count = pair.target.class_count =
        std::max(pair.source.class_count, pair.target.class_count);
    pair.validate();
    return pair;
}

namespace {

// Class means sit on a circle of radius 2*class_count^(1/2)*noise-independent
// scale in the first two dimensions; remaining dimensions carry noise only.
Matrix class_means(int class_count, int dim) {
    Matrix mu = Matrix::Zero(class_count, dim);
    const double radius = 2.0;
    for (int c = 0; c < class_count; ++c) {
        double ang = 2.0 * std::numbers::pi * c / class_count;
        mu(c, 0) = radius * std::cos(ang);
        mu(c, 1) = radius * std::sin(ang);
    }
    return mu;
}

FeatureDataset sample_blobs(std::mt19937_64& rng, const Matrix& mu, int n_per_class,
                            double noise, int dim) {
    const int C = static_cast<int>(mu.rows());
    FeatureDataset ds;
    ds.features.resize(static_cast<Eigen::Index>(C) * n_per_class, dim);
    ds.class_count = C;
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::Index row = 0;
    for (int c = 0; c < C; ++c) {
        for (int i = 0; i < n_per_class; ++i, ++row) {
            for (int j = 0; j < dim; ++j)
                ds.features(row, j) = mu(c, j) + noise * gauss(rng);
            ds.labels.push_back(c);
            ds.subject_ids.push_back(0);
            ds.session_ids.push_back(0);
        }
    }
    return ds;
}

void shift_rotate(FeatureDataset& ds, double shift, double rotation) {
    const double cs = std::cos(rotation), sn = std::sin(rotation);
    for (Eigen::Index i = 0; i < ds.num_samples(); ++i) {
        double x = ds.features(i, 0), y = ds.features(i, 1);
        ds.features(i, 0) = cs * x - sn * y;
        ds.features(i, 1) = sn * x + cs * y;
    }
    if (shift != 0.0) {
        // shift along the (1,1,...)/sqrt(dim) diagonal
        const double step = shift / std::sqrt(static_cast<double>(ds.num_features()));
        ds.features.array() += step;
    }
}

}  // namespace

DomainPair synth_domain_shift(std::uint64_t seed, int n_per_class, int class_count,
                              double shift, double rotation, double noise, int dim) {
    if (n_per_class < 2) throw M3dError("n_per_class must be >= 2");
    if (class_count < 2) throw M3dError("class_count must be >= 2");
    if (noise <= 0) throw M3dError("noise must be > 0");
    if (dim < 2) throw M3dError("synthetic dimension must be >= 2");
    std::mt19937_64 rng(derive_seed(seed, SeedStage::synth));
    Matrix mu = class_means(class_count, dim);
    DomainPair pair;
    pair.source = sample_blobs(rng, mu, n_per_class, noise, dim);
    pair.target = sample_blobs(rng, mu, n_per_class, noise, dim);
    shift_rotate(pair.target, shift, rotation);
    for (auto& s : pair.target.subject_ids) s = 1;
    pair.validate();
    return pair;
}

FeatureDataset synth_subjects(std::uint64_t seed, int subjects, int n_per_class,
                              int class_count, double shift, double rotation,
                              double noise, int dim, int sessions) {
    if (subjects < 2) throw M3dError("need at least 2 subjects");
    if (sessions < 1) throw M3dError("need at least 1 session");
    std::mt19937_64 rng(derive_seed(seed, SeedStage::synth, 0x5f));
    Matrix mu = class_means(class_count, dim);
    FeatureDataset all;
    bool first = true;
    for (int subj = 0; subj < subjects; ++subj) {
        for (int sess = 0; sess < sessions; ++sess) {
            FeatureDataset part = sample_blobs(rng, mu, n_per_class, noise, dim);
            double frac = subjects > 1 ? static_cast<double>(subj) / (subjects - 1) : 0.0;
            shift_rotate(part, shift * frac, rotation * frac);
            for (auto& s : part.subject_ids) s = subj;
            for (auto& s : part.session_ids) s = sess;
            if (first) {
                all = std::move(part);
                first = false;
            } else {
                Matrix merged(all.features.rows() + part.features.rows(), all.features.cols());
                merged << all.features, part.features;
                all.features = std::move(merged);
                all.labels.insert(all.labels.end(), part.labels.begin(), part.labels.end());
                all.subject_ids.insert(all.subject_ids.end(), part.subject_ids.begin(),
                                       part.subject_ids.end());
                all.session_ids.insert(all.session_ids.end(), part.session_ids.begin(),
                                       part.session_ids.end());
            }
        }
    }
    all.class_count = class_count;
    all.validate();
    return all;
}

std::vector<Band> default_bands() {
    return {{1, 3, "delta"}, {4, 7, "theta"}, {8, 13, "alpha"}, {14, 30, "beta"}, {31, 50, "gamma"}};
}

FeatureDataset extract_de_features(const std::vector<Matrix>& windows, double sample_rate_hz,
                                   const std::vector<Band>& bands) {
    if (windows.empty()) throw M3dError("no windows given");
    if (bands.empty()) throw M3dError("no bands given");
    const Eigen::Index channels = windows.front().rows();
    const Eigen::Index nsamp = windows.front().cols();
    const double nyquist = sample_rate_hz / 2.0;
    for (const auto& b : bands) {
        if (b.hi_hz > nyquist)
            throw M3dError("band edge " + std::to_string(b.hi_hz) + " Hz above Nyquist " +
                           std::to_string(nyquist) + " Hz");
        if (b.lo_hz <= 0 || b.lo_hz >= b.hi_hz) throw M3dError("invalid band edges");
        if (static_cast<double>(nsamp) < 2.0 * sample_rate_hz / b.hi_hz)
            throw M3dError("window too short for band up to " + std::to_string(b.hi_hz) + " Hz");
    }
    for (const auto& w : windows)
        if (w.rows() != channels || w.cols() != nsamp)
            throw M3dError("window shapes are not uniform");

    // Periodogram bins: bin k covers k*fs/N Hz. Band variance is the sum of
    // |X_k|^2 over positive bins inside the band, Parseval-normalized so that
    // the full spectrum sums to the biased variance of the window.
    std::vector<std::vector<Eigen::Index>> band_bins(bands.size());
    for (std::size_t b = 0; b < bands.size(); ++b)
        for (Eigen::Index k = 1; k <= nsamp / 2; ++k) {
            double f = static_cast<double>(k) * sample_rate_hz / static_cast<double>(nsamp);
            if (f >= bands[b].lo_hz && f <= bands[b].hi_hz) band_bins[b].push_back(k);
        }

    FeatureDataset ds;
    const auto n_feat = channels * static_cast<Eigen::Index>(bands.size());
    ds.features.resize(static_cast<Eigen::Index>(windows.size()), n_feat);
    for (Eigen::Index ch = 0; ch < channels; ++ch)
        for (std::size_t b = 0; b < bands.size(); ++b) {
            std::string bn = bands[b].name.empty() ? "band" + std::to_string(b) : bands[b].name;
            ds.feature_names.push_back("ch" + std::to_string(ch) + "_" + bn);
        }

    const double two_pi = 2.0 * std::numbers::pi;
    for (std::size_t w = 0; w < windows.size(); ++w) {
        for (Eigen::Index ch = 0; ch < channels; ++ch) {
            Vector x = windows[w].row(ch).transpose();
            x.array() -= x.mean();
            for (std::size_t b = 0; b < bands.size(); ++b) {
                double power = 0.0;
                for (Eigen::Index k : band_bins[b]) {
                    double re = 0.0, im = 0.0;
                    const double wk = two_pi * static_cast<double>(k) / static_cast<double>(nsamp);
                    for (Eigen::Index t = 0; t < nsamp; ++t) {
                        re += x[t] * std::cos(wk * static_cast<double>(t));
                        im -= x[t] * std::sin(wk * static_cast<double>(t));
                    }
                    double weight = (2 * k == nsamp) ? 1.0 : 2.0;  // Nyquist bin unmirrored
                    power += weight * (re * re + im * im);
                }
                double var = power / (static_cast<double>(nsamp) * static_cast<double>(nsamp));
                var = std::max(var, 1e-12);
                ds.features(static_cast<Eigen::Index>(w),
                            ch * static_cast<Eigen::Index>(bands.size()) +
                                static_cast<Eigen::Index>(b)) =
                    0.5 * std::log(two_pi * std::numbers::e * var);
            }
        }
        ds.labels.push_back(kUnlabeled);
        ds.subject_ids.push_back(0);
        ds.session_ids.push_back(0);
    }
    ds.class_count = 0;
    return ds;
}

}  // namespace m3d
