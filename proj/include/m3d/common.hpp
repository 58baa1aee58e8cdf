#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace m3d {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Thrown for any contract violation (bad input, dimension mismatch,
/// numerical failure). The CLI maps these to nonzero exit codes.
struct M3dError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Stage tags for the seed fan-out. One global seed is split into
/// independent per-stage streams so each stage stays reproducible
/// no matter which other stages run.
enum class SeedStage : std::uint64_t {
    synth = 1,
    a_distance = 2,
    fold = 3,
    analysis = 4,
};

inline std::uint64_t derive_seed(std::uint64_t global, SeedStage stage,
                                 std::uint64_t salt = 0) {
    return splitmix64(global ^ splitmix64(static_cast<std::uint64_t>(stage)) ^
                      splitmix64(salt * 0x9e3779b97f4a7c15ULL + 0x2545f4914f6cdd1dULL));
}

/// Deterministic argmax over a row of class scores; ties resolve to the
/// lowest class index.
inline int argmax_row(const Eigen::Ref<const Eigen::RowVectorXd>& row) {
    int best = 0;
    for (int c = 1; c < row.size(); ++c)
        if (row[c] > row[best]) best = c;
    return best;
}

}  // namespace m3d
