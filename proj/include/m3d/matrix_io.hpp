#pragma once

#include <string>
#include <utility>
#include <vector>

#include "m3d/common.hpp"

namespace m3d::io {

/// Versioned binary container of named row-major f64 matrices plus a config
/// echo string. `kind` distinguishes model families behind one format.
struct NamedMatrices {
    std::string kind;
    std::string echo;
    std::vector<std::pair<std::string, Matrix>> entries;

    const Matrix& get(const std::string& name) const;
    bool has(const std::string& name) const;
};

void save_named_matrices(const NamedMatrices& data, const std::string& path);
NamedMatrices load_named_matrices(const std::string& path, const std::string& expected_kind);

}  // namespace m3d::io
