#include "m3d/matrix_io.hpp"

#include <cstring>
#include <fstream>

namespace m3d::io {

namespace {

constexpr char kMagic[8] = {'M', '3', 'D', 'M', 'A', 'T', '\0', '\0'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ofstream& out, std::uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void write_u64(std::ofstream& out, std::uint64_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

void write_string(std::ofstream& out, const std::string& s) {
    write_u32(out, static_cast<std::uint32_t>(s.size()));
    out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::uint32_t read_u32(std::ifstream& in, const std::string& path) {
    std::uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in) throw M3dError("truncated model file: " + path);
    return v;
}

std::uint64_t read_u64(std::ifstream& in, const std::string& path) {
    std::uint64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in) throw M3dError("truncated model file: " + path);
    return v;
}

std::string read_string(std::ifstream& in, const std::string& path) {
    std::string s(read_u32(in, path), '\0');
    in.read(s.data(), static_cast<std::streamsize>(s.size()));
    if (!in) throw M3dError("truncated model file: " + path);
    return s;
}

}  // namespace

const Matrix& NamedMatrices::get(const std::string& name) const {
    for (const auto& [n, m] : entries)
        if (n == name) return m;
    throw M3dError("model file is missing matrix '" + name + "'");
}

bool NamedMatrices::has(const std::string& name) const {
    for (const auto& [n, m] : entries)
        if (n == name) return true;
    return false;
}

void save_named_matrices(const NamedMatrices& data, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw M3dError("cannot write " + path);
    out.write(kMagic, sizeof kMagic);
    write_u32(out, kVersion);
    write_string(out, data.kind);
    write_string(out, data.echo);
    write_u32(out, static_cast<std::uint32_t>(data.entries.size()));
    for (const auto& [name, m] : data.entries) {
        write_string(out, name);
        write_u64(out, static_cast<std::uint64_t>(m.rows()));
        write_u64(out, static_cast<std::uint64_t>(m.cols()));
        for (Eigen::Index i = 0; i < m.rows(); ++i)
            for (Eigen::Index j = 0; j < m.cols(); ++j) {
                double v = m(i, j);
                out.write(reinterpret_cast<const char*>(&v), sizeof v);
            }
    }
    if (!out) throw M3dError("write failed: " + path);
}

NamedMatrices load_named_matrices(const std::string& path, const std::string& expected_kind) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw M3dError("cannot open " + path);
    char magic[8];
    in.read(magic, sizeof magic);
    if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
        throw M3dError("bad magic in model file " + path);
    std::uint32_t version = read_u32(in, path);
    if (version != kVersion)
        throw M3dError("unsupported model version " + std::to_string(version));
    NamedMatrices data;
    data.kind = read_string(in, path);
    if (data.kind != expected_kind)
        throw M3dError("model file " + path + " holds a '" + data.kind + "' model, expected '" +
                       expected_kind + "'");
    data.echo = read_string(in, path);
    std::uint32_t count = read_u32(in, path);
    for (std::uint32_t k = 0; k < count; ++k) {
        std::string name = read_string(in, path);
        auto rows = static_cast<Eigen::Index>(read_u64(in, path));
        auto cols = static_cast<Eigen::Index>(read_u64(in, path));
        Matrix m(rows, cols);
        for (Eigen::Index i = 0; i < rows; ++i)
            for (Eigen::Index j = 0; j < cols; ++j) {
                double v = 0;
                in.read(reinterpret_cast<char*>(&v), sizeof v);
                m(i, j) = v;
            }
        if (!in) throw M3dError("truncated model file: " + path);
        data.entries.emplace_back(std::move(name), std::move(m));
    }
    return data;
}

}  // namespace m3d::io
