#include "m3d/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace m3d {

Reduction reduction_from_string(const std::string& s) {
    if (s == "tca") return Reduction::tca;
    if (s == "pca") return Reduction::pca;
    if (s == "none") return Reduction::none;
    throw M3dError("unknown reduction: " + s);
}

std::string to_string(Reduction r) {
    switch (r) {
        case Reduction::tca: return "tca";
        case Reduction::pca: return "pca";
        case Reduction::none: return "none";
    }
    return "?";
}

void PipelineConfig::validate() const {
    if (d_tca < 0) throw M3dError("d_tca must be >= 0 (0 = auto)");
    if (q < 0) throw M3dError("q must be >= 0 (0 = auto)");
    if (tca_regularizer <= 0) throw M3dError("tca_regularizer must be > 0");
    if (tca_bandwidth < 0 || bandwidth < 0) throw M3dError("bandwidth must be >= 0");
    if (eta <= 0) throw M3dError("eta must be > 0");
    if (lambda < 0 || rho < 0) throw M3dError("lambda and rho must be >= 0");
    if (p < 1) throw M3dError("p must be >= 1");
    if (l < 1) throw M3dError("l must be >= 1");
    if (knn_k < 1) throw M3dError("knn_k must be >= 1");
    if (tree_max_depth < 1) throw M3dError("tree_max_depth must be >= 1");
    if (!(decay > 0.0 && decay <= 1.0)) throw M3dError("decay must lie in (0, 1]");
    if (fixed_mu > 1.0) throw M3dError("fixed_mu must lie in [0, 1] (or < 0 for dynamic)");
    if (jobs < 1) throw M3dError("jobs must be >= 1");
}

std::vector<std::pair<std::string, std::string>> PipelineConfig::echo() const {
    auto num = [](double v) {
        std::ostringstream os;
        os << v;
        return os.str();
    };
    return {
        {"d_tca", std::to_string(d_tca)},
        {"q", std::to_string(q)},
        {"reduction", to_string(reduction)},
        {"use_gfk", use_gfk ? "true" : "false"},
        {"tca_kernel", to_string(tca_kernel)},
        {"tca_bandwidth", num(tca_bandwidth)},
        {"tca_regularizer", num(tca_regularizer)},
        {"kernel", to_string(kernel)},
        {"bandwidth", num(bandwidth)},
        {"eta", num(eta)},
        {"lambda", num(lambda)},
        {"rho", num(rho)},
        {"p", std::to_string(p)},
        {"l", std::to_string(l)},
        {"init_classifier", to_string(init_classifier)},
        {"knn_k", std::to_string(knn_k)},
        {"tree_max_depth", std::to_string(tree_max_depth)},
        {"ensemble", to_string(ensemble)},
        {"linkage", to_string(linkage)},
        {"decay", num(decay)},
        {"fixed_mu", num(fixed_mu)},
        {"seed", std::to_string(seed)},
        {"jobs", std::to_string(jobs)},
    };
}

namespace {

int parse_int(const std::string& key, const std::string& v) {
    int out = 0;
    auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc() || res.ptr != v.data() + v.size())
        throw M3dError("config: bad integer for " + key + ": '" + v + "'");
    return out;
}

double parse_real(const std::string& key, const std::string& v) {
    double out = 0;
    auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc() || res.ptr != v.data() + v.size())
        throw M3dError("config: bad number for " + key + ": '" + v + "'");
    return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    throw M3dError("config: bad boolean for " + key + ": '" + v + "'");
}

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r");
    auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? "" : s.substr(b, e - b + 1);
}

}  // namespace

void apply_config_entry(PipelineConfig& cfg, const std::string& key, const std::string& value) {
    if (key == "d_tca") cfg.d_tca = parse_int(key, value);
    else if (key == "q") cfg.q = parse_int(key, value);
    else if (key == "reduction") cfg.reduction = reduction_from_string(value);
    else if (key == "use_gfk") cfg.use_gfk = parse_bool(key, value);
    else if (key == "tca_kernel") cfg.tca_kernel = kernel_from_string(value);
    else if (key == "tca_bandwidth") cfg.tca_bandwidth = parse_real(key, value);
    else if (key == "tca_regularizer") cfg.tca_regularizer = parse_real(key, value);
    else if (key == "kernel") cfg.kernel = kernel_from_string(value);
    else if (key == "bandwidth") cfg.bandwidth = parse_real(key, value);
    else if (key == "eta") cfg.eta = parse_real(key, value);
    else if (key == "lambda") cfg.lambda = parse_real(key, value);
    else if (key == "rho") cfg.rho = parse_real(key, value);
    else if (key == "p") cfg.p = parse_int(key, value);
    else if (key == "l") cfg.l = parse_int(key, value);
    else if (key == "init_classifier") cfg.init_classifier = weak_from_string(value);
    else if (key == "knn_k") cfg.knn_k = parse_int(key, value);
    else if (key == "tree_max_depth") cfg.tree_max_depth = parse_int(key, value);
    else if (key == "ensemble") cfg.ensemble = ensemble_from_string(value);
    else if (key == "linkage") cfg.linkage = linkage_from_string(value);
    else if (key == "decay") cfg.decay = parse_real(key, value);
    else if (key == "fixed_mu") cfg.fixed_mu = parse_real(key, value);
    else if (key == "seed") cfg.seed = static_cast<std::uint64_t>(parse_real(key, value));
    else if (key == "jobs") cfg.jobs = parse_int(key, value);
    else throw M3dError("config: unknown key '" + key + "'");
}

PipelineConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw M3dError("cannot open config file " + path);
    PipelineConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw M3dError("config: line " + std::to_string(lineno) +
                           " is not a key = value pair");
        apply_config_entry(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    cfg.validate();
    return cfg;
}

}  // namespace m3d
