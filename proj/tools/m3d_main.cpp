#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "m3d/analysis.hpp"
#include "m3d/config.hpp"
#include "m3d/dataset.hpp"
#include "m3d/evaluation.hpp"

namespace fs = std::filesystem;
using namespace m3d;

namespace {

/// Input problems the user can fix (missing file, bad key): exit code 2.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void require_file(const std::string& path) {
    if (!fs::exists(path)) throw UsageError("input file does not exist: " + path);
}

fs::path ensure_out_dir(const std::string& out) {
    fs::path dir(out);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw UsageError("cannot create output directory " + out + ": " + ec.message());
    return dir;
}

PipelineConfig assemble_config(const std::string& config_path,
                               const std::vector<std::string>& overrides) {
    PipelineConfig cfg;
    if (!config_path.empty()) {
        require_file(config_path);
        try {
            cfg = load_config_file(config_path);
        } catch (const M3dError& e) {
            throw UsageError(e.what());
        }
    }
    for (const auto& kv : overrides) {
        auto eq = kv.find('=');
        if (eq == std::string::npos)
            throw UsageError("--set expects key=value, got '" + kv + "'");
        try {
            apply_config_entry(cfg, kv.substr(0, eq), kv.substr(eq + 1));
        } catch (const M3dError& e) {
            throw UsageError(e.what());
        }
    }
    try {
        cfg.validate();
    } catch (const M3dError& e) {
        throw UsageError(e.what());
    }
    return cfg;
}

nlohmann::json echo_json(const PipelineConfig& cfg) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [k, v] : cfg.echo()) j[k] = v;
    return j;
}

std::vector<Variant> parse_variants(const std::string& csv) {
    std::vector<Variant> out;
    std::string cur;
    std::istringstream is(csv);
    while (std::getline(is, cur, ',')) {
        if (cur.empty()) continue;
        try {
            out.push_back(variant_from_string(cur));
        } catch (const M3dError& e) {
            throw UsageError(e.what());
        }
    }
    if (out.empty()) throw UsageError("no variants given");
    return out;
}

void write_scores_csv(const Matrix& scores, const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw M3dError("cannot write " + path.string());
    out << "index";
    for (Eigen::Index c = 0; c < scores.cols(); ++c) out << ",score" << c;
    out << '\n';
    char buf[40];
    for (Eigen::Index i = 0; i < scores.rows(); ++i) {
        out << i;
        for (Eigen::Index c = 0; c < scores.cols(); ++c) {
            std::snprintf(buf, sizeof buf, "%.17g", scores(i, c));
            out << ',' << buf;
        }
        out << '\n';
    }
}

struct SynthArgs {
    std::uint64_t seed = 0;
    int n_per_class = 100;
    int classes = 3;
    double shift = 3.0;
    double rotation = 0.4;
    double noise = 0.8;
    int dim = 6;
    int subjects = 0;  // 0 = emit a source/target pair
    int sessions = 1;
    std::string out;
};

int cmd_synth(const SynthArgs& a) {
    fs::path dir = ensure_out_dir(a.out);
    nlohmann::json echo{{"seed", a.seed},       {"n_per_class", a.n_per_class},
                        {"classes", a.classes}, {"shift", a.shift},
                        {"rotation", a.rotation}, {"noise", a.noise},
                        {"dim", a.dim},         {"subjects", a.subjects},
                        {"sessions", a.sessions}};
    if (a.subjects > 0) {
        auto ds = synth_subjects(a.seed, a.subjects, a.n_per_class, a.classes, a.shift,
                                 a.rotation, a.noise, a.dim, a.sessions);
        save_dataset(ds, (dir / "dataset.csv").string(), FileFormat::csv);
        std::cout << "wrote " << (dir / "dataset.csv").string() << " (" << ds.num_samples()
                  << " samples)\n";
    } else {
        auto pair = synth_domain_shift(a.seed, a.n_per_class, a.classes, a.shift, a.rotation,
                                       a.noise, a.dim);
        save_dataset(pair.source, (dir / "source.csv").string(), FileFormat::csv);
        save_dataset(pair.target, (dir / "target.csv").string(), FileFormat::csv);
        std::cout << "wrote " << (dir / "source.csv").string() << " and "
                  << (dir / "target.csv").string() << '\n';
    }
    std::ofstream cfg(dir / "synth_config.json");
    cfg << echo.dump(2) << '\n';
    return 0;
}

int cmd_convert(const std::string& in, const std::string& out) {
    require_file(in);
    auto ds = load_dataset(in, format_from_path(in));
    save_dataset(ds, out, format_from_path(out));
    std::cout << "wrote " << out << '\n';
    return 0;
}

int cmd_run(const std::string& source_path, const std::string& target_path,
            const std::string& out, const PipelineConfig& cfg, const std::string& variant_name,
            bool dump_similarity) {
    require_file(source_path);
    require_file(target_path);
    Variant variant = Variant::full;
    if (!variant_name.empty()) {
        try {
            variant = variant_from_string(variant_name);
        } catch (const M3dError& e) {
            throw UsageError(e.what());
        }
    }
    fs::path dir = ensure_out_dir(out);

    DomainPair pair;
    pair.source = load_dataset(source_path, format_from_path(source_path));
    pair.target = load_dataset(target_path, format_from_path(target_path));
    pair.source.class_count = pair.target.class_count =
        std::max(pair.source.class_count, pair.target.class_count);
    pair.validate();

    auto res = run_pair(pair, cfg, variant, dump_similarity);

    if (dump_similarity) {
        if (res.similarity.size() == 0)
            throw UsageError("--dump-similarity requires the linkclue ensemble method");
        write_similarity_csv(res.similarity, (dir / "similarity.csv").string());
    }

    nlohmann::json j;
    j["variant"] = to_string(variant);
    j["config"] = echo_json(cfg);
    j["seconds"] = res.seconds;
    nlohmann::json mu = nlohmann::json::array(), churn = nlohmann::json::array();
    for (const auto& t : res.trace) {
        mu.push_back(t.mu);
        churn.push_back(t.churn);
    }
    j["mu_trajectory"] = mu;
    j["pseudo_label_churn"] = churn;
    if (res.has_metrics) {
        j["metrics"] = {{"accuracy", res.metrics.accuracy},
                        {"sensitivity", res.metrics.sensitivity},
                        {"specificity", res.metrics.specificity},
                        {"precision", res.metrics.precision},
                        {"f1", res.metrics.f1},
                        {"npv", res.metrics.npv}};
        if (res.metrics.auroc_valid) j["metrics"]["auroc"] = res.metrics.auroc;
    }
    std::ofstream rj(dir / "report.json");
    rj << j.dump(2) << '\n';
    write_predictions_csv(res, pair.target.labels, (dir / "predictions.csv").string());
    write_scores_csv(res.mean_scores, dir / "scores.csv");
    if (res.has_metrics) std::cout << "target accuracy: " << res.metrics.accuracy << '\n';
    std::cout << "wrote " << (dir / "report.json").string() << '\n';
    return 0;
}

int cmd_loso(const std::string& data_path, const std::string& protocol_name,
             const std::string& out, const PipelineConfig& cfg,
             const std::string& variants_csv) {
    require_file(data_path);
    Protocol protocol;
    try {
        protocol = protocol_from_string(protocol_name);
    } catch (const M3dError& e) {
        throw UsageError(e.what());
    }
    std::vector<Variant> variants = {Variant::full};
    if (!variants_csv.empty()) variants = parse_variants(variants_csv);
    fs::path dir = ensure_out_dir(out);

    auto ds = load_dataset(data_path, format_from_path(data_path));
    auto plan = make_loso_splits(ds, protocol);
    auto reports = ablation_matrix(ds, plan, cfg, variants);

    write_summary_csv(reports, (dir / "summary.csv").string());
    nlohmann::json all = nlohmann::json::array();
    for (std::size_t i = 0; i < reports.size(); ++i) {
        auto path = dir / (reports.size() == 1 ? std::string("report.json")
                                               : "report-" + reports[i].variant + ".json");
        write_report_json(reports[i], path.string());
        all.push_back(nlohmann::json{{"variant", reports[i].variant},
                                     {"mean_accuracy", reports[i].mean.accuracy},
                                     {"std_accuracy", reports[i].stddev.accuracy},
                                     {"failed_folds", reports[i].failed_folds}});
        std::cout << "== variant " << reports[i].variant << " ==\n"
                  << format_summary_table(reports[i]);
    }
    if (reports.size() > 1) {
        std::ofstream idx(dir / "report.json");
        nlohmann::json j{{"config", echo_json(cfg)}, {"variants", all}};
        idx << j.dump(2) << '\n';
    }
    std::cout << "wrote " << (dir / "summary.csv").string() << '\n';
    return 0;
}

int cmd_analyze_mi(const std::string& features_path, const std::string& scores_path, int k,
                   const std::string& out) {
    require_file(features_path);
    require_file(scores_path);
    fs::path dir = ensure_out_dir(out);
    auto ds = load_dataset(features_path, format_from_path(features_path));

    // scores.csv: index,score0,...,score{C-1}
    std::ifstream in(scores_path);
    std::string line;
    if (!std::getline(in, line)) throw UsageError("empty scores file: " + scores_path);
    std::vector<std::vector<double>> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::istringstream is(line);
        std::string tok;
        bool first = true;
        while (std::getline(is, tok, ',')) {
            if (first) {
                first = false;
                continue;
            }
            row.push_back(std::stod(tok));
        }
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw UsageError("no score rows in " + scores_path);
    Matrix scores(static_cast<Eigen::Index>(rows.size()),
                  static_cast<Eigen::Index>(rows.front().size()));
    for (Eigen::Index i = 0; i < scores.rows(); ++i)
        for (Eigen::Index j = 0; j < scores.cols(); ++j)
            scores(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    if (scores.rows() != ds.num_samples())
        throw UsageError("scores row count does not match the feature file");

    auto mi = mi_map(ds.features, scores, k, ds.feature_names);
    write_mi_csv(mi, (dir / "mi.csv").string());
    write_mi_json(mi, (dir / "mi.json").string());
    std::ofstream echo(dir / "analysis_config.json");
    echo << nlohmann::json{{"command", "analyze mi"},
                           {"features", features_path},
                           {"scores", scores_path},
                           {"neighbors", k}}
                .dump(2)
         << '\n';
    std::cout << "wrote " << (dir / "mi.csv").string() << " (" << mi.values.rows() << " x "
              << mi.values.cols() << ")\n";
    return 0;
}

int cmd_analyze_tests(const std::string& data_path, int emotion, const std::string& out) {
    require_file(data_path);
    fs::path dir = ensure_out_dir(out);
    auto ds = load_dataset(data_path, format_from_path(data_path));
    auto tm = pairwise_tests(ds, emotion);
    write_tests_csv(tm, (dir / "tests.csv").string());
    write_tests_json(tm, (dir / "tests.json").string());
    std::ofstream echo(dir / "analysis_config.json");
    echo << nlohmann::json{{"command", "analyze tests"},
                           {"data", data_path},
                           {"emotion", emotion}}
                .dump(2)
         << '\n';
    std::cout << "wrote " << (dir / "tests.csv").string() << " (" << tm.subjects.size()
              << " subjects)\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"M3D: manifold-based domain adaptation with dynamic distribution alignment"};
    app.require_subcommand(1);

    std::string config_path;
    std::vector<std::string> overrides;
    app.add_option("--config", config_path, "flat key = value config file");
    app.add_option("--set", overrides, "override a config key (key=value), repeatable");

    SynthArgs synth;
    auto* s = app.add_subcommand("synth", "generate a synthetic benchmark dataset");
    s->add_option("--seed", synth.seed);
    s->add_option("--n-per-class", synth.n_per_class);
    s->add_option("--classes", synth.classes);
    s->add_option("--shift", synth.shift);
    s->add_option("--rotation", synth.rotation);
    s->add_option("--noise", synth.noise);
    s->add_option("--dim", synth.dim);
    s->add_option("--subjects", synth.subjects,
                  "emit one multi-subject dataset instead of a pair");
    s->add_option("--sessions", synth.sessions);
    s->add_option("--out", synth.out)->required();

    std::string conv_in, conv_out;
    auto* c = app.add_subcommand("convert", "convert a dataset between csv and binary");
    c->add_option("--in", conv_in)->required();
    c->add_option("--out", conv_out)->required();

    std::string run_source, run_target, run_out, run_variant;
    bool run_dump_similarity = false;
    auto* r = app.add_subcommand("run", "run the pipeline on one source/target pair");
    r->add_option("--source", run_source)->required();
    r->add_option("--target", run_target)->required();
    r->add_option("--out", run_out)->required();
    r->add_option("--ablate", run_variant, "run an ablation variant instead of full");
    r->add_flag("--dump-similarity", run_dump_similarity,
                "also write the consensus similarity matrix (linkclue only)");

    std::string loso_data, loso_protocol = "single-session", loso_out, loso_variants;
    int loso_jobs = 0;
    auto* lo = app.add_subcommand("loso", "leave-one-subject-out protocol sweep");
    lo->add_option("--data", loso_data)->required();
    lo->add_option("--protocol", loso_protocol, "single-session | cross-session | ten-fold");
    lo->add_option("--out", loso_out)->required();
    lo->add_option("--variants", loso_variants, "comma-separated ablation variants");
    lo->add_option("--jobs", loso_jobs, "folds to run concurrently (default 1)");

    std::string abl_data, abl_protocol = "single-session", abl_out, abl_variants;
    int abl_jobs = 0;
    auto* ab = app.add_subcommand("ablate", "run the ablation matrix over a protocol");
    ab->add_option("--data", abl_data)->required();
    ab->add_option("--protocol", abl_protocol);
    ab->add_option("--out", abl_out)->required();
    ab->add_option("--variants", abl_variants)->required();
    ab->add_option("--jobs", abl_jobs, "folds to run concurrently (default 1)");

    auto* an = app.add_subcommand("analyze", "post-run analysis exports");
    an->require_subcommand(1);
    std::string mi_features, mi_scores, mi_out;
    int mi_k = 3;
    auto* mi = an->add_subcommand("mi", "mutual-information map (class x feature)");
    mi->add_option("--features", mi_features, "target-domain dataset file")->required();
    mi->add_option("--scores", mi_scores, "scores.csv from a run")->required();
    mi->add_option("--out", mi_out)->required();
    mi->add_option("--neighbors", mi_k);
    std::string tests_data, tests_out;
    int tests_emotion = -1;
    auto* ts = an->add_subcommand("tests", "subject-pair hypothesis tests");
    ts->add_option("--data", tests_data)->required();
    ts->add_option("--emotion", tests_emotion, "restrict to one class label (-1 = all)");
    ts->add_option("--out", tests_out)->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (s->parsed()) return cmd_synth(synth);
        if (c->parsed()) return cmd_convert(conv_in, conv_out);
        PipelineConfig cfg = assemble_config(config_path, overrides);
        if (r->parsed())
            return cmd_run(run_source, run_target, run_out, cfg, run_variant,
                           run_dump_similarity);
        if (lo->parsed()) {
            if (loso_jobs > 0) cfg.jobs = loso_jobs;
            return cmd_loso(loso_data, loso_protocol, loso_out, cfg, loso_variants);
        }
        if (ab->parsed()) {
            if (abl_jobs > 0) cfg.jobs = abl_jobs;
            return cmd_loso(abl_data, abl_protocol, abl_out, cfg, abl_variants);
        }
        if (mi->parsed()) return cmd_analyze_mi(mi_features, mi_scores, mi_k, mi_out);
        if (ts->parsed()) return cmd_analyze_tests(tests_data, tests_emotion, tests_out);
        throw UsageError("no subcommand selected");
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
