#include "m3d/pipeline.hpp"

#include <Eigen/SparseCore>

#include <algorithm>
#include <cmath>

#include "m3d/matrix_io.hpp"

namespace m3d {

namespace {

struct Transformed {
    Matrix z_source, z_target;
    std::optional<ManifoldModel> manifold;
    int resolved_d = 0;
    int resolved_q = 0;
};

int resolve_d(const PipelineConfig& cfg, Eigen::Index total, Eigen::Index dim) {
    int bound = static_cast<int>(std::min(total, dim));
    if (cfg.d_tca == 0) return std::min(128, bound);
    if (cfg.d_tca > bound)
        throw M3dError("d_tca = " + std::to_string(cfg.d_tca) +
                       " exceeds min(n+m, D) = " + std::to_string(bound));
    return cfg.d_tca;
}

Transformed transform_features(const DomainPair& pair, const PipelineConfig& cfg) {
    Transformed out;
    if (cfg.reduction == Reduction::none) {
        out.z_source = pair.source.features;
        out.z_target = pair.target.features;
        out.resolved_d = static_cast<int>(out.z_source.cols());
        return out;
    }

    const Eigen::Index n = pair.source.num_samples(), m = pair.target.num_samples();
    int d = resolve_d(cfg, n + m, pair.source.num_features());
    Matrix reduced_s, reduced_t;
    ManifoldModel model;
    if (cfg.reduction == Reduction::tca) {
        KernelConfig kc{cfg.tca_kernel, cfg.tca_bandwidth};
        model.tca = fit_tca(pair, d, kc, cfg.tca_regularizer);
        reduced_s = model.tca.embedded.topRows(n);
        reduced_t = model.tca.embedded.bottomRows(m);
    } else {
        Matrix pooled(n + m, pair.source.num_features());
        pooled << pair.source.features, pair.target.features;
        PcaModel pca = fit_pca(pooled, d);
        reduced_s = pca.transform(pair.source.features);
        reduced_t = pca.transform(pair.target.features);
    }
    out.resolved_d = d;

    if (cfg.use_gfk) {
        int q = cfg.q == 0 ? std::max(1, d / 2) : cfg.q;
        model.gfk = fit_gfk(reduced_s, reduced_t, q);
        out.resolved_q = model.gfk.q;
        out.z_source = model.gfk.transform_rows(reduced_s);
        out.z_target = model.gfk.transform_rows(reduced_t);
    } else {
        out.z_source = reduced_s;
        out.z_target = reduced_t;
    }
    if (cfg.reduction == Reduction::tca) out.manifold = std::move(model);
    return out;
}

std::vector<int> hard_labels(const Matrix& scores) {
    std::vector<int> out(static_cast<std::size_t>(scores.rows()));
    for (Eigen::Index i = 0; i < scores.rows(); ++i)
        out[static_cast<std::size_t>(i)] = argmax_row(scores.row(i));
    return out;
}

}  // namespace

M3dRun run_manifold_only(const DomainPair& pair, const PipelineConfig& config) {
    config.validate();
    pair.validate();
    M3dRun run;
    Transformed tf = transform_features(pair, config);
    run.z_source = std::move(tf.z_source);
    run.z_target = std::move(tf.z_target);
    run.manifold = std::move(tf.manifold);
    run.resolved_d = tf.resolved_d;
    run.resolved_q = tf.resolved_q;

    WeakParams wp{config.knn_k, config.tree_max_depth};
    run.weak_scores = weak_classifier_fit_predict(config.init_classifier, run.z_source,
                                                  pair.source.labels, pair.class_count(),
                                                  run.z_target, wp);
    auto hard = hard_labels(run.weak_scores);
    run.ensemble.class_count = pair.class_count();
    run.ensemble.base_labelings.resize(1, run.z_target.rows());
    for (Eigen::Index j = 0; j < run.z_target.rows(); ++j)
        run.ensemble.base_labelings(0, j) = hard[static_cast<std::size_t>(j)];
    run.ensemble.base_scores.push_back(run.weak_scores);
    return run;
}

M3dRun run_m3d(const DomainPair& pair, const PipelineConfig& config) {
    config.validate();
    pair.validate();
    const Eigen::Index n = pair.source.num_samples();
    const Eigen::Index m = pair.target.num_samples();
    const int c = pair.class_count();
    if (c < 2) throw M3dError("run_m3d: need at least 2 classes");

    M3dRun run;
    Transformed tf = transform_features(pair, config);
    run.z_source = std::move(tf.z_source);
    run.z_target = std::move(tf.z_target);
    run.manifold = std::move(tf.manifold);
    run.resolved_d = tf.resolved_d;
    run.resolved_q = tf.resolved_q;

    Matrix z(n + m, run.z_source.cols());
    z << run.z_source, run.z_target;

    // Lines 2-3: weak initializer and the fixed kernel/graph.
    WeakParams wp{config.knn_k, config.tree_max_depth};
    run.weak_scores = weak_classifier_fit_predict(config.init_classifier, run.z_source,
                                                  pair.source.labels, c, run.z_target, wp);
    std::vector<int> pseudo = hard_labels(run.weak_scores);

    KernelConfig kc{config.kernel, config.bandwidth};
    run.kernel = build_kernel(z, kc);
    GraphConfig gc{std::min<int>(config.p, static_cast<int>(n + m) - 1)};
    run.graph = build_laplacian(z, gc);

    Vector a_diag = Vector::Zero(n + m);
    a_diag.head(n).setOnes();
    Matrix rhs = Matrix::Zero(n + m, c);  // A Y^T; target columns of Y are zero
    for (Eigen::Index i = 0; i < n; ++i)
        rhs(i, pair.source.labels[static_cast<std::size_t>(i)]) = 1.0;

    // (lambda M + rho L) K + A K + eta I, with L K precomputed and M applied
    // through its rank-(C+1) block structure.
    Matrix lk;
    if (config.rho != 0.0)
        lk = Eigen::SparseMatrix<double>(run.graph.l.sparseView()) * run.kernel;

    run.ensemble.class_count = c;
    run.ensemble.base_labelings.resize(config.l, m);

    for (int iter = 1; iter <= config.l; ++iter) {
        double mu, d_marginal = 0.0;
        if (config.fixed_mu >= 0.0) {
            mu = config.fixed_mu;
        } else {
            MuEstimate est = estimate_mu(
                run.z_source, pair.source.labels, run.z_target, pseudo, c,
                derive_seed(config.seed, SeedStage::a_distance,
                            static_cast<std::uint64_t>(iter)));
            mu = est.mu;
            d_marginal = est.d_marginal;
        }

        Matrix system = Matrix::Identity(n + m, n + m) * config.eta;
        system.topRows(n) += run.kernel.topRows(n);  // A K
        if (config.rho != 0.0) system += config.rho * lk;
        if (config.lambda != 0.0) {
            // M K as weighted sum of u (u^T K) outer products.
            auto add_rank1 = [&](const Vector& u, double weight) {
                if (weight == 0.0) return;
                Eigen::RowVectorXd utk = u.transpose() * run.kernel;
                system.noalias() += (config.lambda * weight) * u * utk;
            };
            Vector u0(n + m);
            u0.head(n).setConstant(1.0 / static_cast<double>(n));
            u0.tail(m).setConstant(-1.0 / static_cast<double>(m));
            add_rank1(u0, 1.0 - mu);
            for (int cls = 0; cls < c; ++cls) {
                Eigen::Index nc = 0, mc = 0;
                for (int y : pair.source.labels) nc += (y == cls);
                for (int y : pseudo) mc += (y == cls);
                if (nc == 0 || mc == 0) continue;
                Vector uc = Vector::Zero(n + m);
                for (Eigen::Index i = 0; i < n; ++i)
                    if (pair.source.labels[static_cast<std::size_t>(i)] == cls)
                        uc[i] = 1.0 / static_cast<double>(nc);
                for (Eigen::Index j = 0; j < m; ++j)
                    if (pseudo[static_cast<std::size_t>(j)] == cls)
                        uc[n + j] = -1.0 / static_cast<double>(mc);
                add_rank1(uc, mu);
            }
        }

        Eigen::PartialPivLU<Matrix> lu(system);
        double rcond = lu.rcond();
        if (!(rcond > 1e-12))
            throw M3dError("run_m3d: iteration " + std::to_string(iter) +
                           " system ill-conditioned (rcond=" + std::to_string(rcond) +
                           "); increase eta");
        run.beta = lu.solve(rhs);

        Matrix scores = run.kernel * run.beta;  // f over all samples
        Matrix target_scores = scores.bottomRows(m);
        std::vector<int> next = hard_labels(target_scores);

        IterationTrace t;
        t.mu = mu;
        t.d_marginal = d_marginal;
        t.residual = (system * run.beta - rhs).norm() / std::max(rhs.norm(), 1e-300);
        Eigen::Index changed = 0;
        for (Eigen::Index j = 0; j < m; ++j)
            changed += next[static_cast<std::size_t>(j)] != pseudo[static_cast<std::size_t>(j)];
        t.churn = static_cast<double>(changed) / static_cast<double>(m);
        run.trace.push_back(t);

        for (Eigen::Index j = 0; j < m; ++j)
            run.ensemble.base_labelings(iter - 1, j) = next[static_cast<std::size_t>(j)];
        run.ensemble.base_scores.push_back(target_scores);
        pseudo = std::move(next);
    }
    return run;
}

void save_m3d_run(const M3dRun& run, const std::string& path,
                  const std::string& config_echo) {
    io::NamedMatrices data;
    data.kind = "classifier";
    data.echo = config_echo;
    Matrix scalars(1, 3);
    scalars << static_cast<double>(run.ensemble.class_count),
        static_cast<double>(run.resolved_d), static_cast<double>(run.resolved_q);
    Matrix trace(static_cast<Eigen::Index>(run.trace.size()), 4);
    for (std::size_t t = 0; t < run.trace.size(); ++t)
        trace.row(static_cast<Eigen::Index>(t)) << run.trace[t].mu, run.trace[t].d_marginal,
            run.trace[t].churn, run.trace[t].residual;
    data.entries = {
        {"scalars", scalars},
        {"z_source", run.z_source},
        {"z_target", run.z_target},
        {"kernel", run.kernel},
        {"graph.w", run.graph.w},
        {"graph.l", run.graph.l},
        {"beta", run.beta},
        {"weak_scores", run.weak_scores},
        {"base_labelings", run.ensemble.base_labelings.cast<double>()},
        {"trace", trace},
    };
    for (std::size_t t = 0; t < run.ensemble.base_scores.size(); ++t)
        data.entries.emplace_back("scores." + std::to_string(t), run.ensemble.base_scores[t]);
    io::save_named_matrices(data, path);
}

M3dRun load_m3d_run(const std::string& path, std::string* config_echo) {
    io::NamedMatrices data = io::load_named_matrices(path, "classifier");
    if (config_echo) *config_echo = data.echo;
    M3dRun run;
    const Matrix& scalars = data.get("scalars");
    if (scalars.size() != 3) throw M3dError("classifier file missing scalar block: " + path);
    run.ensemble.class_count = static_cast<int>(scalars(0, 0));
    run.resolved_d = static_cast<int>(scalars(0, 1));
    run.resolved_q = static_cast<int>(scalars(0, 2));
    run.z_source = data.get("z_source");
    run.z_target = data.get("z_target");
    run.kernel = data.get("kernel");
    run.graph.w = data.get("graph.w");
    run.graph.l = data.get("graph.l");
    run.beta = data.get("beta");
    run.weak_scores = data.get("weak_scores");
    run.ensemble.base_labelings = data.get("base_labelings").cast<int>();
    const Matrix& trace = data.get("trace");
    for (Eigen::Index t = 0; t < trace.rows(); ++t)
        run.trace.push_back({trace(t, 0), trace(t, 1), trace(t, 2), trace(t, 3)});
    for (std::size_t t = 0; data.has("scores." + std::to_string(t)); ++t)
        run.ensemble.base_scores.push_back(data.get("scores." + std::to_string(t)));
    return run;
}

}  // namespace m3d
