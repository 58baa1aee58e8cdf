// Benchmark of the OpenMP pairwise kernels against the serial reference.
// Usage: bench_kernels [n] [d] [reps]

#include <omp.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <random>

#include "m3d/ensemble.hpp"
#include "m3d/pairwise.hpp"

using namespace m3d;
using clock_type = std::chrono::steady_clock;

namespace {

double time_ms(const std::function<void()>& fn, int reps) {
    double best = 1e300;
    for (int r = 0; r < reps; ++r) {
        auto t0 = clock_type::now();
        fn();
        auto t1 = clock_type::now();
        best = std::min(best, std::chrono::duration<double, std::milli>(t1 - t0).count());
    }
    return best;
}

}  // namespace

int main(int argc, char** argv) {
    const int n = argc > 1 ? std::atoi(argv[1]) : 1500;
    const int d = argc > 2 ? std::atoi(argv[2]) : 64;
    const int reps = argc > 3 ? std::atoi(argv[3]) : 3;

    std::mt19937_64 rng(1);
    std::normal_distribution<double> gauss;
    Matrix x(n, d);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < d; ++j) x(i, j) = gauss(rng);

    Matrix d2 = serial::pairwise_sqdist(x);
    BaseEnsemble ens;
    ens.class_count = 3;
    ens.base_labelings.resize(10, n);
    std::uniform_int_distribution<int> lab(0, 2);
    for (Eigen::Index t = 0; t < 10; ++t)
        for (Eigen::Index j = 0; j < n; ++j) ens.base_labelings(t, j) = lab(rng);

    std::printf("n=%d d=%d threads=%d reps=%d (best-of)\n", n, d, omp_get_max_threads(),
                reps);
    std::printf("%-22s %12s %12s %8s\n", "kernel", "serial ms", "openmp ms", "speedup");

    struct Row {
        const char* name;
        std::function<void()> serial_fn;
        std::function<void()> parallel_fn;
    };
    Matrix sink;
    Eigen::MatrixXi isink;
    const Row rows[] = {
        {"pairwise_sqdist", [&] { sink = serial::pairwise_sqdist(x); },
         [&] { sink = par::pairwise_sqdist(x); }},
        {"gram", [&] { sink = serial::gram(x); }, [&] { sink = par::gram(x); }},
        {"rbf_from_sqdist", [&] { sink = serial::rbf_from_sqdist(d2, 1.0); },
         [&] { sink = par::rbf_from_sqdist(d2, 1.0); }},
        {"cosine_similarity", [&] { sink = serial::cosine_similarity(x); },
         [&] { sink = par::cosine_similarity(x); }},
        {"knn_from_sqdist(p=10)", [&] { isink = serial::knn_from_sqdist(d2, 10); },
         [&] { isink = par::knn_from_sqdist(d2, 10); }},
        {"cts_similarity(l=10)", [&] { sink = cts_similarity(ens, 0.8); },
         [&] { sink = cts_similarity(ens, 0.8); }},
    };
    const int max_threads = omp_get_max_threads();
    for (const auto& row : rows) {
        omp_set_num_threads(1);  // cts has a single implementation; pin it serial
        double ts = time_ms(row.serial_fn, reps);
        omp_set_num_threads(max_threads);
        double tp = time_ms(row.parallel_fn, reps);
        std::printf("%-22s %12.2f %12.2f %7.2fx\n", row.name, ts, tp, ts / tp);
    }
    return 0;
}
