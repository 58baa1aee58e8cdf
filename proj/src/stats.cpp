#include "m3d/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace m3d::stats {

double digamma(double x) {
    if (x <= 0 && x == std::floor(x)) throw M3dError("digamma pole at " + std::to_string(x));
    double result = 0.0;
    while (x < 10.0) {  // recurrence psi(x) = psi(x+1) - 1/x
        result -= 1.0 / x;
        x += 1.0;
    }
    // asymptotic series through the x^-8 term
    double inv = 1.0 / x, inv2 = inv * inv;
    result += std::log(x) - 0.5 * inv -
              inv2 * (1.0 / 12.0 -
                      inv2 * (1.0 / 120.0 - inv2 * (1.0 / 252.0 - inv2 / 240.0)));
    return result;
}

namespace {

double betacf(double a, double b, double x) {
    constexpr int kMaxIter = 300;
    constexpr double eps = 3e-15, fpmin = 1e-300;
    double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0, d = 1.0 - qab * x / qap;
    if (std::abs(d) < fpmin) d = fpmin;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < fpmin) d = fpmin;
        c = 1.0 + aa / c;
        if (std::abs(c) < fpmin) c = fpmin;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < fpmin) d = fpmin;
        c = 1.0 + aa / c;
        if (std::abs(c) < fpmin) c = fpmin;
        d = 1.0 / d;
        double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < eps) break;
    }
    return h;
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    double ln_bt = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) +
                   b * std::log1p(-x);
    double bt = std::exp(ln_bt);
    if (x < (a + 1.0) / (a + b + 2.0)) return bt * betacf(a, b, x) / a;
    return 1.0 - bt * betacf(b, a, 1.0 - x) / b;
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double student_t_two_sided(double t, double nu) {
    if (!std::isfinite(t)) return 0.0;
    double x = nu / (nu + t * t);
    return std::clamp(incomplete_beta(nu / 2.0, 0.5, x), 0.0, 1.0);
}

namespace {

double mean_of(const std::vector<double>& v) {
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double var_of(const std::vector<double>& v, double mean) {  // unbiased
    double acc = 0;
    for (double x : v) acc += (x - mean) * (x - mean);
    return acc / static_cast<double>(v.size() - 1);
}

}  // namespace

TestResult welch_t_test(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() < 2 || b.size() < 2) throw M3dError("welch_t_test: need >= 2 samples per group");
    double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    double ma = mean_of(a), mb = mean_of(b);
    double va = var_of(a, ma), vb = var_of(b, mb);
    double se2 = va / na + vb / nb;
    TestResult r;
    if (se2 == 0) {  // both groups constant
        r.statistic = ma == mb ? 0.0 : std::numeric_limits<double>::infinity();
        r.p_value = ma == mb ? 1.0 : 0.0;
        return r;
    }
    r.statistic = (ma - mb) / std::sqrt(se2);
    double nu = se2 * se2 /
                (va * va / (na * na * (na - 1.0)) + vb * vb / (nb * nb * (nb - 1.0)));
    r.p_value = student_t_two_sided(r.statistic, nu);
    return r;
}

TestResult rank_sum_test(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.empty() || b.empty()) throw M3dError("rank_sum_test: empty group");
    const std::size_t na = a.size(), nb = b.size(), n = na + nb;
    std::vector<std::pair<double, int>> pooled;
    pooled.reserve(n);
    for (double x : a) pooled.emplace_back(x, 0);
    for (double x : b) pooled.emplace_back(x, 1);
    std::sort(pooled.begin(), pooled.end(),
              [](const auto& l, const auto& r) { return l.first < r.first; });

    double rank_sum_a = 0, tie_term = 0;
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && pooled[j + 1].first == pooled[i].first) ++j;
        double avg_rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        double t = static_cast<double>(j - i + 1);
        tie_term += t * t * t - t;
        for (std::size_t k = i; k <= j; ++k)
            if (pooled[k].second == 0) rank_sum_a += avg_rank;
        i = j + 1;
    }

    double u = rank_sum_a - static_cast<double>(na) * (static_cast<double>(na) + 1.0) / 2.0;
    double mu = static_cast<double>(na) * static_cast<double>(nb) / 2.0;
    double var = static_cast<double>(na) * static_cast<double>(nb) / 12.0 *
                 ((static_cast<double>(n) + 1.0) -
                  tie_term / (static_cast<double>(n) * (static_cast<double>(n) - 1.0)));
    TestResult r;
    if (var <= 0) {  // all pooled values identical
        r.statistic = 0;
        r.p_value = 1.0;
        return r;
    }
    double diff = u - mu;
    double cc = diff > 0 ? -0.5 : diff < 0 ? 0.5 : 0.0;  // continuity correction
    r.statistic = (diff + cc) / std::sqrt(var);
    r.p_value = std::clamp(2.0 * normal_cdf(-std::abs(r.statistic)), 0.0, 1.0);
    return r;
}

TestResult dagostino_k2(const std::vector<double>& x) {
    const double n = static_cast<double>(x.size());
    if (x.size() < 8) throw M3dError("dagostino_k2: need n >= 8");
    double m = mean_of(x);
    double m2 = 0, m3 = 0, m4 = 0;
    for (double v : x) {
        double d = v - m;
        m2 += d * d;
        m3 += d * d * d;
        m4 += d * d * d * d;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    if (m2 == 0) {  // constant sample: maximally non-normal for our gate
        return {std::numeric_limits<double>::infinity(), 0.0};
    }

    // Skewness component (D'Agostino 1970).
    double b1 = m3 / std::pow(m2, 1.5);
    double y = b1 * std::sqrt((n + 1.0) * (n + 3.0) / (6.0 * (n - 2.0)));
    double beta2 = 3.0 * (n * n + 27.0 * n - 70.0) * (n + 1.0) * (n + 3.0) /
                   ((n - 2.0) * (n + 5.0) * (n + 7.0) * (n + 9.0));
    double w2 = -1.0 + std::sqrt(2.0 * (beta2 - 1.0));
    double delta = 1.0 / std::sqrt(std::log(std::sqrt(w2)));
    double alpha = std::sqrt(2.0 / (w2 - 1.0));
    double ya = y / alpha;
    double z1 = delta * std::log(ya + std::sqrt(ya * ya + 1.0));

    // Kurtosis component (Anscombe & Glynn 1983).
    double b2 = m4 / (m2 * m2);
    double eb2 = 3.0 * (n - 1.0) / (n + 1.0);
    double vb2 = 24.0 * n * (n - 2.0) * (n - 3.0) / ((n + 1.0) * (n + 1.0) * (n + 3.0) * (n + 5.0));
    double xx = (b2 - eb2) / std::sqrt(vb2);
    double sqrt_b1 = 6.0 * (n * n - 5.0 * n + 2.0) / ((n + 7.0) * (n + 9.0)) *
                     std::sqrt(6.0 * (n + 3.0) * (n + 5.0) / (n * (n - 2.0) * (n - 3.0)));
    double a = 6.0 + 8.0 / sqrt_b1 * (2.0 / sqrt_b1 + std::sqrt(1.0 + 4.0 / (sqrt_b1 * sqrt_b1)));
    double denom = 1.0 + xx * std::sqrt(2.0 / (a - 4.0));
    double z2;
    if (denom <= 0) {
        z2 = 0.0;  // far tail; K^2 already dominated by the skew term
    } else {
        z2 = ((1.0 - 2.0 / (9.0 * a)) - std::cbrt((1.0 - 2.0 / a) / denom)) /
             std::sqrt(2.0 / (9.0 * a));
    }

    TestResult r;
    r.statistic = z1 * z1 + z2 * z2;
    r.p_value = std::exp(-r.statistic / 2.0);  // chi-square survival, 2 dof
    return r;
}

}  // namespace m3d::stats
