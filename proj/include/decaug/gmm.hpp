#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include "decaug/pose.hpp"
#include "decaug/rng.hpp"

namespace decaug {

/// Symmetric 2x2 matrix [[xx, xy], [xy, yy]].
struct Cov2 {
    double xx = 1.0;
    double xy = 0.0;
    double yy = 1.0;

    double det() const { return xx * yy - xy * xy; }
    friend bool operator==(const Cov2&, const Cov2&) = default;
};

/// Lower Cholesky factor; nullopt unless positive definite.
struct Chol2 {
    double l11, l21, l22;
};

inline std::optional<Chol2> cholesky(const Cov2& c) {
    if (!(c.xx > 0.0)) return std::nullopt;
    const double l11 = std::sqrt(c.xx);
    const double l21 = c.xy / l11;
    const double rest = c.yy - l21 * l21;
    if (!(rest > 0.0)) return std::nullopt;
    return Chol2{l11, l21, std::sqrt(rest)};
}

struct Gaussian2 {
    double weight = 1.0;
    Vec2 mean;
    Cov2 cov;

    double log_pdf(Vec2 p) const {
        const double dx = p.x - mean.x, dy = p.y - mean.y;
        const double det = cov.det();
        const double q = (cov.yy * dx * dx - 2.0 * cov.xy * dx * dy + cov.xx * dy * dy) / det;
        return -0.5 * q - 0.5 * std::log(det) - std::log(2.0 * std::numbers::pi);
    }

    Vec2 sample(Rng& rng) const {
        auto l = cholesky(cov);
        const double z1 = standard_normal(rng), z2 = standard_normal(rng);
        if (!l) return mean;
        return {mean.x + l->l11 * z1, mean.y + l->l21 * z1 + l->l22 * z2};
    }
};

inline double log_sum_exp(std::span<const double> v) {
    double m = -std::numeric_limits<double>::infinity();
    for (double x : v) m = std::max(m, x);
    if (!std::isfinite(m)) return m;
    double s = 0.0;
    for (double x : v) s += std::exp(x - m);
    return m + std::log(s);
}

/// Total log-likelihood of `points` under a mixture.
inline double mixture_log_likelihood(std::span<const Gaussian2> mix, std::span<const Vec2> points) {
    std::vector<double> terms(mix.size());
    double ll = 0.0;
    for (const auto& p : points) {
        for (std::size_t j = 0; j < mix.size(); ++j) terms[j] = std::log(mix[j].weight) + mix[j].log_pdf(p);
        ll += log_sum_exp(terms);
    }
    return ll;
}

struct EmOptions {
    int max_iterations = 200;
    double tolerance = 1e-8;       // stop when the log-likelihood gain falls below this
    double regularization = 1e-6;  // added to every covariance diagonal in the M-step
};

struct EmResult {
    std::vector<Gaussian2> components;
    std::vector<double> log_likelihood;  // one entry per evaluated parameter set, initial first
    std::vector<std::size_t> origin;     // index into the starting mixture for each survivor
    int iterations = 0;
};

/// Full-covariance EM on 2-D points from the given starting mixture. Components whose
/// soft count vanishes are dropped.
inline EmResult fit_gmm_em(std::span<const Vec2> points, std::vector<Gaussian2> init, const EmOptions& opts = {}) {
    EmResult out;
    out.components = std::move(init);
    for (std::size_t j = 0; j < out.components.size(); ++j) out.origin.push_back(j);
    if (points.empty() || out.components.empty()) return out;
    const std::size_t n = points.size();

    std::vector<double> resp;
    auto e_step = [&](const std::vector<Gaussian2>& mix) {
        const std::size_t k = mix.size();
        resp.assign(n * k, 0.0);
        std::vector<double> terms(k);
        double ll = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < k; ++j) terms[j] = std::log(mix[j].weight) + mix[j].log_pdf(points[i]);
            const double lse = log_sum_exp(terms);
            ll += lse;
            for (std::size_t j = 0; j < k; ++j) resp[i * k + j] = std::exp(terms[j] - lse);
        }
        return ll;
    };

    double ll = e_step(out.components);
    out.log_likelihood.push_back(ll);
    for (int iter = 0; iter < opts.max_iterations; ++iter) {
        const std::size_t k = out.components.size();
        std::vector<Gaussian2> next;
        std::vector<std::size_t> origin;
        next.reserve(k);
        for (std::size_t j = 0; j < k; ++j) {
            double nj = 0.0, mx = 0.0, my = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double r = resp[i * k + j];
                nj += r;
                mx += r * points[i].x;
                my += r * points[i].y;
            }
            if (!(nj > 1e-12)) continue;
            origin.push_back(out.origin[j]);
            mx /= nj;
            my /= nj;
            double sxx = 0.0, sxy = 0.0, syy = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double r = resp[i * k + j];
                const double dx = points[i].x - mx, dy = points[i].y - my;
                sxx += r * dx * dx;
                sxy += r * dx * dy;
                syy += r * dy * dy;
            }
            next.push_back({nj / static_cast<double>(n), {mx, my},
                            {sxx / nj + opts.regularization, sxy / nj, syy / nj + opts.regularization}});
        }
        double wsum = 0.0;
        for (const auto& g : next) wsum += g.weight;
        for (auto& g : next) g.weight /= wsum;

        // The regularised M-step is not an exact maximiser, so an update can lower the
        // likelihood near a collapsing component. Such a step is rejected and EM stops.
        const double next_ll = e_step(next);
        if (next_ll < ll) break;
        out.components = std::move(next);
        out.origin = std::move(origin);
        out.log_likelihood.push_back(next_ll);
        out.iterations = iter + 1;
        const double gain = next_ll - ll;
        ll = next_ll;
        if (gain < opts.tolerance) break;
    }
    return out;
}

}  // namespace decaug
