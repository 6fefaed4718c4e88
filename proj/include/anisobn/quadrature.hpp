#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <queue>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "anisobn/errors.hpp"

namespace anisobn {

template <typename Scalar>
struct QuadResult {
    Scalar value{0};
    Scalar error{0};
    int evaluations{0};
    bool converged{true};
};

namespace detail {

// Kronrod 15-point abscissae on [-1, 1] (non-negative half) and weights, with the
// embedded 7-point Gauss weights on the odd-indexed nodes.
inline constexpr long double kronrod_x[8] = {
    0.991455371120812639206854697526329L, 0.949107912342758524526189684047851L,
    0.864864423359769072789712788640926L, 0.741531185599394439863864773280788L,
    0.586087235467691130294144845693013L, 0.405845151377397166906606412076961L,
    0.207784955007898467600689403773245L, 0.000000000000000000000000000000000L};
inline constexpr long double kronrod_w[8] = {
    0.022935322010529224963732008058970L, 0.063092092629978553290700663189204L,
    0.104790010322250183839876322541518L, 0.140653259715525918745189590510238L,
    0.169004726639267902826583426598550L, 0.190350578064785409913256402421014L,
    0.204432940075298892414161999234649L, 0.209482141084727828012999174891714L};
inline constexpr long double gauss7_w[4] = {
    0.129484966168869693270611432679082L, 0.279705391489276667901467771423780L,
    0.381830050505118944950369775488975L, 0.417959183673469387755102040816327L};

template <typename Scalar, typename F>
QuadResult<Scalar> gk15(const F& f, Scalar a, Scalar b) {
    const Scalar c = (a + b) / 2;
    const Scalar h = (b - a) / 2;
    const Scalar fc = f(c);
    Scalar kron = static_cast<Scalar>(kronrod_w[7]) * fc;
    Scalar gauss = static_cast<Scalar>(gauss7_w[3]) * fc;
    for (int i = 0; i < 7; ++i) {
        const Scalar dx = h * static_cast<Scalar>(kronrod_x[i]);
        const Scalar s = f(c - dx) + f(c + dx);
        kron += static_cast<Scalar>(kronrod_w[i]) * s;
        if (i % 2 == 1) gauss += static_cast<Scalar>(gauss7_w[i / 2]) * s;
    }
    QuadResult<Scalar> r;
    r.value = kron * h;
    r.error = std::abs((kron - gauss) * h);
    r.evaluations = 15;
    return r;
}

}  // namespace detail

/// Globally adaptive Gauss-Kronrod (7/15) quadrature on [a, b].
///
/// The interval list is seeded with the supplied breakpoints so that known scales of
/// the integrand (e.g. a concentration radius) land on panel boundaries.
template <typename Scalar, typename F>
QuadResult<Scalar> integrate(const F& f, std::span<const Scalar> breakpoints, Scalar abs_tol, Scalar rel_tol,
                             int max_panels = 4000) {
    struct Panel {
        Scalar a, b, value, error;
        bool operator<(const Panel& o) const { return error < o.error; }
    };
    std::priority_queue<Panel> heap;
    QuadResult<Scalar> total;
    total.value = 0;
    total.error = 0;
    for (std::size_t i = 0; i + 1 < breakpoints.size(); ++i) {
        const Scalar a = breakpoints[i];
        const Scalar b = breakpoints[i + 1];
        if (!(b > a)) continue;
        const auto r = detail::gk15<Scalar>(f, a, b);
        heap.push({a, b, r.value, r.error});
        total.value += r.value;
        total.error += r.error;
        total.evaluations += r.evaluations;
    }
    int panels = static_cast<int>(heap.size());
    while (!heap.empty() && total.error > std::max(abs_tol, rel_tol * std::abs(total.value))) {
        if (panels >= max_panels) {
            total.converged = false;
            break;
        }
        const Panel worst = heap.top();
        const Scalar mid = (worst.a + worst.b) / 2;
        if (!(mid > worst.a && mid < worst.b)) {
            total.converged = false;
            break;
        }
        heap.pop();
        const auto left = detail::gk15<Scalar>(f, worst.a, mid);
        const auto right = detail::gk15<Scalar>(f, mid, worst.b);
        total.value += left.value + right.value - worst.value;
        total.error += left.error + right.error - worst.error;
        total.evaluations += 30;
        heap.push({worst.a, mid, left.value, left.error});
        heap.push({mid, worst.b, right.value, right.error});
        ++panels;
    }
    // Re-sum to shed the drift of incremental updates.
    Scalar v = 0, e = 0;
    while (!heap.empty()) {
        v += heap.top().value;
        e += heap.top().error;
        heap.pop();
    }
    total.value = v;
    total.error = e;
    return total;
}

template <typename Scalar, typename F>
QuadResult<Scalar> integrate(const F& f, Scalar a, Scalar b, Scalar abs_tol, Scalar rel_tol,
                             int max_panels = 4000) {
    const Scalar pts[2] = {a, b};
    return integrate<Scalar>(f, std::span<const Scalar>(pts, 2), abs_tol, rel_tol, max_panels);
}

/// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration on P_m.
template <typename Scalar>
void gauss_legendre(int m, std::vector<Scalar>& nodes, std::vector<Scalar>& weights) {
    nodes.assign(static_cast<std::size_t>(m), 0);
    weights.assign(static_cast<std::size_t>(m), 0);
    for (int i = 0; i < (m + 1) / 2; ++i) {
        Scalar x = std::cos(std::numbers::pi_v<Scalar> * (Scalar(i) + Scalar(0.75)) / (Scalar(m) + Scalar(0.5)));
        Scalar dp = 1;
        for (int it = 0; it < 100; ++it) {
            Scalar p0 = 1, p1 = x;
            for (int k = 2; k <= m; ++k) {
                const Scalar pk = ((2 * k - 1) * x * p1 - (k - 1) * p0) / k;
                p0 = p1;
                p1 = pk;
            }
            const Scalar pm = m == 0 ? Scalar(1) : (m == 1 ? x : p1);
            const Scalar pm1 = m == 1 ? Scalar(1) : p0;
            dp = m * (x * pm - pm1) / (x * x - 1);
            const Scalar dx = pm / dp;
            x -= dx;
            if (std::abs(dx) <= std::numeric_limits<Scalar>::epsilon() * 4) break;
        }
        nodes[static_cast<std::size_t>(i)] = -x;
        nodes[static_cast<std::size_t>(m - 1 - i)] = x;
        const Scalar w = 2 / ((1 - x * x) * dp * dp);
        weights[static_cast<std::size_t>(i)] = w;
        weights[static_cast<std::size_t>(m - 1 - i)] = w;
    }
}

/// Quadrature rule on the Euclidean unit sphere S^{n-1}.
///
/// n = 2: trapezoid in the angle. n >= 3: hyperspherical product rule, Gauss-Legendre
/// in each polar angle (Jacobian sin^k included in the weights), trapezoid in the
/// azimuth. Weights sum to |S^{n-1}|.
template <typename Scalar>
struct SphereRule {
    std::vector<Eigen::Matrix<Scalar, Eigen::Dynamic, 1>> points;
    std::vector<Scalar> weights;
};

template <typename Scalar>
SphereRule<Scalar> sphere_rule(int n, int resolution) {
    using V = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
    if (n < 2) throw DomainError("sphere rule needs n >= 2");
    const Scalar pi = std::numbers::pi_v<Scalar>;
    SphereRule<Scalar> rule;
    const int azimuth = n == 2 ? resolution : 2 * resolution;
    std::vector<Scalar> gx, gw;
    gauss_legendre<Scalar>(resolution, gx, gw);

    // Odometer over (polar_1, ..., polar_{n-2}, azimuth).
    std::vector<int> idx(static_cast<std::size_t>(n - 1), 0);
    while (true) {
        V x(n);
        Scalar w = 1;
        Scalar radius = 1;
        for (int j = 0; j < n - 2; ++j) {
            const auto k = static_cast<std::size_t>(idx[static_cast<std::size_t>(j)]);
            const Scalar phi = pi * (gx[k] + 1) / 2;
            w *= gw[k] * pi / 2 * std::pow(std::sin(phi), n - 2 - j);
            x(j) = radius * std::cos(phi);
            radius *= std::sin(phi);
        }
        const Scalar theta = 2 * pi * Scalar(idx.back()) / Scalar(azimuth);
        x(n - 2) = radius * std::cos(theta);
        x(n - 1) = radius * std::sin(theta);
        w *= 2 * pi / Scalar(azimuth);
        rule.points.push_back(x);
        rule.weights.push_back(w);

        int j = n - 2;
        while (j >= 0) {
            auto& i = idx[static_cast<std::size_t>(j)];
            const int limit = j == n - 2 ? azimuth : resolution;
            if (++i < limit) break;
            i = 0;
            --j;
        }
        if (j < 0) break;
    }
    return rule;
}

/// |S^{n-1}| = 2 pi^{n/2} / Gamma(n/2).
inline double sphere_area(int n) {
    return 2 * std::pow(std::numbers::pi, n / 2.0) / std::tgamma(n / 2.0);
}

}  // namespace anisobn
