#include "anisobn/pohozaev.hpp"

#include <algorithm>
#include <cmath>
#include <tuple>

namespace anisobn {

namespace {

// Derivative at x0 of the quadratic through (x0, f0), (x1, f1), (x2, f2).
double one_sided_derivative(double x0, double f0, double x1, double f1, double x2, double f2) {
    const double h1 = x1 - x0, h2 = x2 - x0;
    return -f0 * (h1 + h2) / (h1 * h2) + f1 * h2 / (h1 * (h2 - h1)) - f2 * h1 / (h2 * (h2 - h1));
}

double relative_gap(double a, double b) {
    const double scale = std::max(std::abs(a), std::abs(b));
    return scale > 0 ? std::abs(a - b) / scale : 0.0;
}

double radial_boundary(const ProblemParams& params, const RadialGrid& g, const Eigen::VectorXd& u) {
    const auto x = g.nodes();
    const std::size_t last = x.size() - 1;
    if (last < 2) throw DomainError("radial grid too coarse for a boundary stencil");
    const double slope = one_sided_derivative(x[last], u(static_cast<Eigen::Index>(last)), x[last - 1],
                                              u(static_cast<Eigen::Index>(last - 1)), x[last - 2],
                                              u(static_cast<Eigen::Index>(last - 2)));
    // On {H0hat = R}: H(grad u) = |f'| for decreasing profiles; <x, nu> integrates to omega R^n.
    double density = std::pow(std::abs(slope), params.p);
    if (slope > 0) density *= g.geometry().upslope_ratio;
    return (params.p - 1) / params.p * g.omega() * std::pow(g.radius(), params.n) * density;
}

double planar_boundary(const ProblemParams& params, const TensorGrid2D& g, const Eigen::VectorXd& u) {
    const Rectangle rc = g.rectangle();
    const int m1 = g.m1(), m2 = g.m2();
    const double hx = (rc.x1 - rc.x0) / m1, hy = (rc.y1 - rc.y0) / m2;
    const Norm& h = g.norm();
    double total = 0;
    // One side: nodes (i(k), j(k)) along it, inward neighbours one and two steps in, outward normal nu.
    auto side = [&](int count, double spacing, double step, auto node_at, const Eigen::Vector2d& nu, double support) {
        double s = 0;
        for (int k = 0; k <= count; ++k) {
            const auto [b, i1, i2] = node_at(k);
            // u vanishes on the side; d/dnu from the two inward nodes.
            const double dn = -one_sided_derivative(0.0, u(b), step, u(i1), 2 * step, u(i2));
            const double density = std::pow(h.value(Eigen::Vector2d(dn * nu)), params.p);
            s += (k == 0 || k == count ? 0.5 : 1.0) * density;
        }
        total += s * spacing * support;
    };
    using Triple = std::tuple<Eigen::Index, Eigen::Index, Eigen::Index>;
    side(m2, hy, hx, [&](int j) { return Triple{g.node(m1, j), g.node(m1 - 1, j), g.node(m1 - 2, j)}; },
         Eigen::Vector2d(1, 0), rc.x1);
    side(m2, hy, hx, [&](int j) { return Triple{g.node(0, j), g.node(1, j), g.node(2, j)}; }, Eigen::Vector2d(-1, 0),
         -rc.x0);
    side(m1, hx, hy, [&](int i) { return Triple{g.node(i, m2), g.node(i, m2 - 1), g.node(i, m2 - 2)}; },
         Eigen::Vector2d(0, 1), rc.y1);
    side(m1, hx, hy, [&](int i) { return Triple{g.node(i, 0), g.node(i, 1), g.node(i, 2)}; }, Eigen::Vector2d(0, -1),
         -rc.y0);
    return (params.p - 1) / params.p * total;
}

}  // namespace

double test_u_identity(const ProblemParams& params, const DiscreteFunction& u) {
    params.validate();
    const Moments m = moments(params, u.grid(), u.values());
    if (m.gradient == 0) return 0.0;
    const double critical = params.critical_term ? m.critical : 0.0;
    return std::abs(m.gradient - critical - params.lambda * m.lower) / m.gradient;
}

PohozaevAudit pohozaev_audit(const ProblemParams& params, const DiscreteFunction& u) {
    params.validate();
    const Grid& grid = u.grid();
    const double n = params.n, p = params.p, q = params.q;
    PohozaevAudit a;
    if (const auto* radial = dynamic_cast<const RadialGrid*>(&grid)) {
        a.boundary_term = radial_boundary(params, *radial, u.values());
    } else if (const auto* planar = dynamic_cast<const TensorGrid2D*>(&grid)) {
        const Rectangle rc = planar->rectangle();
        a.star_shaped = rc.x0 <= 0 && rc.x1 >= 0 && rc.y0 <= 0 && rc.y1 >= 0;
        if (!a.star_shaped) throw DomainError("rectangle is not star-shaped about the origin");
        if (planar->m1() < 3 || planar->m2() < 3) throw DomainError("planar grid too coarse for a boundary stencil");
        a.boundary_term = planar_boundary(params, *planar, u.values());
    } else {
        throw DomainError("no Pohozaev boundary rule for this grid type");
    }
    const Moments m = moments(params, grid, u.values());
    const double critical = params.critical_term ? m.critical : 0.0;
    a.interior_terms = n * params.lambda / q * m.lower + n / params.pstar() * critical - (n - p) / p * m.gradient;
    a.lambda_side = params.lambda * (n / q - (n - p) / p) * m.lower;
    a.residual = relative_gap(a.lambda_side, a.boundary_term);
    a.full_residual = relative_gap(a.interior_terms, a.boundary_term);
    a.test_defect = test_u_identity(params, u);
    a.lp_norm = std::pow(m.lp, 1 / p);
    return a;
}

bool passes_joint_audit(const PohozaevAudit& audit, double tol) {
    return audit.residual <= tol && audit.test_defect <= tol;
}

}  // namespace anisobn
