#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "anisobn/bubbles.hpp"
#include "anisobn/quadrature.hpp"

using namespace anisobn;

namespace {

constexpr double pi = std::numbers::pi;

Vector vec(std::initializer_list<double> xs) {
    Vector v(static_cast<Eigen::Index>(xs.size()));
    Eigen::Index i = 0;
    for (double x : xs) v(i++) = x;
    return v;
}

Matrix diag(std::initializer_list<double> xs) { return vec(xs).asDiagonal(); }

Norm shifted_norm() {
    Matrix a(2, 2);
    a << 2.0, 0.3, 0.3, 1.0;
    return Norm::shifted_ellipsoid(a, vec({0.4, -0.2}));
}

// Classical best constant S for |grad u|_p^p >= S |u|_{p*}^p in closed form.
double talenti_constant(double n, double p) {
    const double c = std::pow(pi, -0.5) * std::pow(n, -1 / p) * std::pow((p - 1) / (n - p), 1 - 1 / p) *
                     std::pow(std::tgamma(1 + n / 2) * std::tgamma(n) /
                                  (std::tgamma(n / p) * std::tgamma(1 + n - n / p)),
                              1 / n);
    return std::pow(c, -p);
}

// Independent quadrature of |U'|^p r^{n-1} for the classical profile (1 + r^s)^{-(n-p)/p}
// on r = tan(t), composite Simpson in long double, normalized by the critical integral.
double classical_quotient(double n, double p) {
    const long double s = p / (p - 1);
    const long double m = (n - p) / p;
    const int steps = 200000;
    long double grad = 0, crit = 0;
    for (int i = 0; i <= steps; ++i) {
        const long double t = (pi / 2) * i / steps;
        const long double w = (i == 0 || i == steps) ? 1 : (i % 2 ? 4 : 2);
        if (i == steps) continue;
        const long double r = std::tan(t);
        const long double jac = 1 / (std::cos(t) * std::cos(t));
        const long double base = 1 + std::pow(r, s);
        const long double du = m * s * std::pow(r, s - 1) * std::pow(base, -m - 1);
        grad += w * std::pow(du, (long double)p) * std::pow(r, (long double)(n - 1)) * jac;
        crit += w * std::pow(base, -(long double)n) * std::pow(r, (long double)(n - 1)) * jac;
    }
    // Quotient is scale free: S = omega^{p/n} grad / crit^{p/p*}.
    const double omega = sphere_area(static_cast<int>(n));
    const double pstar = n * p / (n - p);
    const double h = (pi / 2) / steps / 3;
    return std::pow(omega, p / n) * static_cast<double>(grad * h) /
           std::pow(static_cast<double>(crit * h), p / pstar);
}

}  // namespace

TEST(Cnp, Examples) {
    EXPECT_NEAR(c_np(3, 2), std::sqrt(3.0), 1e-14);
    EXPECT_NEAR(c_np(4, 2), 2 * std::sqrt(2.0), 1e-14);
    EXPECT_THROW(c_np(3, 3), DomainError);
    EXPECT_THROW(c_np(3, 4), DomainError);
    EXPECT_THROW(c_np(3, 1), DomainError);
}

TEST(BubbleEval, PeakValue) {
    const Bubble b(Norm::euclidean(4), 2.0, 1.0);
    EXPECT_NEAR(bubble_eval(b, Vector::Zero(4)), 2 * std::sqrt(2.0), 1e-13);
    const Bubble c(Norm::ellipsoid(diag({4, 1, 2})), 2.0, 0.3, vec({0.1, 0.2, -0.3}));
    EXPECT_NEAR(bubble_eval(c, c.center), std::pow(c_np(3, 2) / 0.3, 0.5), 1e-12);
}

TEST(BubbleEval, DecayRate) {
    const Norm h = shifted_norm();
    const double p = 1.5, mu = 0.7, n = 2;
    const Bubble b(h, p, mu);
    const Vector dir = vec({0.6, -0.8});
    const double rho = 1e5;
    const Vector x = rho * dir / h.dual_value(-dir);
    const double hat = h.dual_value(-x);
    EXPECT_NEAR(hat, rho, 1e-6 * rho);
    const double scaled = bubble_eval(b, x) * std::pow(hat, (n - p) / (p - 1));
    const double limit = std::pow(std::pow(mu, 1 / (p - 1)) * c_np(n, p), (n - p) / p);
    EXPECT_NEAR(scaled / limit, 1.0, 1e-6);
}

TEST(BubbleEval, ScaleAndTranslationCovariance) {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> g;
    for (const auto& h : {Norm::ellipsoid(diag({4, 1, 2})), Norm::euclidean(3)}) {
        const Vector x0 = vec({0.2, -0.1, 0.4});
        for (double mu : {0.1, 1.0, 3.0}) {
            const Bubble b(h, 2.0, mu, x0);
            const Bubble unit(h, 2.0, 1.0);
            for (int k = 0; k < 20; ++k) {
                Vector x(3);
                for (auto& v : x) v = g(rng);
                const double lhs = bubble_eval(b, x);
                const double rhs = std::pow(mu, -(3 - 2.0) / 2.0) * bubble_eval(unit, Vector((x - x0) / mu));
                EXPECT_NEAR(lhs, rhs, 1e-12 * rhs);
            }
        }
    }
}

TEST(Density, Examples) {
    const Bubble b(Norm::euclidean(4), 2.0);
    EXPECT_NEAR(bubble_grad_energy_density(b, vec({1, 0, 0, 0})), 2.0, 1e-13);
    EXPECT_EQ(bubble_grad_energy_density(b, Vector::Zero(4)), 0.0);
    EXPECT_LT(bubble_grad_energy_density(b, vec({1e-6, 0, 0, 0})), 1e-10);
    EXPECT_THROW(bubble_grad_energy_density(Bubble(Norm::euclidean(4), 2.0, 2.0), vec({1, 0, 0, 0})), DomainError);
}

TEST(Density, ChainRuleAgreesWithClosedForm) {
    std::mt19937_64 rng(9);
    std::normal_distribution<double> g;
    for (const auto& [h, p] : std::vector<std::pair<Norm, double>>{
             {Norm::euclidean(3), 2.0}, {Norm::ellipsoid(diag({4, 1})), 1.5}, {shifted_norm(), 1.5}}) {
        const Bubble b(h, p);
        for (int k = 0; k < 100; ++k) {
            Vector x(h.dim());
            for (auto& v : x) v = g(rng);
            Vector grad(h.dim());
            const double s = 1e-3 * x.norm();
            for (int i = 0; i < h.dim(); ++i) {
                Vector e = Vector::Zero(h.dim());
                e(i) = s;
                grad(i) = (-bubble_eval(b, x + 2 * e) + 8 * bubble_eval(b, x + e) - 8 * bubble_eval(b, x - e) +
                           bubble_eval(b, x - 2 * e)) /
                          (12 * s);
            }
            const double chain = std::pow(h.value(grad), p);
            const double closed = bubble_grad_energy_density(b, x);
            EXPECT_NEAR(chain, closed, 1e-8 * std::max(1.0, closed));
        }
    }
}

TEST(Quadrature, GaussKronrodPolynomialAndSphere) {
    const auto r = integrate<double>([](double x) { return std::exp(-x) * std::cos(3 * x); }, 0.0, 10.0, 1e-14, 1e-14);
    const double exact = (1 - std::exp(-10.0) * (std::cos(30.0) - 3 * std::sin(30.0))) / 10;
    EXPECT_NEAR(r.value, exact, 1e-13);
    for (int n = 2; n <= 5; ++n) {
        const auto rule = sphere_rule<double>(n, 24);
        double total = 0, second = 0;
        for (std::size_t k = 0; k < rule.points.size(); ++k) {
            EXPECT_NEAR(rule.points[k].norm(), 1.0, 1e-14);
            total += rule.weights[k];
            second += rule.weights[k] * rule.points[k](0) * rule.points[k](0);
        }
        EXPECT_NEAR(total / sphere_area(n), 1.0, 1e-9);
        EXPECT_NEAR(second / (sphere_area(n) / n), 1.0, 1e-9);
    }
}

TEST(WulffOmega, Examples) {
    EXPECT_NEAR(wulff_omega(Norm::euclidean(2)), 2 * pi, 1e-12);
    EXPECT_NEAR(wulff_omega(Norm::euclidean(4)), 2 * pi * pi, 1e-10);
    // n |{H0 < 1}| with {H0 < 1} the ellipse of semi-axes (2, 1).
    EXPECT_NEAR(wulff_omega(Norm::ellipsoid(diag({4, 1}))) / (4 * pi), 1.0, 1e-10);
    EXPECT_NEAR(wulff_omega(Norm::ellipsoid(diag({4, 1, 2}))) / (std::sqrt(8.0) * 4 * pi), 1.0, 1e-8);
}

TEST(WulffOmega, ShiftedEllipsoidAgainstPolarAreaOracle) {
    const Norm h = shifted_norm();
    const Matrix m = h.matrix() - h.shift() * h.shift().transpose();
    const Matrix mi = m.inverse();
    const double k = 1 + h.shift().dot(mi * h.shift());
    auto hat = [&](const Vector& z) { return std::sqrt(k * z.dot(mi * z)) + z.dot(mi * h.shift()); };
    double area = 0;
    const int steps = 4096;
    for (int i = 0; i < steps; ++i) {
        const double a = 2 * pi * i / steps;
        area += 0.5 * std::pow(hat(vec({std::cos(a), std::sin(a)})), -2) * 2 * pi / steps;
    }
    const auto geo = wulff_geometry(h, 2.0);
    EXPECT_NEAR(geo.omega / (2 * area), 1.0, 1e-9);
    EXPECT_NEAR(geo.omega_volume / (2 * area), 1.0, 1e-9);
    EXPECT_NE(geo.upslope_ratio, 1.0);
    EXPECT_NEAR(wulff_geometry(Norm::ellipsoid(diag({4, 1})), 2.0).upslope_ratio, 1.0, 1e-12);
}

TEST(Sobolev, IdentityAndClassicalOracle) {
    for (const auto& [n, p] : std::vector<std::pair<int, double>>{{3, 2.0}, {4, 2.0}, {5, 3.0}}) {
        Vector d(n);
        for (int i = 0; i < n; ++i) d(i) = 1.0 + 0.5 * i;
        for (const auto& h : {Norm::euclidean(n), Norm::ellipsoid(d.asDiagonal())}) {
            const auto si = sobolev_integrals(h, p);
            EXPECT_NEAR(si.grad_integral / si.critical_integral, 1.0, 1e-6);
            const double s = sobolev_constant(h, n, p);
            const double euclid = talenti_constant(n, p);
            const double det_scale = h.family() == NormFamily::Ellipsoid ? std::sqrt(d.prod()) : 1.0;
            EXPECT_NEAR(std::pow(s, n / p) / (det_scale * std::pow(euclid, n / p)), 1.0, 1e-7);
        }
    }
    EXPECT_NEAR(talenti_constant(4, 2), 8 * pi / std::sqrt(6.0), 1e-12);
    EXPECT_NEAR(classical_quotient(4, 2) / talenti_constant(4, 2), 1.0, 1e-8);
    EXPECT_NEAR(sobolev_constant(Norm::euclidean(4), 4, 2.0) / classical_quotient(4, 2), 1.0, 1e-5);
}

TEST(Sobolev, ScaleInvariance) {
    for (const auto& h : {Norm::euclidean(3), Norm::ellipsoid(diag({4, 1, 2}))}) {
        const double p = 2.0, n = 3;
        const double omega = wulff_omega(h);
        std::vector<double> grads, crits;
        for (double mu : {0.2, 1.0, 5.0}) {
            std::vector<double> pts{0.0};
            for (double r = mu / 1024; r < 1e6 * mu; r *= 2) pts.push_back(r);
            auto du = [&](double r) {
                const double e = 1e-5 * std::max(r, mu * 1e-3);
                return (bubble_profile(n, p, mu, r + e) - bubble_profile(n, p, mu, std::max(0.0, r - e))) /
                       (r + e - std::max(0.0, r - e));
            };
            const auto g = integrate<double>(
                [&](double r) { return omega * std::pow(std::abs(du(r)), p) * r * r; }, std::span<const double>(pts),
                0.0, 1e-11, 20000);
            const auto c = integrate<double>(
                [&](double r) { return omega * std::pow(bubble_profile(n, p, mu, r), 6.0) * r * r; },
                std::span<const double>(pts), 0.0, 1e-11, 20000);
            grads.push_back(g.value);
            crits.push_back(c.value);
        }
        const auto [gmin, gmax] = std::minmax_element(grads.begin(), grads.end());
        const auto [cmin, cmax] = std::minmax_element(crits.begin(), crits.end());
        EXPECT_LE((*gmax - *gmin) / *gmin, 1e-5);  // truncated tail at 1e6 mu is O(1e-6)
        EXPECT_LE((*cmax - *cmin) / *cmin, 1e-6);
    }
}

TEST(Cutoff, ProfileAndMonotonicity) {
    const auto c = CutoffSpec::for_inradius(2.0);
    EXPECT_EQ(c.inner, 0.5);
    EXPECT_EQ(c.outer, 1.0);
    EXPECT_EQ(c.value(0.3), 1.0);
    EXPECT_EQ(c.value(1.2), 0.0);
    EXPECT_NEAR(c.value(0.75), 0.5, 1e-15);
    for (double r = 0.5; r < 1.0; r += 0.01) {
        const double fd = (c.value(r + 1e-6) - c.value(r - 1e-6)) / 2e-6;
        EXPECT_NEAR(c.derivative(r), fd, 1e-6);
        EXPECT_LE(c.derivative(r), 0.0);
    }
    const auto narrow = truncated_bubble(Norm::euclidean(3), 2.0, 0.01, 1.0);
    const auto wide = truncated_bubble(Norm::euclidean(3), 2.0, 0.01, 2.0);
    for (double r = 0; r < 1.0; r += 0.01) {
        const double kernel = std::pow(0.01 + r * r, -0.5);
        if (r < narrow.cutoff.inner) EXPECT_NEAR(narrow.eta(r), kernel, 1e-14 * kernel);
        EXPECT_LE(narrow.eta(r), wide.eta(r));
        EXPECT_LE(wide.eta(r), kernel * (1 + 1e-15));
        EXPECT_LE(narrow.eta_derivative(r), 0.0);
    }
    EXPECT_NEAR(narrow.v(0), std::pow(std::pow(0.01, 0.5) * c_np(3, 2), 0.5) * narrow.eta(0), 1e-14);
}

TEST(BubbleNorms, GradientRemainderStaysBounded) {
    const Norm h = Norm::euclidean(4);
    const double n = 4, p = 2;
    const auto si = sobolev_integrals(h, p);
    const double leading = si.grad_integral / std::pow(c_np(n, p), n - p);
    std::vector<double> rem;
    for (int k = 4; k <= 16; ++k) {
        const double eps = std::ldexp(1.0, -k);
        const auto rep = bubble_norms(truncated_bubble(h, p, eps, 1.0), 2.5);
        EXPECT_LE(rep.quad_err, 1e-7);
        rem.push_back(rep.gradHp - leading * std::pow(eps, -(n - p) / p));
    }
    // The remainder settles to a constant while the leading term grows by 2^12.
    for (std::size_t i = 5; i + 1 < rem.size(); ++i) {
        const double step = std::abs(rem[i + 1] - rem[i]);
        EXPECT_LT(step, 0.75 * std::abs(rem[i] - rem[i - 1]));
    }
    EXPECT_LT(std::abs(rem.back() - rem[rem.size() - 2]), 1e-3 * std::abs(rem.back()));
}

TEST(BubbleNorms, LogLawAtCriticalDimension) {
    const Norm h = Norm::euclidean(4);
    std::vector<double> eps, lp;
    for (int k = 9; k <= 16; ++k) {
        eps.push_back(std::ldexp(1.0, -k));
        lp.push_back(bubble_norms(truncated_bubble(h, 2.0, eps.back(), 1.0), 2.5).lp);
    }
    const auto fit = fit_asymptotic(eps, lp, AsymptoticLaw::Log);
    EXPECT_NEAR(fit.coefficient / (wulff_omega(h) / 2), 1.0, 0.05);
}

TEST(BubbleNorms, GridModeMatchesRadialMode) {
    for (const auto& h : {Norm::euclidean(2), Norm::ellipsoid(diag({2, 1}))}) {
        const Rectangle rect{-1.0, 1.2, -0.9, 1.1};
        const auto planar = truncated_bubble(h, 1.5, 0.05, rect);
        TruncatedBubble radial = planar;
        radial.rectangle.reset();
        const auto a = bubble_norms(planar, 1.7);
        const auto b = bubble_norms(radial, 1.7);
        EXPECT_NEAR(a.gradHp / b.gradHp, 1.0, 1e-6);
        EXPECT_NEAR(a.lpstar / b.lpstar, 1.0, 1e-6);
        EXPECT_NEAR(a.lp / b.lp, 1.0, 1e-6);
        EXPECT_NEAR(a.lq / b.lq, 1.0, 1e-6);
    }
}

TEST(Fit, SyntheticPowerPlusConstant) {
    std::vector<double> eps, val;
    for (int k = 4; k <= 16; ++k) {
        eps.push_back(std::ldexp(1.0, -k));
        val.push_back(3 * std::pow(eps.back(), -2) + 5);
    }
    const auto f = fit_asymptotic(eps, val, AsymptoticLaw::PowerPlusO1);
    EXPECT_NEAR(f.exponent, -2, 1e-3);
    EXPECT_NEAR(f.coefficient, 3, 1e-2);
    EXPECT_NEAR(f.constant, 5, 1e-3);
    EXPECT_LT(f.residual, 1e-8);
}

TEST(Fit, SyntheticPowerAndLog) {
    std::vector<double> eps, pw, lg;
    for (int k = 4; k <= 12; ++k) {
        eps.push_back(std::ldexp(1.0, -k));
        pw.push_back(0.7 * std::pow(eps.back(), -0.5));
        lg.push_back(2 * std::abs(std::log(eps.back())) + 1);
    }
    const auto a = fit_asymptotic(eps, pw, AsymptoticLaw::Power);
    EXPECT_NEAR(a.exponent, -0.5, 1e-12);
    EXPECT_NEAR(a.coefficient, 0.7, 1e-12);
    const auto b = fit_asymptotic(eps, lg, AsymptoticLaw::Log);
    EXPECT_NEAR(b.coefficient, 2, 1e-12);
    EXPECT_NEAR(b.constant, 1, 1e-10);
}

TEST(Fit, RejectsBadSweeps) {
    std::vector<double> few{0.5, 0.25, 0.125}, fv{1, 2, 3};
    EXPECT_THROW(fit_asymptotic(few, fv, AsymptoticLaw::Power), FitError);
    std::vector<double> up{0.1, 0.2, 0.3, 0.4, 0.5, 0.6}, uv{1, 2, 3, 4, 5, 6};
    EXPECT_THROW(fit_asymptotic(up, uv, AsymptoticLaw::Power), FitError);
    std::vector<double> eps{0.5, 0.25, 0.125, 0.0625, 0.03125, 0.015625}, flat(6, 1.0);
    EXPECT_THROW(fit_asymptotic(eps, flat, AsymptoticLaw::PowerPlusO1), FitError);
}
