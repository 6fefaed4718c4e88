#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "anisobn/anisotropy.hpp"

using namespace anisobn;

namespace {

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

// Closed-form support function of {sqrt(x^T A x) + <b, x> <= 1}: the unit ball is an
// ellipsoid with matrix M = A - b b^T, and completing the square gives
// H0(z) = sqrt(k z^T M^{-1} z) - z^T M^{-1} b with k = 1 + b^T M^{-1} b.
double shifted_dual_oracle(const Norm& h, const Vector& z) {
    const Matrix m = h.matrix() - h.shift() * h.shift().transpose();
    const Matrix mi = m.inverse();
    const double k = 1 + h.shift().dot(mi * h.shift());
    return std::sqrt(k * z.dot(mi * z)) - z.dot(mi * h.shift());
}

// Brute-force planar support function: dense angle scan then golden refinement.
double planar_sup_oracle(const Norm& h, const Vector& z) {
    auto f = [&](double a) {
        const Vector t = vec({std::cos(a), std::sin(a)});
        return z.dot(t) / h.value(t);
    };
    const int m = 20000;
    int best = 0;
    for (int i = 1; i < m; ++i)
        if (f(2 * std::numbers::pi * i / m) > f(2 * std::numbers::pi * best / m)) best = i;
    double lo = 2 * std::numbers::pi * (best - 1) / m, hi = 2 * std::numbers::pi * (best + 1) / m;
    for (int it = 0; it < 200; ++it) {
        const double a = lo + (hi - lo) / 3, b = hi - (hi - lo) / 3;
        (f(a) < f(b) ? lo : hi) = f(a) < f(b) ? a : b;
    }
    return f((lo + hi) / 2);
}

std::vector<Norm> all_families() {
    return {Norm::euclidean(3), Norm::ellipsoid(diag({4.0, 1.0, 2.5})), shifted_norm(),
            Norm::lr_regularized(2, 3.0, 0.5), Norm::lr_regularized(3, 1.5, 0.0), Norm::lr_regularized(2, 4.0, 2.0)};
}

}  // namespace

TEST(EvalH, Examples) {
    EXPECT_DOUBLE_EQ(eval_H(Norm::euclidean(2), vec({3, 4})), 5.0);
    EXPECT_DOUBLE_EQ(eval_H(Norm::ellipsoid(diag({4, 1})), vec({1, 0})), 2.0);
    for (const auto& h : all_families()) EXPECT_EQ(eval_H(h, Vector::Zero(h.dim())), 0.0);
}

TEST(EvalH, RejectsNonFinite) {
    EXPECT_THROW(eval_H(Norm::euclidean(2), vec({NAN, 1})), DomainError);
    EXPECT_THROW(eval_H(Norm::euclidean(2), vec({1, INFINITY})), DomainError);
}

TEST(GradH, Examples) {
    EXPECT_TRUE(grad_H(Norm::euclidean(2), vec({0, 2})).isApprox(vec({0, 1})));
    EXPECT_TRUE(grad_H(Norm::ellipsoid(diag({4, 1})), vec({1, 0})).isApprox(vec({2, 0})));
}

TEST(GradH, SingularAtOrigin) {
    for (const auto& h : all_families()) {
        EXPECT_THROW(grad_H(h, Vector::Zero(h.dim())), SingularityError);
        EXPECT_THROW(hess_H2_quadform(h, Vector::Zero(h.dim()), Vector::Ones(h.dim())), SingularityError);
    }
}

TEST(GradH, EulerIdentityAtRandomPoints) {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> g;
    for (const auto& h : all_families()) {
        for (int k = 0; k < 100; ++k) {
            Vector x(h.dim());
            for (auto& v : x) v = g(rng);
            EXPECT_NEAR(x.dot(grad_H(h, x)), eval_H(h, x), 1e-10 * eval_H(h, x));
        }
    }
}

TEST(HessQuadform, Examples) {
    const Vector xi = vec({0.3, -1.2});
    const Vector eta = vec({0.7, 2.0});
    EXPECT_NEAR(hess_H2_quadform(Norm::euclidean(2), xi, eta), eta.squaredNorm(), 1e-14);
    const Matrix a = diag({4, 1});
    EXPECT_NEAR(hess_H2_quadform(Norm::ellipsoid(a), xi, eta), eta.dot(a * eta), 1e-12);
    const auto nearly_euclid = Norm::lr_regularized(2, 4.0, 1e9);
    EXPECT_NEAR(hess_H2_quadform(nearly_euclid, xi, eta), eta.squaredNorm(), 1e-6);
}

TEST(HessQuadform, MatchesFiniteDifferenceOfHalfSquare) {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> g;
    for (const auto& h : all_families()) {
        for (int k = 0; k < 20; ++k) {
            Vector x(h.dim()), e(h.dim());
            for (auto& v : x) v = g(rng);
            for (auto& v : e) v = g(rng);
            const double s = 1e-4;
            auto half_sq = [&](const Vector& y) { return 0.5 * std::pow(h.value(y), 2); };
            const double fd = (half_sq(x + s * e) - 2 * half_sq(x) + half_sq(x - s * e)) / (s * s);
            EXPECT_NEAR(hess_H2_quadform(h, x, e), fd, 1e-5 * (1 + std::abs(fd)));
        }
    }
}

TEST(DualNorm, Examples) {
    EXPECT_DOUBLE_EQ(dual_norm(Norm::euclidean(2), vec({3, 4})), 5.0);
    const auto ell = Norm::ellipsoid(diag({4, 1}));
    EXPECT_NEAR(dual_norm(ell, vec({1, 0})), 0.5, 1e-15);
    EXPECT_NEAR(dual_norm(ell.with_numeric_dual(), vec({1, 0})), 0.5, 1e-12);
    EXPECT_NEAR(planar_sup_oracle(ell, vec({1, 0})), 0.5, 1e-10);
}

TEST(DualNorm, ShiftedEllipsoidIsNotSymmetric) {
    const auto h = shifted_norm();
    EXPECT_EQ(h.dual_mode(), DualMode::Numeric);
    const Vector z = vec({1.0, 0.5});
    const double plus = dual_norm(h, z);
    const double minus = dual_norm(h, -z);
    EXPECT_NEAR(plus, shifted_dual_oracle(h, z), 1e-10);
    EXPECT_NEAR(minus, shifted_dual_oracle(h, -z), 1e-10);
    EXPECT_NEAR(plus, planar_sup_oracle(h, z), 1e-9);
    EXPECT_GT(std::abs(plus - minus), 0.1);

    const Dual hat(h, Orientation::H0hat);
    EXPECT_NEAR(hat.value(z), minus, 1e-12);
    const Dual straight(h, Orientation::H0);
    EXPECT_NEAR(straight.value(z), plus, 1e-12);
}

TEST(DualNorm, ClosedAndNumericAgree) {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g;
    for (const auto& h : {Norm::ellipsoid(diag({4, 1, 0.5})), Norm::lr_regularized(3, 3.0, 0.0),
                          Norm::lr_regularized(2, 1.5, 0.0)}) {
        ASSERT_EQ(h.dual_mode(), DualMode::ClosedForm);
        const auto num = h.with_numeric_dual();
        for (int k = 0; k < 50; ++k) {
            Vector z(h.dim());
            for (auto& v : z) v = g(rng);
            EXPECT_NEAR(h.dual_value(z), num.dual_value(z), 1e-10 * h.dual_value(z));
            EXPECT_LT((h.dual_gradient(z) - num.dual_gradient(z)).norm(), 1e-5);
        }
    }
}

TEST(DualNorm, DualOfDualRecoversSymmetricNorms) {
    std::mt19937_64 rng(8);
    std::normal_distribution<double> g;
    for (const auto& h : {Norm::euclidean(3), Norm::ellipsoid(diag({4, 1, 2}))}) {
        auto gauge = [&](const Vector& z) { return h.dual_value(z); };
        auto grad = [&](const Vector& z) { return h.dual_gradient(z); };
        for (int k = 0; k < 50; ++k) {
            Vector x(h.dim());
            for (auto& v : x) v = g(rng);
            const auto bidual = support_function<double>(gauge, grad, x);
            ASSERT_TRUE(bidual.converged);
            EXPECT_NEAR(bidual.value, h.value(x), 1e-6);
        }
    }
}

TEST(DualNorm, SupportFunctionReportsNonConvergence) {
    const auto h = shifted_norm();
    auto gauge = [&](const Vector& z) { return h.value(z); };
    auto grad = [&](const Vector& z) { return h.gradient(z); };
    const auto sp = support_function<double>(gauge, grad, vec({1.0, 0.3}), 1, 0, 1);
    EXPECT_FALSE(sp.converged);
    EXPECT_LE(sp.value, shifted_dual_oracle(h, vec({1.0, 0.3})) + 1e-12);
}

TEST(VerifyAxioms, EuclideanIsExact) {
    const auto rep = verify_norm_axioms(Norm::euclidean(3), 1000, 42);
    EXPECT_LE(rep.worst_identity(), 1e-12);
    EXPECT_LE(rep.gradient_fd, 1e-6);
    EXPECT_TRUE(rep.passes());
}

TEST(VerifyAxioms, EllipsoidIsExact) {
    const auto rep = verify_norm_axioms(Norm::ellipsoid(diag({4, 1})), 1000, 42);
    EXPECT_LE(rep.worst_identity(), 1e-10);
    EXPECT_LE(rep.duality_grad_dual, 1e-8);
    EXPECT_LE(rep.duality_dual_grad, 1e-8);
    EXPECT_TRUE(rep.passes());
}

TEST(VerifyAxioms, NumericDualFamiliesWithinLooserDualityBound) {
    for (const auto& h : {shifted_norm(), Norm::lr_regularized(2, 3.0, 0.5)}) {
        const auto rep = verify_norm_axioms(h, 300, 7);
        EXPECT_EQ(rep.dual_mode, "numeric");
        EXPECT_LE(rep.duality_grad_dual, 1e-5);
        EXPECT_LE(rep.duality_dual_grad, 1e-5);
        EXPECT_LE(rep.homogeneity, 1e-10);
        EXPECT_LE(rep.triangle, 1e-10);
        EXPECT_LE(rep.euler, 1e-10);
        EXPECT_LE(rep.gradient_fd, 1e-6);
        EXPECT_TRUE(rep.passes()) << rep.family;
    }
}

TEST(VerifyAxioms, HomogeneityAndTriangleForEveryFamily) {
    for (const auto& h : all_families()) {
        const auto rep = verify_norm_axioms(h, 1000, 99);
        EXPECT_LE(rep.homogeneity, 1e-10) << rep.family;
        EXPECT_LE(rep.triangle, 1e-10) << rep.family;
        EXPECT_LE(rep.lipschitz, 1e-10) << rep.family;
        EXPECT_LE(rep.euler, 1e-10) << rep.family;
        EXPECT_LE(rep.gradient_modulus, 1e-10) << rep.family;
        EXPECT_LE(rep.gradient_fd, 1e-6) << rep.family;
    }
}

TEST(Ellipticity, Examples) {
    const auto e = estimate_ellipticity(Norm::euclidean(2), 512, 1);
    EXPECT_NEAR(e.lower, 1.0, 1e-12);
    EXPECT_NEAR(e.upper, 1.0, 1e-12);
    EXPECT_FALSE(e.flagged);
    const auto a = estimate_ellipticity(Norm::ellipsoid(diag({4, 1})), 512, 1);
    EXPECT_NEAR(a.lower, 1.0, 1e-12);
    EXPECT_NEAR(a.upper, 4.0, 1e-12);
    const auto l4 = estimate_ellipticity(Norm::lr_regularized(2, 4.0, 0.0), 4096, 1);
    EXPECT_LT(l4.lower, 1e-4);
    EXPECT_TRUE(l4.flagged);
    EXPECT_FALSE(Norm::lr_regularized(2, 4.0, 0.0).constants().uniformly_convex);
    EXPECT_FALSE(verify_norm_axioms(Norm::lr_regularized(2, 4.0, 0.0), 100, 1).passes());
}

TEST(Ellipticity, StoredPairBracketsSamples) {
    std::mt19937_64 rng(17);
    std::normal_distribution<double> g;
    for (const auto& h : all_families()) {
        const auto& c = h.constants();
        for (int k = 0; k < 200; ++k) {
            Vector x(h.dim()), e(h.dim());
            for (auto& v : x) v = g(rng);
            for (auto& v : e) v = g(rng);
            const double q = hess_H2_quadform(h, x, e) / e.squaredNorm();
            EXPECT_GE(q, c.ellipticity_lower * (1 - 1e-12));
            EXPECT_LE(q, c.ellipticity_upper * (1 + 1e-12));
            const double hx = h.value(x) / x.norm();
            EXPECT_GE(hx, 1 / c.equivalence);
            EXPECT_LE(hx, c.equivalence);
        }
    }
}

TEST(Construction, RejectsInvalidParameters) {
    EXPECT_THROW(Norm::ellipsoid(diag({1, -1})), DomainError);
    Matrix ns(2, 2);
    ns << 1, 0.5, 0, 1;
    EXPECT_THROW(Norm::ellipsoid(ns), DomainError);
    EXPECT_THROW(Norm::shifted_ellipsoid(diag({1, 1}), vec({1.0, 0.0})), DomainError);
    EXPECT_THROW(Norm::lr_regularized(2, 1.0, 0.0), DomainError);
    EXPECT_THROW(Norm::lr_regularized(2, 3.0, -1.0), DomainError);
    EXPECT_THROW(Norm::euclidean(1), DomainError);
}

TEST(Templates, LongDoubleEllipsoid) {
    using LNorm = AnisotropicNorm<long double>;
    Mat<long double> a = Mat<long double>::Zero(2, 2);
    a(0, 0) = 4;
    a(1, 1) = 1;
    const auto h = LNorm::ellipsoid(a);
    Vec<long double> x(2);
    x << 1, 0;
    EXPECT_EQ(h.value(x), 2.0L);
    EXPECT_LT(std::abs(h.dual_value(x) - 0.5L), 1e-18L);
    EXPECT_LT(std::abs(h.with_numeric_dual().dual_value(x) - 0.5L), 1e-15L);
}
