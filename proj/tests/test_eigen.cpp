#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "anisobn/eigenvalue.hpp"

using namespace anisobn;

namespace {

constexpr double pi = std::numbers::pi;

Norm shifted_norm() {
    Matrix a(2, 2);
    a << 2.0, 0.3, 0.3, 1.0;
    Vector b(2);
    b << 0.4, -0.2;
    return Norm::shifted_ellipsoid(a, b);
}

double lp_norm(const DiscreteFunction& u, double p) {
    const Grid& g = u.grid();
    double s = 0;
    for (Eigen::Index c = 0; c < g.cell_count(); ++c) {
        double mean = 0;
        for (int a = 0; a < g.vertices_per_cell(); ++a) mean += g.centroid_weight(c, a) * u.values()(g.cell(c)[a]);
        s += g.weight(c) * std::pow(std::abs(mean), p);
    }
    return std::pow(s, 1 / p);
}

}  // namespace

TEST(Rayleigh, ScaleInvarianceAndZero) {
    const auto g = RadialGrid::create(Norm::euclidean(3), 1.0, RadialMeshSpec{200});
    const ProblemParams params{3, 2.0, 2.0, 0.0};
    const auto u = default_eigen_init(g);
    for (double t : {1e-3, 0.5, 7.0, 1e4}) EXPECT_NEAR(rayleigh(params, u.scaled(t)) / rayleigh(params, u), 1.0, 1e-14);
    EXPECT_THROW(rayleigh(params, DiscreteFunction::zero(g)), DomainError);
}

TEST(Rayleigh, ClassicalGroundStateOnUnitBall) {
    const auto g = RadialGrid::create(Norm::euclidean(3), 1.0, RadialMeshSpec{4000});
    const ProblemParams params{3, 2.0, 2.0, 0.0};
    const auto u = DiscreteFunction::sample(g, [](const Eigen::VectorXd& x) {
        const double r = x(0);
        return r > 0 ? std::sin(pi * r) / r : pi;
    });
    EXPECT_NEAR(rayleigh(params, u) / (pi * pi), 1.0, 1e-5);
}

TEST(Eigen, UnitBallMatchesClosedForm) {
    const auto g = RadialGrid::create(Norm::euclidean(3), 1.0, RadialMeshSpec{(1 << 14) - 1});
    ASSERT_EQ(g->node_count(), 1 << 14);
    const ProblemParams params{3, 2.0, 2.0, 0.0};
    const auto r = solve_lambda1(params, default_eigen_init(g));
    EXPECT_NEAR(r.lambda1 / (pi * pi), 1.0, 1e-2);
    EXPECT_NEAR(r.lambda1 / (pi * pi), 1.0, 1e-6);  // the grid is fine enough for far better than 1%
    EXPECT_TRUE(r.monotone);
    for (std::size_t i = 1; i < r.history.size(); ++i) EXPECT_LE(r.history[i], r.history[i - 1]);
    EXPECT_GT(r.u1.interior_min(), 0.0);
    EXPECT_LE(r.residual, 1e-7);
    EXPECT_NEAR(lp_norm(r.u1, 2.0), 1.0, 1e-12);
    EXPECT_NEAR(rayleigh(params, r.u1), r.lambda1, 1e-12 * r.lambda1);
}

TEST(Eigen, InfimumDominatesSampledQuotients) {
    for (const auto& [n, p] : std::vector<std::pair<int, double>>{{3, 2.0}, {2, 1.5}}) {
        const auto g = RadialGrid::create(Norm::euclidean(n), 1.0, RadialMeshSpec{400}, p);
        const ProblemParams params{n, p, p, 0.0};
        const double lambda1 = solve_lambda1(params, default_eigen_init(g)).lambda1;
        std::mt19937_64 rng(11);
        std::normal_distribution<double> g01;
        for (int k = 0; k < 30; ++k) {
            Eigen::VectorXd x(g->free_count());
            for (auto& v : x) v = g01(rng) + (k % 2 ? 2.0 : 0.0);
            EXPECT_GE(rayleigh(params, DiscreteFunction::from_free(g, x)), lambda1);
        }
        EXPECT_GE(rayleigh(params, default_eigen_init(g)), lambda1);
    }
}

TEST(Eigen, DilationScalingLaw) {
    for (const auto& [n, p] : std::vector<std::pair<int, double>>{{3, 2.0}, {2, 1.5}, {3, 2.5}}) {
        const ProblemParams params{n, p, p, 0.0};
        const auto g1 = RadialGrid::create(Norm::euclidean(n), 1.0, RadialMeshSpec{300}, p);
        const auto g2 = RadialGrid::create(Norm::euclidean(n), 2.0, RadialMeshSpec{300}, p);
        const double l1 = solve_lambda1(params, default_eigen_init(g1)).lambda1;
        const double l2 = solve_lambda1(params, default_eigen_init(g2)).lambda1;
        EXPECT_NEAR(l2 * std::pow(2.0, p) / l1, 1.0, 1e-8);
    }
}

TEST(Eigen, WulffBallValueIsNormIndependentInRadialMode) {
    const ProblemParams params{2, 1.5, 1.5, 0.0};
    const auto ge = RadialGrid::create(Norm::euclidean(2), 1.0, RadialMeshSpec{400}, 1.5);
    const auto gs = RadialGrid::create(shifted_norm(), 1.0, RadialMeshSpec{400}, 1.5);
    const auto re = solve_lambda1(params, default_eigen_init(ge));
    const auto rs = solve_lambda1(params, default_eigen_init(gs));
    EXPECT_NEAR(rs.lambda1 / re.lambda1, 1.0, 1e-8);
}

TEST(Eigen, StartsAgree) {
    for (const auto& [n, p] : std::vector<std::pair<int, double>>{{3, 2.0}, {2, 1.5}, {3, 1.5}}) {
        const auto g = RadialGrid::create(Norm::euclidean(n), 1.0, RadialMeshSpec{1000}, p);
        const ProblemParams params{n, p, p, 0.0};
        const auto init = default_eigen_init(g);
        const double base = solve_lambda1(params, init).lambda1;
        EXPECT_NEAR(solve_lambda1(params, init.scaled(5.0)).lambda1 / base, 1.0, 1e-8);
        for (std::uint64_t seed : {1u, 2u, 3u}) {
            const auto r = solve_lambda1(params, random_eigen_init(g, seed));
            EXPECT_NEAR(r.lambda1 / base, 1.0, 1e-6);
            EXPECT_GT(r.u1.interior_min(), 0.0);
        }
    }
}

TEST(Eigen, WeakEquationHolds) {
    const auto g = RadialGrid::create(Norm::euclidean(2), 1.0, RadialMeshSpec{500}, 1.5);
    const ProblemParams params{2, 1.5, 1.5, 0.0};
    const double tol = 1e-8;
    const auto r = solve_lambda1(params, default_eigen_init(g), tol);
    const ProblemParams eq = eigen_problem(params, r.lambda1);
    EXPECT_LE(residual_norm(eq, r.u1), 10 * tol);
    std::mt19937_64 rng(2);
    std::normal_distribution<double> g01;
    for (int k = 0; k < 10; ++k) {
        Eigen::VectorXd v(g->free_count());
        for (auto& x : v) x = g01(rng);
        const double energy = std::sqrt(v.dot(g->stiffness() * v));
        EXPECT_LE(std::abs(weak_residual(eq, r.u1, DiscreteFunction::from_free(g, v))) / energy, 10 * tol);
    }
}

TEST(Eigen, RefinementDecreasesTowardTheLimit) {
    // Centroid quadrature underestimates int |u|^p cell by cell (Jensen), so every discrete
    // quotient bounds pi^2 from above.
    const ProblemParams params{3, 2.0, 2.0, 0.0};
    double previous = std::numeric_limits<double>::infinity();
    double previous_error = std::numeric_limits<double>::infinity();
    for (int cells : {25, 50, 100, 200, 400}) {
        const auto g = RadialGrid::create(Norm::euclidean(3), 1.0, RadialMeshSpec{cells});
        const double l = solve_lambda1(params, default_eigen_init(g)).lambda1;
        const double error = l - pi * pi;
        EXPECT_GT(error, 0.0);
        EXPECT_LT(l, previous);
        EXPECT_LT(error, 0.3 * previous_error);  // second order
        previous = l;
        previous_error = error;
    }
}

TEST(Eigen, PlanarSquare) {
    const auto g = TensorGrid2D::create(Norm::euclidean(2), Rectangle{-1, 1, -1, 1}, 64, 64);
    const ProblemParams params{2, 2.0, 2.0, 0.0};
    const auto r = solve_lambda1(params, default_eigen_init(g));
    EXPECT_NEAR(r.lambda1 / (pi * pi / 2), 1.0, 1e-2);
    EXPECT_GT(r.u1.interior_min(), 0.0);
}

TEST(Eigen, IterationLimitCarriesBestIterate) {
    const auto g = RadialGrid::create(Norm::euclidean(2), 1.0, RadialMeshSpec{300}, 1.5);
    const ProblemParams params{2, 1.5, 1.5, 0.0};
    try {
        (void)solve_lambda1(params, random_eigen_init(g, 9), 1e-12, 2);
        FAIL() << "expected ConvergenceError";
    } catch (const ConvergenceError<EigenResult>& e) {
        EXPECT_EQ(e.best().iterations, 2);
        EXPECT_GT(e.best().lambda1, 0.0);
        EXPECT_LE(e.best().history.back(), e.best().history.front());
    }
    EXPECT_THROW(solve_lambda1(params, DiscreteFunction::zero(g)), DomainError);
}
