#include "anisobn/eigenvalue.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <Eigen/SparseCholesky>

namespace anisobn {

namespace {

// Numerator, denominator and their gradients on free nodes. Sums are accumulated in long
// double so that quotient decreases near convergence stay above rounding noise.
struct Quotient {
    double a{0};
    double b{0};
    double value{0};
    double max_gradient{0};
    Eigen::VectorXd grad;  // d(a/b) on free nodes
};

Quotient evaluate(const Grid& grid, double p, const Eigen::VectorXd& u, bool with_gradient) {
    const int k = grid.vertices_per_cell();
    const int dim = grid.cell_dim();
    long double a = 0, b = 0;
    Eigen::VectorXd da, db;
    if (with_gradient) {
        da = Eigen::VectorXd::Zero(grid.node_count());
        db = Eigen::VectorXd::Zero(grid.node_count());
    }
    Quotient q;
    for (Eigen::Index c = 0; c < grid.cell_count(); ++c) {
        const auto verts = grid.cell(c);
        const auto gop = grid.gradient_operator(c);
        // Gradient from differences to the first vertex: the operator columns sum to zero,
        // and differencing first avoids cancellation between large rounded products.
        double g[2]{0, 0};
        const double u0 = u(verts[0]);
        double mean = grid.centroid_weight(c, 0) * u0;
        for (int j = 1; j < k; ++j) {
            const double uj = u(verts[static_cast<std::size_t>(j)]);
            for (int d = 0; d < dim; ++d) g[d] += gop(d, j) * (uj - u0);
            mean += grid.centroid_weight(c, j) * uj;
        }
        const double w = grid.weight(c);
        const double h = grid.gradient_norm(g);
        q.max_gradient = std::max(q.max_gradient, h);
        a += static_cast<long double>(w * std::pow(h, p));
        b += static_cast<long double>(w * std::pow(std::abs(mean), p));
        if (!with_gradient) continue;
        double hg[2]{0, 0};
        if (h > 0) grid.half_square_gradient(g, hg);
        const double fa = h > 0 ? w * p * std::pow(h, p - 2) : 0.0;
        const double fb = mean != 0 ? w * p * std::pow(std::abs(mean), p - 2) * mean : 0.0;
        for (int j = 0; j < k; ++j) {
            const int node = verts[static_cast<std::size_t>(j)];
            double s = 0;
            for (int d = 0; d < dim; ++d) s += gop(d, j) * hg[d];
            da(node) += fa * s;
            db(node) += fb * grid.centroid_weight(c, j);
        }
    }
    q.a = static_cast<double>(a);
    q.b = static_cast<double>(b);
    q.value = static_cast<double>(a / b);
    if (with_gradient) q.grad = grid.restrict_to_free((da - q.value * db) / q.b);
    return q;
}

// Rescales free values to unit L^p norm.
void normalize(const Grid& grid, double p, Eigen::VectorXd& x) {
    const Quotient q = evaluate(grid, p, grid.extend_from_free(x), false);
    if (!(q.b > 0)) throw DomainError("Rayleigh quotient of the zero function");
    x /= std::pow(q.b, 1 / p);
}

}  // namespace

double rayleigh(const ProblemParams& params, const DiscreteFunction& u) {
    const Quotient q = evaluate(u.grid(), params.p, u.values(), false);
    if (!(q.b > 0)) throw DomainError("Rayleigh quotient of the zero function");
    return q.value;
}

DiscreteFunction default_eigen_init(std::shared_ptr<const Grid> grid) {
    if (const auto* radial = dynamic_cast<const RadialGrid*>(grid.get())) {
        const double r = radial->radius();
        return DiscreteFunction::sample(std::move(grid), [r](const Eigen::VectorXd& x) { return r - x(0); });
    }
    if (const auto* planar = dynamic_cast<const TensorGrid2D*>(grid.get())) {
        const Rectangle rect = planar->rectangle();
        return DiscreteFunction::sample(std::move(grid), [rect](const Eigen::VectorXd& x) {
            return (x(0) - rect.x0) * (rect.x1 - x(0)) * (x(1) - rect.y0) * (rect.y1 - x(1));
        });
    }
    throw DomainError("no default initial guess for this grid type");
}

DiscreteFunction random_eigen_init(std::shared_ptr<const Grid> grid, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Eigen::VectorXd x(grid->free_count());
    for (auto& v : x) v = unit(rng);
    return DiscreteFunction::from_free(std::move(grid), x);
}

ProblemParams eigen_problem(const ProblemParams& params, double lambda) {
    ProblemParams e = params;
    e.q = params.p;
    e.lambda = lambda;
    e.critical_term = false;
    return e;
}

EigenResult solve_lambda1(const ProblemParams& params, const DiscreteFunction& init, double tol, int max_iter) {
    if (!(tol > 0)) throw DomainError("tolerance must be positive");
    if (init.values().maxCoeff() <= 0) throw DomainError("initial guess must be positive somewhere");
    const auto& gridp = init.grid_ptr();
    const Grid& grid = *gridp;
    const double p = params.p;
    constexpr int refresh_every = 50;
    constexpr double armijo = 1e-4;

    Eigen::VectorXd x = init.free_values();
    normalize(grid, p, x);
    Quotient q = evaluate(grid, p, grid.extend_from_free(x), true);

    Eigen::SimplicialLDLT<SparseMatrix> precond;
    SparseMatrix metric;
    auto refresh = [&] {
        const ProblemParams e = eigen_problem(params, q.value);
        metric = gradient_term_hessian(e, grid, grid.extend_from_free(x), 1e-3 * q.max_gradient);
        precond.compute(metric);
        if (precond.info() != Eigen::Success) throw DomainError("preconditioner factorization failed");
    };
    refresh();

    auto make_result = [&](int iterations, std::vector<double> history, bool monotone) {
        Eigen::VectorXd full = grid.extend_from_free(x);
        if (full.sum() < 0) full = -full;
        const double res = residual_norm(eigen_problem(params, q.value), grid, full);
        return EigenResult{q.value, DiscreteFunction(gridp, full), iterations, res, std::move(history), monotone};
    };

    std::vector<double> history{q.value};
    bool monotone = true;
    double step = 1 / p;
    int since_refresh = 0;
    bool fresh = true;
    for (int it = 1; it <= max_iter; ++it) {
        if (since_refresh >= refresh_every) {
            refresh();
            since_refresh = 0;
            fresh = true;
        }
        const Eigen::VectorXd d = -precond.solve(q.grad);
        const double slope = q.grad.dot(d);
        if (!(slope < 0)) {
            if (!fresh) {
                refresh();
                since_refresh = 0;
                fresh = true;
                --it;
                continue;
            }
            break;
        }

        double alpha = step;
        Eigen::VectorXd trial;
        bool accepted = false;
        for (int ls = 0; ls < 60; ++ls) {
            trial = x + alpha * d;
            const Quotient probe = evaluate(grid, p, grid.extend_from_free(trial), false);
            if (probe.b > 0 && probe.value <= q.value + armijo * alpha * slope) {
                // Judge the renormalized iterate so rounding in the rescale cannot undo the decrease.
                normalize(grid, p, trial);
                if (evaluate(grid, p, grid.extend_from_free(trial), false).value <= q.value) {
                    accepted = true;
                    break;
                }
            }
            alpha /= 2;
        }
        if (!accepted) {
            if (!fresh) {
                refresh();
                since_refresh = 0;
                fresh = true;
                --it;
                continue;
            }
            break;  // no representable decrease left
        }
        Quotient qt = evaluate(grid, p, grid.extend_from_free(trial), true);
        if (qt.value > q.value) monotone = false;

        const Eigen::VectorXd s = trial - x;
        const Eigen::VectorXd y = qt.grad - q.grad;
        const double decrease = (q.value - qt.value) / qt.value;
        x = std::move(trial);
        q = std::move(qt);
        history.push_back(q.value);
        ++since_refresh;
        fresh = false;

        // Barzilai-Borwein length in the preconditioner metric.
        const double sy = s.dot(y);
        step = sy > 0 ? std::clamp(s.dot(metric * s) / sy, 1e-12, 1e12) : std::min(2 * alpha, 1e12);

        if (decrease <= tol) {
            const double res = residual_norm(eigen_problem(params, q.value), grid, grid.extend_from_free(x));
            if (res <= 10 * tol) return make_result(it, std::move(history), monotone);
        }
    }
    const int done = static_cast<int>(history.size()) - 1;
    EigenResult best = make_result(done, std::move(history), monotone);
    if (best.residual <= 10 * tol) return best;
    throw ConvergenceError<EigenResult>("eigen solver stopped before reaching the residual tolerance",
                                        std::move(best));
}

}  // namespace anisobn
