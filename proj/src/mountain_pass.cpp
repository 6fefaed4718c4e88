#include "anisobn/mountain_pass.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include "anisobn/bubbles.hpp"

namespace anisobn {

double kappa(double p, double q) {
    if (!(p > 1 && q >= p)) throw DomainError("kappa needs 1 < p <= q");
    return p * (q * (p - 1) + p) / (q * (p - 1) + p - p * (p - 1));
}

double beta_exponent(double n, double p, double q) {
    if (!(p > 1 && p < n && q > p)) throw DomainError("beta needs 1 < p < n and q > p");
    return q * (n - p) * (1 / p - 1) / p + n * (p - 1) / p;
}

double capital_lambda(double sobolev, double volume, double n, double p) {
    if (!(sobolev > 0 && volume > 0 && n > 0 && p > 0)) throw DomainError("capital_lambda needs positive inputs");
    return sobolev * std::pow(volume, -p / n);
}

double sobolev_threshold(double sobolev, double n, double p) {
    if (!(sobolev > 0 && n > p)) throw DomainError("threshold needs S > 0 and n > p");
    return std::pow(sobolev, n / p) / n;
}

double sobolev_threshold(const Norm& h, int n, double p) {
    return sobolev_threshold(sobolev_constant(h, n, p), n, p);
}

double elementary_gap(double s, double n, double p) {
    if (!(s >= 0)) throw DomainError("elementary inequality is stated for s >= 0");
    const double pstar = n * p / (n - p);
    return std::pow(s, p) - 1 - (n - p) / n * (std::pow(s, pstar) - 1);
}

ElementaryAudit elementary_inequality_audit(double n, double p, int samples, std::uint64_t seed, double s_max) {
    if (!(1 < p && p < n) || samples < 1 || !(s_max > 0)) throw DomainError("bad elementary audit input");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, s_max);
    ElementaryAudit a{-std::numeric_limits<double>::infinity(), elementary_gap(1.0, n, p), samples};
    for (int i = 0; i < samples; ++i) a.max_gap = std::max(a.max_gap, elementary_gap(unit(rng), n, p));
    return a;
}

double power_gap_max(double a, double b, double n, double p) {
    if (!(a > 0 && b > 0 && 1 < p && p < n)) throw DomainError("power_gap_max needs a, b > 0 and 1 < p < n");
    return a * p / n * std::pow(a * (n - p) / (n * b), (n - p) / p);
}

RayMaximum ray_maximum(const ProblemParams& params, const Moments& m) {
    const double p = params.p, q = params.q;
    const double a = m.gradient, b = m.lower;
    const double c = params.critical_term ? m.critical : 0.0;
    const double pstar = params.pstar();
    const double lam = params.lambda;
    auto phi = [&](double t) {
        double v = std::pow(t, p) * a / p - lam * std::pow(t, q) * b / q;
        if (c > 0) v -= std::pow(t, pstar) * c / pstar;
        return v;
    };
    // phi'(t) = t^{p-1} g(t)
    auto g = [&](double t) {
        double v = a - lam * std::pow(t, q - p) * b;
        if (c > 0) v -= std::pow(t, pstar - p) * c;
        return v;
    };
    if (!(a > 0)) return {};
    if (q == p) {
        const double top = a - lam * b;
        if (!(top > 0) || !(c > 0)) return {};
        const double t = std::pow(top / c, 1 / (pstar - p));
        return {true, t, phi(t)};
    }
    if (!(c > 0) && !(lam > 0 && b > 0)) return {};
    // g(0+) = a > 0 and g eventually negative: bracket the single sign change in log t.
    double lo = 1, hi = 1;
    int guard = 0;
    while (g(lo) <= 0 && guard++ < 2000) lo /= 2;
    guard = 0;
    while (g(hi) > 0 && guard++ < 2000) hi *= 2;
    if (!(g(lo) > 0) || !(g(hi) <= 0)) return {};
    for (int it = 0; it < 200 && hi / lo - 1 > 1e-15; ++it) {
        const double mid = std::sqrt(lo * hi);
        (g(mid) > 0 ? lo : hi) = mid;
    }
    const double t = std::sqrt(lo * hi);
    return {true, t, phi(t)};
}

namespace {

// Smooth functions vanishing on the boundary: cosine modes in the radial variable or
// products of sines on rectangles.
std::vector<Eigen::VectorXd> smooth_modes(const Grid& grid) {
    std::vector<Eigen::VectorXd> modes;
    const Eigen::MatrixXd& x = grid.coordinates();
    if (const auto* radial = dynamic_cast<const RadialGrid*>(&grid)) {
        const double r = radial->radius();
        for (int k = 0; k < 6; ++k) {
            Eigen::VectorXd v(grid.node_count());
            for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = std::cos((k + 0.5) * std::numbers::pi * x(0, i) / r);
            modes.push_back(std::move(v));
        }
    } else if (const auto* planar = dynamic_cast<const TensorGrid2D*>(&grid)) {
        const Rectangle rc = planar->rectangle();
        for (int a = 1; a <= 3; ++a)
            for (int b = 1; b <= 3; ++b) {
                Eigen::VectorXd v(grid.node_count());
                for (Eigen::Index i = 0; i < v.size(); ++i)
                    v(i) = std::sin(a * std::numbers::pi * (x(0, i) - rc.x0) / (rc.x1 - rc.x0)) *
                           std::sin(b * std::numbers::pi * (x(1, i) - rc.y0) / (rc.y1 - rc.y0));
                modes.push_back(std::move(v));
            }
    } else {
        throw DomainError("geometry check has no modes for this grid type");
    }
    for (auto& v : modes)
        for (Eigen::Index i = 0; i < v.size(); ++i)
            if (grid.pinned(i)) v(i) = 0;
    return modes;
}

double exact_energy(const ProblemParams& params, const Moments& m, double t) {
    double v = std::pow(t, params.p) * m.gradient / params.p - params.lambda * std::pow(t, params.q) * m.lower / params.q;
    if (params.critical_term) v -= std::pow(t, params.pstar()) * m.critical / params.pstar();
    return v;
}

PathReport build_path(const ProblemParams& params, const Grid& grid, const Eigen::VectorXd& w, double threshold) {
    if (!(threshold > 0)) throw DomainError("threshold must be positive");
    if (w.minCoeff() < 0) throw DomainError("path direction must be non-negative");
    const Moments m = moments(params, grid, w);
    if (!(m.gradient > 0)) throw DomainError("path direction must be non-zero");
    PathReport r;
    r.threshold = threshold;
    r.lambda = params.lambda;
    const RayMaximum rm = ray_maximum(params, m);
    if (rm.exists) {
        r.t_star = rm.t;
        r.sup_energy = rm.value;
        r.t_bar = rm.t;
        for (int k = 0; k < 200 && exact_energy(params, m, r.t_bar) >= 0; ++k) r.t_bar *= 2;
        if (!(exact_energy(params, m, r.t_bar) < 0)) r.t_bar = 0;
    }
    r.below = r.sup_energy < threshold;
    const double end = r.t_bar > 0 ? r.t_bar : 1.0;
    for (int i = 0; i <= 32; ++i) {
        const double t = end * i / 32;
        r.t.push_back(t);
        r.energy.push_back(exact_energy(params, m, t));
    }
    return r;
}

}  // namespace

GeometryReport mp_geometry_check(const ProblemParams& params, const std::shared_ptr<const Grid>& grid, double radius,
                                 int samples, std::uint64_t seed, double lambda1) {
    params.validate();
    if (!(radius > 0) || samples < 1) throw DomainError("geometry check needs radius > 0 and samples >= 1");
    if (params.q == params.p) {
        if (!std::isfinite(lambda1)) throw DomainError("q = p geometry check needs lambda1");
        if (!(params.lambda > 0 && params.lambda < lambda1))
            throw DomainError("q = p mountain-pass geometry needs 0 < lambda < lambda1");
    }
    const auto modes = smooth_modes(*grid);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g01;
    GeometryReport rep;
    rep.radius = radius;
    rep.samples = samples;
    rep.eta = std::numeric_limits<double>::infinity();
    rep.delta0 = std::numeric_limits<double>::infinity();
    for (int s = 0; s < samples; ++s) {
        Eigen::VectorXd v = Eigen::VectorXd::Zero(grid->node_count());
        if (s == 0) {
            v = modes[0];
        } else {
            for (std::size_t k = 0; k < modes.size(); ++k) v += g01(rng) / static_cast<double>(k + 1) * modes[k];
            if (s % 2 == 0) v = v.cwiseAbs();
        }
        const double norm = std::pow(moments(params, *grid, v).gradient, 1 / params.p);
        if (!(norm > 0)) continue;
        for (double f : {1.0, 0.5, 0.25}) {
            const double r = f * radius;
            const double j = energy_J(params, DiscreteFunction(grid, v * (r / norm)));
            rep.eta = std::min(rep.eta, j / std::pow(r, params.p));
            if (f == 1.0) rep.delta0 = std::min(rep.delta0, j);
        }
    }
    rep.pass = rep.eta > 0;
    return rep;
}

PathReport path_sup(const ProblemParams& params, const DiscreteFunction& w, double threshold) {
    params.validate();
    return build_path(params, w.grid(), w.values(), threshold);
}

PathReport path_sup_eigen(const ProblemParams& params, const DiscreteFunction& u1, double lambda1, double cap_lambda,
                          double threshold) {
    params.validate();
    if (params.q != params.p) throw DomainError("eigen path needs q = p");
    if (!(params.lambda > lambda1 - cap_lambda && params.lambda < lambda1))
        throw DomainError("lambda outside (lambda1 - Lambda, lambda1)");
    PathReport r = build_path(params, u1.grid(), u1.values(), threshold);
    r.bound = std::pow(lambda1 - params.lambda, params.n / params.p) * u1.grid().domain_volume() / params.n;
    return r;
}

std::string to_string(MPStatus s) {
    switch (s) {
        case MPStatus::Converged: return "Converged";
        case MPStatus::StalledAboveThreshold: return "StalledAboveThreshold";
        case MPStatus::Diverged: return "Diverged";
    }
    return "?";
}

MPResult mp_solve(const ProblemParams& params, const DiscreteFunction& seed, const MPOptions& opt) {
    params.validate();
    if (!params.critical_term) throw DomainError("mountain-pass solver needs the critical term");
    if (!(opt.tol > 0) || opt.max_iter < 1) throw DomainError("bad solver tolerance or iteration budget");
    if (!(opt.threshold > 0)) throw DomainError("solver needs the compactness threshold");
    const auto& gridp = seed.grid_ptr();
    const Grid& grid = *gridp;
    constexpr double armijo = 1e-4;
    constexpr int refresh_every = 50;
    const double guard = opt.threshold - 1e-6;

    if (opt.enforce_preconditions && params.q == params.p &&
        !(std::isfinite(opt.lambda1) && params.lambda > 0 && params.lambda < opt.lambda1))
        throw DomainError("q = p mountain-pass geometry needs 0 < lambda < lambda1");

    MPResult out{seed, 0, 0, false, MPStatus::Diverged, 0, opt.threshold, true, {}, {}, {}};
    out.threshold = opt.threshold;
    out.path = path_sup(params, seed, opt.threshold);

    auto finish = [&](const Eigen::VectorXd& x, int iterations, std::string note) {
        out.u = DiscreteFunction::from_free(gridp, x);
        out.level = energy_J(params, out.u);
        out.residual = residual_norm(params, out.u);
        out.positive = out.u.interior_min() > 0;
        out.iterations = iterations;
        out.note = std::move(note);
        if (out.residual <= opt.tol && out.level >= guard) out.note = "critical point at or above the threshold";
        if (out.residual <= opt.tol) {
            if (out.level >= guard) out.classification = MPStatus::StalledAboveThreshold;
            else if (out.level > 0 && out.positive) out.classification = MPStatus::Converged;
            else out.classification = MPStatus::Diverged;
        } else {
            out.classification = out.level >= guard ? MPStatus::StalledAboveThreshold : MPStatus::Diverged;
        }
        return out;
    };

    if (out.path.t_star <= 0) {
        out.u = seed;
        out.level = 0;
        out.residual = residual_norm(params, seed);
        out.classification = MPStatus::Diverged;
        out.note = "seed ray has no energy maximum";
        return out;
    }

    Eigen::VectorXd x = out.path.t_star * seed.free_values();
    if (opt.enforce_preconditions) {
        const double radius = 0.05 * std::pow(moments(params, grid, grid.extend_from_free(x)).gradient, 1 / params.p);
        const GeometryReport geo =
            mp_geometry_check(params, gridp, radius, opt.geometry_samples, opt.seed, opt.lambda1);
        if (!geo.pass) throw DomainError("mountain-pass geometry check failed");
        if (opt.require_path_below && !out.path.below)
            throw DomainError("seed path does not stay below the compactness threshold");
    }

    auto gradient = [&](const Eigen::VectorXd& v) {
        return grid.restrict_to_free(energy_gradient(params, grid, grid.extend_from_free(v)));
    };
    auto dual = [&](const Eigen::VectorXd& r) { return std::sqrt(std::max(0.0, r.dot(grid.solve_stiffness(r)))); };
    auto peak = [&](const Eigen::VectorXd& v) {
        return ray_maximum(params, moments(params, grid, grid.extend_from_free(v)));
    };

    double level = out.path.sup_energy;
    Eigen::VectorXd r = gradient(x);
    double res = dual(r);

    SparseMatrix metric;
    Eigen::SimplicialLDLT<SparseMatrix> precond;
    auto refresh = [&] {
        const Eigen::VectorXd full = grid.extend_from_free(x);
        const Eigen::MatrixXd g = discrete_gradient(DiscreteFunction(gridp, full));
        double gmax = 0;
        for (Eigen::Index c = 0; c < g.cols(); ++c) gmax = std::max(gmax, grid.gradient_norm(g.col(c).data()));
        metric = gradient_term_hessian(params, grid, full, 1e-3 * gmax);
        precond.compute(metric);
        if (precond.info() != Eigen::Success) throw DomainError("preconditioner factorization failed");
    };
    refresh();

    // Newton on J'(u) = 0 with backtracking on the residual; returns true if it reached tol.
    int newton_blocked_until = 0;
    auto newton = [&](int it) {
        Eigen::SparseLU<SparseMatrix> lu;
        for (int k = 0; k < 40; ++k) {
            lu.compute(energy_hessian(params, grid, grid.extend_from_free(x)));
            if (lu.info() != Eigen::Success) break;
            const Eigen::VectorXd step = lu.solve(-r);
            if (lu.info() != Eigen::Success || !step.allFinite()) break;
            bool moved = false;
            for (double s = 1; s > 1e-4; s /= 2) {
                const Eigen::VectorXd xt = x + s * step;
                const Eigen::VectorXd rt = gradient(xt);
                const double rest = dual(rt);
                if (rest < (1 - 1e-4 * s) * res) {
                    x = xt;
                    r = rt;
                    res = rest;
                    moved = true;
                    break;
                }
            }
            if (!moved) break;
            if (res <= opt.tol) return true;
        }
        newton_blocked_until = it + 200;
        return false;
    };

    auto record = [&](int it) {
        if (it < 2000 || it % 50 == 0) out.trace.push_back({it, level, res});
    };
    record(0);

    double step = 1.0;
    int since_refresh = 0;
    bool fresh = true;
    int window_start = 0;
    double window_res = res;
    for (int it = 1; it <= opt.max_iter; ++it) {
        if (res <= opt.tol) return finish(x, it - 1, "");
        if (res <= opt.newton_switch && it >= newton_blocked_until) {
            if (newton(it)) {
                const RayMaximum pk = peak(x);
                if (pk.exists) {
                    if (pk.value > level * (1 + 1e-10) + 1e-14) out.monotone = false;
                    level = pk.value;
                }
                record(it);
                return finish(x, it, "newton polish");
            }
            refresh();
            since_refresh = 0;
            fresh = true;
        }
        if (since_refresh >= refresh_every) {
            refresh();
            since_refresh = 0;
            fresh = true;
        }
        const Eigen::VectorXd d = -precond.solve(r);
        const double slope = r.dot(d);
        double alpha = step;
        bool accepted = false;
        RayMaximum pk;
        Eigen::VectorXd w;
        if (slope < 0) {
            for (int ls = 0; ls < 60; ++ls) {
                w = x + alpha * d;
                pk = peak(w);
                if (pk.exists && pk.value <= level + armijo * alpha * slope) {
                    accepted = true;
                    break;
                }
                alpha /= 2;
            }
        }
        if (!accepted) {
            if (!fresh) {
                refresh();
                since_refresh = 0;
                fresh = true;
                --it;
                continue;
            }
            if (res <= 1e2 * opt.newton_switch && newton(it)) return finish(x, it, "newton polish");
            finish(x, it, "no descent direction left");
            if (out.residual <= opt.tol || out.classification == MPStatus::StalledAboveThreshold) return out;
            throw ConvergenceError<MPResult>("mountain-pass descent ran out of descent directions", std::move(out));
        }
        const Eigen::VectorXd xn = pk.t * w;
        const Eigen::VectorXd rn = gradient(xn);
        if (pk.value > level) out.monotone = false;
        const Eigen::VectorXd s = xn - x;
        const Eigen::VectorXd y = rn - r;
        x = xn;
        r = rn;
        level = pk.value;
        res = dual(r);
        ++since_refresh;
        fresh = false;
        record(it);

        const double sy = s.dot(y);
        step = sy > 0 ? std::clamp(s.dot(metric * s) / sy, 1e-12, 1e12) : std::min(2 * alpha, 1e12);

        if (it - window_start >= opt.stall_window) {
            if (res > 0.99 * window_res && level >= guard) return finish(x, it, "stalled at or above the threshold");
            window_start = it;
            window_res = res;
        }
    }
    finish(x, opt.max_iter, "iteration budget exhausted");
    if (out.classification == MPStatus::StalledAboveThreshold) return out;
    throw ConvergenceError<MPResult>("mountain-pass solver exhausted its iteration budget", std::move(out));
}

}  // namespace anisobn
