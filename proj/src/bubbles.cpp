#include "anisobn/bubbles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "anisobn/quadrature.hpp"

namespace anisobn {

namespace {

void require_exponents(double n, double p) {
    if (!(p > 1) || !(p < n)) throw DomainError("need 1 < p < n");
}

// Panel boundaries on [0, end] at dyadic multiples of the concentration scale.
std::vector<double> dyadic_breakpoints(double scale, double end, std::initializer_list<double> extra) {
    std::vector<double> pts{0.0, end};
    for (double s = scale / 64; s < end; s *= 2) pts.push_back(s);
    for (double e : extra)
        if (e > 0 && e < end) pts.push_back(e);
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    return pts;
}

// Breakpoints on [a, b] (a < 0 < b) symmetric around 0 at dyadic scales.
std::vector<double> symmetric_breakpoints(double scale, double a, double b) {
    std::vector<double> pts{a, 0.0, b};
    for (double s = scale / 64; s < std::max(-a, b); s *= 2) {
        if (s < b) pts.push_back(s);
        if (-s > a) pts.push_back(-s);
    }
    std::sort(pts.begin(), pts.end());
    return pts;
}

}  // namespace

double critical_exponent(double n, double p) {
    require_exponents(n, p);
    return n * p / (n - p);
}

double c_np(double n, double p) {
    require_exponents(n, p);
    return std::pow(n, 1 / p) * std::pow((n - p) / (p - 1), (p - 1) / p);
}

Bubble::Bubble(Norm h, double p_, double mu_, std::optional<Vector> c)
    : norm(std::move(h)), p(p_), mu(mu_), center(c ? *c : Vector::Zero(norm.dim())) {
    require_exponents(norm.dim(), p);
    if (!(mu > 0)) throw DomainError("bubble scale must be positive");
    if (center.size() != norm.dim()) throw DomainError("bubble centre has wrong dimension");
}

double bubble_profile(double n, double p, double mu, double rho) {
    const double s = p / (p - 1);
    return std::pow(std::pow(mu, 1 / (p - 1)) * c_np(n, p) / (std::pow(mu, s) + std::pow(rho, s)), (n - p) / p);
}

double bubble_eval(const Bubble& b, const Vector& x) {
    const double rho = b.norm.dual_value(b.center - x);
    return bubble_profile(b.n(), b.p, b.mu, rho);
}

double bubble_density_profile(double n, double p, double rho) {
    const double s = p / (p - 1);
    const double rs = std::pow(rho, s);
    return std::pow(c_np(n, p), n - p) * std::pow((n - p) / (p - 1), p) * rs / std::pow(1 + rs, n);
}

double bubble_grad_energy_density(const Bubble& b, const Vector& x) {
    if (b.mu != 1.0 || !b.center.isZero(0)) throw DomainError("density formula needs mu = 1 and centre 0");
    return bubble_density_profile(b.n(), b.p, b.norm.dual_value(-x));
}

double WulffGeometry::ball_volume(double radius) const { return omega_volume * std::pow(radius, n) / n; }

namespace {

WulffGeometry wulff_sums(const Norm& h, double p, int resolution) {
    const int n = h.dim();
    const auto rule = sphere_rule<double>(n, resolution);
    WulffGeometry g;
    g.n = n;
    g.p = p;
    g.max_radius = 0;
    g.min_radius = std::numeric_limits<double>::infinity();
    double up = 0;
    for (std::size_t k = 0; k < rule.points.size(); ++k) {
        const Vector& th = rule.points[k];
        const double w = rule.weights[k];
        const double hat = h.dual_value(-th);
        const Vector grad = -h.dual_gradient(-th);
        const double r = 1 / hat;
        const Vector tangential = -(grad - grad.dot(th) * th) / (hat * hat);
        const double stretch = std::sqrt(1 + tangential.squaredNorm() / (r * r));
        g.omega += w * std::pow(r, n - 1) * stretch / grad.norm();
        g.omega_volume += w * std::pow(hat, -n);
        up += w * std::pow(h.value(grad), p) * std::pow(hat, -n);
        g.max_radius = std::max(g.max_radius, r);
        g.min_radius = std::min(g.min_radius, r);
    }
    g.upslope_ratio = up / g.omega_volume;
    return g;
}

double sphere_points(int n, int resolution) {
    return (n == 2 ? 1.0 : 2.0) * std::pow(static_cast<double>(resolution), n - 1);
}

}  // namespace

WulffGeometry wulff_geometry(const Norm& h, double p, int resolution) {
    const int n = h.dim();
    if (h.family() == NormFamily::Euclidean || h.family() == NormFamily::Ellipsoid) {
        // {H0hat < 1} is the ellipsoid with semi-axes sqrt(eig A).
        const Matrix a = h.family() == NormFamily::Euclidean ? Matrix::Identity(n, n) : h.matrix();
        const Eigen::SelfAdjointEigenSolver<Matrix> es(a);
        WulffGeometry g;
        g.n = n;
        g.p = p;
        g.omega = g.omega_volume = std::sqrt(es.eigenvalues().prod()) * sphere_area(n);
        g.upslope_ratio = 1;
        g.max_radius = std::sqrt(es.eigenvalues().maxCoeff());
        g.min_radius = std::sqrt(es.eigenvalues().minCoeff());
        return g;
    }
    WulffGeometry g;
    if (resolution > 0) {
        g = wulff_sums(h, p, resolution);
    } else {
        // Refine until two successive resolutions agree; the point budget caps the work.
        constexpr int by_dim[] = {0, 0, 1024, 32, 16, 12, 8};
        int res = n < 7 ? by_dim[n] : 6;
        g = wulff_sums(h, p, res);
        double change = std::numeric_limits<double>::infinity();
        while (change > 1e-9) {
            const int next = res + std::max(2, res / 2);
            if (sphere_points(n, next) > 4e6) break;
            WulffGeometry finer = wulff_sums(h, p, next);
            change = std::max(std::abs(finer.omega_volume - g.omega_volume) / finer.omega_volume,
                              std::abs(finer.upslope_ratio - g.upslope_ratio) / finer.upslope_ratio);
            g = finer;
            res = next;
        }
        if (change > 1e-6) throw AccuracyError("level-set weight: sphere quadrature did not converge");
    }
    if (std::abs(g.omega - g.omega_volume) > 1e-6 * g.omega_volume)
        throw AccuracyError("level-set weight: surface and volume quadratures disagree");
    return g;
}

double wulff_omega(const Norm& h) { return wulff_geometry(h).omega; }

double CutoffSpec::value(double rho) const {
    if (rho <= inner) return 1;
    if (rho >= outer) return 0;
    const double t = (rho - inner) / (outer - inner);
    return 1 - t * t * t * (10 + t * (-15 + 6 * t));
}

double CutoffSpec::derivative(double rho) const {
    if (rho <= inner || rho >= outer) return 0;
    const double t = (rho - inner) / (outer - inner);
    return -30 * t * t * (1 - t) * (1 - t) / (outer - inner);
}

CutoffSpec CutoffSpec::for_inradius(double dist) {
    if (!(dist > 0)) throw DomainError("cutoff needs a positive inradius");
    return {0.25 * dist, 0.5 * dist};
}

double TruncatedBubble::eta(double rho) const {
    const double s = p / (p - 1);
    return cutoff.value(rho) * std::pow(epsilon + std::pow(rho, s), -(n() - p) / p);
}

double TruncatedBubble::eta_derivative(double rho) const {
    const double s = p / (p - 1);
    const double m = (n() - p) / p;
    const double base = epsilon + std::pow(rho, s);
    const double kernel = std::pow(base, -m);
    const double kernel_d = -m * s * std::pow(rho, s - 1) * kernel / base;
    return cutoff.derivative(rho) * kernel + cutoff.value(rho) * kernel_d;
}

double TruncatedBubble::v_scale() const {
    return std::pow(std::pow(epsilon, 1 / p) * c_np(n(), p), (n() - p) / p);
}

double TruncatedBubble::v(double rho) const { return v_scale() * eta(rho); }

TruncatedBubble truncated_bubble(const Norm& h, double p, double epsilon, double radius) {
    require_exponents(h.dim(), p);
    if (!(epsilon > 0)) throw DomainError("epsilon must be positive");
    return {h, p, epsilon, CutoffSpec::for_inradius(radius), std::nullopt};
}

TruncatedBubble truncated_bubble(const Norm& h, double p, double epsilon, const Rectangle& rect) {
    if (h.dim() != 2) throw DomainError("rectangle mode is two-dimensional");
    if (!(rect.x0 < 0 && rect.x1 > 0 && rect.y0 < 0 && rect.y1 > 0))
        throw DomainError("rectangle must contain the origin in its interior");
    require_exponents(2, p);
    if (!(epsilon > 0)) throw DomainError("epsilon must be positive");
    const double euclid = std::min({-rect.x0, rect.x1, -rect.y0, rect.y1});
    const auto geo = wulff_geometry(h, p, 512);
    return {h, p, epsilon, CutoffSpec::for_inradius(euclid / (1.001 * geo.max_radius)), rect};
}

QuadReport bubble_norms(const TruncatedBubble& t, double q, const WulffGeometry* geometry) {
    const double n = t.n();
    const double p = t.p;
    const double pstar = critical_exponent(n, p);
    if (!(q >= 1)) throw DomainError("q must be >= 1");
    const double mu = std::pow(t.epsilon, (p - 1) / p);
    QuadReport rep;
    rep.epsilon = t.epsilon;
    const double abs_tol = 1e-10;
    const double rel_tol = 1e-9;

    auto record = [&](const QuadResult<double>& r, double& slot) {
        if (!r.converged) throw AccuracyError("adaptive quadrature did not reach its tolerance");
        slot = r.value;
        rep.quad_err = std::max(rep.quad_err, r.error / std::max(std::abs(r.value), 1e-300));
    };

    if (!t.rectangle) {
        WulffGeometry local;
        if (!geometry) local = wulff_geometry(t.norm, p);
        const WulffGeometry& geo = geometry ? *geometry : local;
        const double up = geo.upslope_ratio;
        const auto pts = dyadic_breakpoints(mu, t.cutoff.outer, {t.cutoff.inner});
        const std::span<const double> bp(pts);
        auto radial = [&](auto&& f) {
            return integrate<double>([&](double r) { return geo.omega * f(r) * std::pow(r, n - 1); }, bp,
                                     abs_tol, rel_tol, 20000);
        };
        record(radial([&](double r) {
                   const double d = t.eta_derivative(r);
                   return (d > 0 ? up : 1.0) * std::pow(std::abs(d), p);
               }),
               rep.gradHp);
        record(radial([&](double r) { return std::pow(t.eta(r), pstar); }), rep.lpstar);
        record(radial([&](double r) { return std::pow(t.eta(r), p); }), rep.lp);
        record(radial([&](double r) { return std::pow(t.eta(r), q); }), rep.lq);
        if (rep.quad_err > 1e-7) throw AccuracyError("quadrature error above 1e-7 relative");
        return rep;
    }

    // Grid mode: nested Cartesian quadrature over the rectangle.
    const Rectangle& rect = *t.rectangle;
    const auto geo = wulff_geometry(t.norm, p, 512);
    const double reach = 1.01 * geo.max_radius * t.cutoff.outer;
    const double xa = std::max(rect.x0, -reach), xb = std::min(rect.x1, reach);
    const double ya = std::max(rect.y0, -reach), yb = std::min(rect.y1, reach);
    const auto xs = symmetric_breakpoints(mu, xa, xb);
    const auto ys = symmetric_breakpoints(mu, ya, yb);

    auto planar = [&](auto&& f) {
        auto slice = [&](double y) {
            auto r = integrate<double>([&](double x) { return f(x, y); }, std::span<const double>(xs), abs_tol * 1e-2,
                                       rel_tol * 1e-2, 20000);
            return r.value;
        };
        return integrate<double>(slice, std::span<const double>(ys), abs_tol, rel_tol, 20000);
    };
    Vector x(2);
    auto at = [&](double a, double b) -> Vector& {
        x << a, b;
        return x;
    };
    record(planar([&](double a, double b) {
               const Vector& pt = at(a, b);
               if (pt.isZero(0)) return 0.0;
               const double rho = t.norm.dual_value(-pt);
               if (rho >= t.cutoff.outer) return 0.0;
               const Vector grad = t.eta_derivative(rho) * Vector(-t.norm.dual_gradient(-pt));
               return grad.isZero(0) ? 0.0 : std::pow(t.norm.value(grad), p);
           }),
           rep.gradHp);
    auto power_of_eta = [&](double e) {
        return planar([&, e](double a, double b) {
            const double rho = t.norm.dual_value(-at(a, b));
            return rho >= t.cutoff.outer ? 0.0 : std::pow(t.eta(rho), e);
        });
    };
    record(power_of_eta(pstar), rep.lpstar);
    record(power_of_eta(p), rep.lp);
    record(power_of_eta(q), rep.lq);
    return rep;
}

double SobolevIntegrals::constant(double n, double p) const { return std::pow(grad_integral, p / n); }

SobolevIntegrals sobolev_integrals(const Norm& h, double p, const WulffGeometry* geometry) {
    const double n = h.dim();
    require_exponents(n, p);
    WulffGeometry local;
    if (!geometry) local = wulff_geometry(h, p);
    const WulffGeometry& geo = geometry ? *geometry : local;

    const double s = p / (p - 1);
    const double c = c_np(n, p);
    const double grad_coeff = std::pow(c, n - p) * std::pow((n - p) / (p - 1), p);
    const double crit_coeff = std::pow(c, n);
    const double rho_max = 1e6;

    std::vector<double> pts{0.0};
    for (double r = 1.0 / 1024; r < rho_max; r *= 2) pts.push_back(r);
    pts.push_back(rho_max);
    const std::span<const double> bp(pts);

    auto grad_f = [&](double r) { return grad_coeff * std::pow(r, s + n - 1) / std::pow(1 + std::pow(r, s), n); };
    auto crit_f = [&](double r) { return crit_coeff * std::pow(r, n - 1) / std::pow(1 + std::pow(r, s), n); };
    const auto g = integrate<double>(grad_f, bp, 0.0, 1e-14, 20000);
    const auto k = integrate<double>(crit_f, bp, 0.0, 1e-14, 20000);

    // Two-term tail of A r^e (1 + r^{-s})^{-n} beyond rho_max.
    auto tail = [&](double coeff, double e) {
        return coeff * (std::pow(rho_max, e + 1) / (-e - 1) - n * std::pow(rho_max, e + 1 - s) / (s - e - 1));
    };
    SobolevIntegrals out;
    out.omega = geo.omega;
    out.grad_integral = geo.omega * (g.value + tail(grad_coeff, s + n - 1 - s * n));
    out.critical_integral = geo.omega * (k.value + tail(crit_coeff, n - 1 - s * n));
    return out;
}

double sobolev_constant(const Norm& h, int n, double p) {
    if (h.dim() != n) throw DomainError("norm dimension differs from n");
    const auto si = sobolev_integrals(h, p);
    if (std::abs(si.grad_integral - si.critical_integral) > 1e-6 * si.critical_integral)
        throw AccuracyError("gradient and critical integrals of the extremal disagree");
    return si.constant(n, p);
}

std::string to_string(AsymptoticLaw law) {
    switch (law) {
        case AsymptoticLaw::Power: return "power";
        case AsymptoticLaw::PowerPlusO1: return "power_plus_constant";
        case AsymptoticLaw::Log: return "log";
    }
    return "unknown";
}

namespace {

struct LinearFit {
    double slope{0}, intercept{0}, ssr{0};
    double condition{0};
};

// Weighted least squares y ~ slope x + intercept, solved by SVD on the column-scaled
// design so that slope columns spanning many decades stay well conditioned.
LinearFit weighted_line(std::span<const double> x, std::span<const double> y, std::span<const double> w) {
    const auto m = static_cast<Eigen::Index>(x.size());
    double scale = 0;
    for (double v : x) scale = std::max(scale, std::abs(v));
    if (scale == 0) scale = 1;
    Eigen::MatrixX2d design(m, 2);
    Eigen::VectorXd rhs(m);
    for (Eigen::Index i = 0; i < m; ++i) {
        const double sw = std::sqrt(w[static_cast<std::size_t>(i)]);
        design(i, 0) = sw * x[static_cast<std::size_t>(i)] / scale;
        design(i, 1) = sw;
        rhs(i) = sw * y[static_cast<std::size_t>(i)];
    }
    Eigen::JacobiSVD<Eigen::MatrixX2d> svd(design, Eigen::ComputeThinU | Eigen::ComputeThinV);
    LinearFit f;
    const auto& sv = svd.singularValues();
    f.condition = sv(1) > 0 ? sv(0) / sv(1) : std::numeric_limits<double>::infinity();
    const Eigen::Vector2d sol = svd.solve(rhs);
    f.slope = sol(0) / scale;
    f.intercept = sol(1);
    f.ssr = (design * sol - rhs).squaredNorm();
    return f;
}

}  // namespace

FitReport fit_asymptotic(std::span<const double> eps, std::span<const double> val, AsymptoticLaw law) {
    const std::size_t m = eps.size();
    if (m != val.size()) throw FitError("epsilon and value lengths differ");
    if (m < 6) throw FitError("need at least 6 sweep points");
    for (std::size_t i = 0; i < m; ++i) {
        if (!(eps[i] > 0) || !std::isfinite(val[i])) throw FitError("sweep has invalid entries");
        if (i > 0 && !(eps[i] < eps[i - 1])) throw FitError("epsilon must be strictly decreasing");
    }
    FitReport rep;
    rep.law = law;
    rep.points = static_cast<int>(m);
    std::vector<double> x(m), y(m), w(m, 1.0);

    auto max_relative_misfit = [&](auto&& model) {
        double r = 0;
        for (std::size_t i = 0; i < m; ++i) r = std::max(r, std::abs(model(eps[i]) / val[i] - 1));
        return r;
    };

    switch (law) {
        case AsymptoticLaw::Power: {
            for (std::size_t i = 0; i < m; ++i) {
                if (!(val[i] > 0)) throw FitError("power law needs positive values");
                x[i] = std::log(eps[i]);
                y[i] = std::log(val[i]);
            }
            const auto f = weighted_line(x, y, w);
            if (f.condition > 1e8) throw FitError("ill-conditioned power fit");
            rep.exponent = f.slope;
            rep.coefficient = std::exp(f.intercept);
            rep.residual = max_relative_misfit([&](double e) { return rep.coefficient * std::pow(e, rep.exponent); });
            return rep;
        }
        case AsymptoticLaw::Log: {
            for (std::size_t i = 0; i < m; ++i) {
                x[i] = std::abs(std::log(eps[i]));
                y[i] = val[i];
                w[i] = 1 / (val[i] * val[i]);
            }
            const auto f = weighted_line(x, y, w);
            if (f.condition > 1e8) throw FitError("ill-conditioned log fit");
            rep.coefficient = f.slope;
            rep.constant = f.intercept;
            rep.residual = max_relative_misfit([&](double e) { return rep.coefficient * std::abs(std::log(e)) + rep.constant; });
            return rep;
        }
        case AsymptoticLaw::PowerPlusO1: {
            for (std::size_t i = 0; i < m; ++i) {
                if (val[i] == 0) throw FitError("zero value in sweep");
                y[i] = val[i];
                w[i] = 1 / (val[i] * val[i]);
            }
            // Exponent profile: for fixed a the model C eps^a + D is linear in (C, D).
            auto profile = [&](double a) {
                for (std::size_t i = 0; i < m; ++i) x[i] = std::pow(eps[i], a);
                return weighted_line(x, y, w);
            };
            const double lo = -8, hi = 8, step = 0.01;
            double best_a = lo;
            double best = std::numeric_limits<double>::infinity();
            for (double a = lo; a <= hi + 1e-12; a += step) {
                if (std::abs(a) < 0.5 * step) continue;  // a = 0 is collinear with the constant
                const double v = profile(a).ssr;
                if (v < best) {
                    best = v;
                    best_a = a;
                }
            }
            if (best_a <= lo + step || best_a >= hi - step) throw FitError("exponent at the edge of the scan range");
            double a = best_a - step, b = best_a + step;
            const double gr = (std::sqrt(5.0) - 1) / 2;
            double c1 = b - gr * (b - a), c2 = a + gr * (b - a);
            double f1 = profile(c1).ssr, f2 = profile(c2).ssr;
            for (int it = 0; it < 200 && b - a > 1e-13; ++it) {
                if (f1 < f2) {
                    b = c2;
                    c2 = c1;
                    f2 = f1;
                    c1 = b - gr * (b - a);
                    f1 = profile(c1).ssr;
                } else {
                    a = c1;
                    c1 = c2;
                    f1 = f2;
                    c2 = a + gr * (b - a);
                    f2 = profile(c2).ssr;
                }
            }
            rep.exponent = (a + b) / 2;
            const auto f = profile(rep.exponent);
            if (!std::isfinite(f.condition) || f.condition > 1e8) throw FitError("ill-conditioned power fit");
            rep.coefficient = f.slope;
            rep.constant = f.intercept;
            rep.residual = max_relative_misfit(
                [&](double e) { return rep.coefficient * std::pow(e, rep.exponent) + rep.constant; });
            return rep;
        }
    }
    return rep;
}

}  // namespace anisobn
