#include "anisobn/anisotropy.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace anisobn {

template class AnisotropicNorm<double>;
template class DualNorm<double>;

std::string to_string(NormFamily family) {
    switch (family) {
        case NormFamily::Euclidean: return "euclidean";
        case NormFamily::Ellipsoid: return "ellipsoid";
        case NormFamily::ShiftedEllipsoid: return "shifted_ellipsoid";
        case NormFamily::LrRegularized: return "lr_regularized";
    }
    return "unknown";
}

std::string to_string(DualMode mode) { return mode == DualMode::ClosedForm ? "closed_form" : "numeric"; }

Ellipticity estimate_ellipticity(const Norm& h, int samples, std::uint64_t seed) {
    if (samples < 1) throw DomainError("estimate_ellipticity needs at least one sample");
    double lo = std::numeric_limits<double>::infinity();
    double hi = 0;
    for (const auto& d : detail::sample_directions<double>(h.dim(), samples, seed)) {
        const Matrix m = h.half_hessian_sq(d);
        if (!m.allFinite()) {
            hi = std::numeric_limits<double>::infinity();
            continue;
        }
        Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
        lo = std::min(lo, es.eigenvalues().minCoeff());
        hi = std::max(hi, es.eigenvalues().maxCoeff());
    }
    return {lo, hi, !(lo > 1e-4) || !std::isfinite(hi)};
}

double AxiomReport::worst_identity() const {
    return std::max({homogeneity, triangle, lipschitz, euler, gradient_modulus, dual_homogeneity,
                     dual_triangle, duality_grad_dual, duality_dual_grad});
}

bool AxiomReport::passes() const {
    const double duality_tol = dual_mode == "numeric" ? 1e-5 : 1e-8;
    const double algebra = std::max({homogeneity, triangle, lipschitz, euler, gradient_modulus,
                                     dual_homogeneity, dual_triangle});
    return algebra <= 1e-8 && duality_grad_dual <= duality_tol && duality_dual_grad <= duality_tol &&
           gradient_fd <= 1e-6 && !ellipticity.flagged;
}

AxiomReport verify_norm_axioms(const Norm& h, int samples, std::uint64_t seed) {
    if (samples < 1) throw DomainError("verify_norm_axioms needs at least one sample");
    AxiomReport rep;
    rep.family = to_string(h.family());
    rep.dual_mode = to_string(h.dual_mode());
    rep.samples = samples;
    const int n = h.dim();
    const auto& c = h.constants();

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unif(-1.0, 1.0);
    auto random_vector = [&] {
        Vector v(n);
        for (int i = 0; i < n; ++i) v(i) = gauss(rng);
        return Vector(v * std::pow(10.0, 2.0 * unif(rng)));
    };

    for (int k = 0; k < samples; ++k) {
        const Vector x = random_vector();
        const Vector y = random_vector();
        const double t = std::pow(10.0, 3.0 * unif(rng));
        const double hx = h.value(x);
        const double hy = h.value(y);

        rep.homogeneity = std::max(rep.homogeneity, std::abs(h.value(t * x) - t * hx) / (1 + t * hx));
        rep.triangle = std::max(rep.triangle, (h.value(x + y) - hx - hy) / (1 + hx + hy));
        rep.lipschitz =
            std::max(rep.lipschitz, (std::abs(hx - hy) - c.equivalence * (x - y).norm()) / (1 + hx + hy));

        const Vector g = h.gradient(x);
        rep.euler = std::max(rep.euler, std::abs(x.dot(g) - hx) / hx);
        const double gn = g.norm();
        rep.gradient_modulus =
            std::max({rep.gradient_modulus, gn - c.gradient_bound, 1 / c.gradient_bound - gn});

        const double step = 1e-5 * x.norm();
        Vector fd(n);
        for (int i = 0; i < n; ++i) {
            Vector e = Vector::Zero(n);
            e(i) = step;
            fd(i) = (h.value(x + e) - h.value(x - e)) / (2 * step);
        }
        rep.gradient_fd = std::max(rep.gradient_fd, (fd - g).norm() / gn);

        const double dx = h.dual_value(x);
        const double dy = h.dual_value(y);
        rep.dual_homogeneity = std::max(rep.dual_homogeneity, std::abs(h.dual_value(t * x) - t * dx) / (1 + t * dx));
        rep.dual_triangle = std::max(rep.dual_triangle, (h.dual_value(x + y) - dx - dy) / (1 + dx + dy));
        rep.duality_grad_dual = std::max(rep.duality_grad_dual, std::abs(h.value(h.dual_gradient(y)) - 1));
        rep.duality_dual_grad = std::max(rep.duality_dual_grad, std::abs(h.dual_value(g) - 1));
    }
    rep.ellipticity = estimate_ellipticity(h, 4096, seed ^ 0x9e3779b97f4a7c15ULL);
    return rep;
}

}  // namespace anisobn
