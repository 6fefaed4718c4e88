#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "anisobn/errors.hpp"

namespace anisobn {

template <typename Scalar>
using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

enum class NormFamily { Euclidean, Ellipsoid, ShiftedEllipsoid, LrRegularized };
enum class DualMode { ClosedForm, Numeric };
enum class Orientation { H0, H0hat };

std::string to_string(NormFamily family);
std::string to_string(DualMode mode);

/// Cached equivalence, gradient and ellipticity bounds of a norm.
template <typename Scalar>
struct NormConstants {
    Scalar equivalence{1};      // nu^{-1}|x| <= H(x) <= nu|x|
    Scalar gradient_bound{1};   // theta^{-1} <= |grad H| <= theta
    Scalar ellipticity_lower{1};
    Scalar ellipticity_upper{1};
    bool uniformly_convex{true};
};

template <typename Scalar>
struct SupportPoint {
    Scalar value{0};
    Vec<Scalar> maximizer;  // argmax on the unit sphere of the gauge
    bool converged{false};
};

namespace detail {

template <typename Scalar>
void require_finite(const Vec<Scalar>& v, const char* what) {
    if (!v.allFinite()) throw DomainError(std::string(what) + ": non-finite input");
}

/// Unit directions used to seed sampling: +-axes first, then seeded random.
template <typename Scalar>
std::vector<Vec<Scalar>> sample_directions(int dim, int count, std::uint64_t seed) {
    std::vector<Vec<Scalar>> out;
    out.reserve(static_cast<std::size_t>(count + 2 * dim));
    for (int i = 0; i < dim; ++i) {
        Vec<Scalar> e = Vec<Scalar>::Zero(dim);
        e(i) = 1;
        out.push_back(e);
        out.push_back(-e);
    }
    if (dim == 2) {
        for (int k = 0; k < count; ++k) {
            const Scalar a = 2 * std::numbers::pi_v<Scalar> * (Scalar(k) + Scalar(0.5)) / Scalar(count);
            Vec<Scalar> v(2);
            v << std::cos(a), std::sin(a);
            out.push_back(v);
        }
        return out;
    }
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int k = 0; k < count; ++k) {
        Vec<Scalar> v(dim);
        for (int i = 0; i < dim; ++i) v(i) = static_cast<Scalar>(gauss(rng));
        out.push_back(v / v.norm());
    }
    return out;
}

}  // namespace detail

/// sup{<zeta, xi> : gauge(xi) = 1} for a convex, positively 1-homogeneous gauge.
///
/// Maximizes the 0-homogeneous ratio <zeta, theta>/gauge(theta) over the Euclidean
/// sphere by Barzilai-Borwein ascent with Armijo backtracking, from the best few of a
/// pool of deterministic and seeded random starts. Further starts are tried only
/// when an ascent fails to converge.
template <typename Scalar, typename Gauge, typename GaugeGrad>
SupportPoint<Scalar> support_function(const Gauge& gauge, const GaugeGrad& gauge_grad,
                                      const Vec<Scalar>& zeta, std::uint64_t seed = 0x5eedULL,
                                      int random_starts = 4, int max_iter = 4000) {
    const int dim = static_cast<int>(zeta.size());
    SupportPoint<Scalar> best;
    best.value = -std::numeric_limits<Scalar>::infinity();
    const Scalar zn = zeta.norm();
    if (zn == Scalar(0)) {
        best.value = 0;
        best.maximizer = Vec<Scalar>::Zero(dim);
        best.converged = true;
        return best;
    }

    std::vector<Vec<Scalar>> starts;
    for (int i = 0; i < dim && static_cast<int>(starts.size()) < 8; ++i) {
        Vec<Scalar> e = Vec<Scalar>::Zero(dim);
        e(i) = 1;
        starts.push_back(e);
        starts.push_back(-e);
    }
    for (int i = 0; i + 1 < dim && static_cast<int>(starts.size()) < 8; ++i) {
        for (int s : {1, -1}) {
            Vec<Scalar> e = Vec<Scalar>::Zero(dim);
            e(i) = 1;
            e(i + 1) = s;
            starts.push_back(e / e.norm());
            starts.push_back(-e / e.norm());
        }
    }
    while (static_cast<int>(starts.size()) > 8) starts.pop_back();
    starts.push_back(zeta / zn);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int k = 0; k < random_starts; ++k) {
        Vec<Scalar> v(dim);
        for (int i = 0; i < dim; ++i) v(i) = static_cast<Scalar>(gauss(rng));
        starts.push_back(v / v.norm());
    }

    auto ratio = [&](const Vec<Scalar>& th) { return zeta.dot(th) / gauge(th); };
    auto ratio_grad = [&](const Vec<Scalar>& th) -> Vec<Scalar> {
        const Scalar g = gauge(th);
        return zeta / g - (zeta.dot(th) / (g * g)) * gauge_grad(th);
    };

    std::sort(starts.begin(), starts.end(),
              [&](const Vec<Scalar>& a, const Vec<Scalar>& b) { return ratio(a) > ratio(b); });

    const Scalar step_tol = Scalar(1e-12);
    int converged_runs = 0;
    for (const auto& start : starts) {
        Vec<Scalar> th = start;
        Scalar f = ratio(th);
        Vec<Scalar> g = ratio_grad(th);
        Scalar alpha = gauge(th) / zn;
        bool converged = false;
        for (int it = 0; it < max_iter; ++it) {
            const Scalar gg = g.squaredNorm();
            if (gg == Scalar(0)) {
                converged = true;
                break;
            }
            Vec<Scalar> trial;
            Scalar ft = f;
            bool accepted = false;
            for (int bt = 0; bt < 60; ++bt) {
                trial = th + alpha * g;
                trial /= trial.norm();
                ft = ratio(trial);
                if (ft >= f + Scalar(1e-4) * alpha * gg) {
                    accepted = true;
                    break;
                }
                alpha /= 2;
            }
            const Scalar step = (trial - th).norm();
            if (!accepted) {
                // No representable ascent left along the gradient.
                converged = step <= Scalar(1e-10) || alpha * std::sqrt(gg) <= step_tol;
                break;
            }
            const Vec<Scalar> g_new = ratio_grad(trial);
            const Vec<Scalar> s = trial - th;
            const Vec<Scalar> y = g_new - g;
            th = trial;
            f = ft;
            g = g_new;
            if (step <= step_tol) {
                converged = true;
                break;
            }
            const Scalar sy = s.dot(y);
            alpha = sy < Scalar(0) ? s.squaredNorm() / (-sy) : Scalar(2) * alpha;
            alpha = std::clamp(alpha, Scalar(1e-14) * gauge(th) / zn, Scalar(1e6) * gauge(th) / zn);
        }
        if (f > best.value) {
            best.value = f;
            best.maximizer = th;
            best.converged = converged;
        }
        if (converged && ++converged_runs >= 2) break;
    }
    return best;
}

template <typename Scalar>
class AnisotropicNorm {
public:
    using Vector = Vec<Scalar>;
    using Matrix = Mat<Scalar>;

    static AnisotropicNorm euclidean(int dim) {
        if (dim < 2) throw DomainError("norm dimension must be at least 2");
        AnisotropicNorm h(NormFamily::Euclidean, dim);
        h.dual_mode_ = DualMode::ClosedForm;
        h.constants_ = {1, 1, 1, 1, true};
        return h;
    }

    static AnisotropicNorm ellipsoid(const Matrix& a) {
        AnisotropicNorm h(NormFamily::Ellipsoid, static_cast<int>(a.rows()));
        h.set_spd(a);
        h.dual_mode_ = DualMode::ClosedForm;
        Eigen::SelfAdjointEigenSolver<Matrix> es(a);
        const Scalar lo = es.eigenvalues().minCoeff();
        const Scalar hi = es.eigenvalues().maxCoeff();
        const Scalar nu = std::max(std::sqrt(hi), 1 / std::sqrt(lo));
        h.constants_ = {nu, nu, lo, hi, true};
        return h;
    }

    /// H(x) = sqrt(x^T A x) + <b, x>; requires b^T A^{-1} b < 1.
    static AnisotropicNorm shifted_ellipsoid(const Matrix& a, const Vector& b) {
        AnisotropicNorm h(NormFamily::ShiftedEllipsoid, static_cast<int>(a.rows()));
        h.set_spd(a);
        if (b.size() != a.rows() || !b.allFinite()) throw DomainError("shift vector has wrong size");
        if (b.dot(h.a_inv_ * b) >= 1) throw DomainError("shift too long: b^T A^{-1} b must be < 1");
        h.b_ = b;
        h.dual_mode_ = DualMode::Numeric;
        h.constants_ = h.sample_constants();
        return h;
    }

    /// H = sqrt((1-w) |x|_r^2 + w |x|^2), w = delta/(1+delta).
    static AnisotropicNorm lr_regularized(int dim, Scalar r, Scalar delta) {
        if (dim < 2) throw DomainError("norm dimension must be at least 2");
        if (!(r > 1) || !std::isfinite(static_cast<double>(r))) throw DomainError("lr exponent must be > 1");
        if (!(delta >= 0)) throw DomainError("blend parameter must be >= 0");
        AnisotropicNorm h(NormFamily::LrRegularized, dim);
        h.r_ = r;
        h.delta_ = delta;
        h.blend_ = std::isinf(static_cast<double>(delta)) ? Scalar(1) : delta / (1 + delta);
        h.dual_mode_ = h.blend_ == 0 || h.blend_ == 1 ? DualMode::ClosedForm : DualMode::Numeric;
        h.constants_ = h.sample_constants();
        return h;
    }

    /// Copy that evaluates its dual through the numeric support function.
    [[nodiscard]] AnisotropicNorm with_numeric_dual() const {
        AnisotropicNorm h = *this;
        h.dual_mode_ = DualMode::Numeric;
        return h;
    }

    [[nodiscard]] NormFamily family() const noexcept { return family_; }
    [[nodiscard]] int dim() const noexcept { return dim_; }
    [[nodiscard]] DualMode dual_mode() const noexcept { return dual_mode_; }
    [[nodiscard]] const NormConstants<Scalar>& constants() const noexcept { return constants_; }
    [[nodiscard]] const Matrix& matrix() const noexcept { return a_; }
    [[nodiscard]] const Vector& shift() const noexcept { return b_; }
    [[nodiscard]] Scalar lr_exponent() const noexcept { return r_; }
    [[nodiscard]] Scalar blend_parameter() const noexcept { return delta_; }
    [[nodiscard]] bool symmetric() const noexcept {
        return family_ != NormFamily::ShiftedEllipsoid || b_.isZero(0);
    }

    [[nodiscard]] Scalar value(const Vector& xi) const {
        check_size(xi);
        detail::require_finite(xi, "norm");
        switch (family_) {
            case NormFamily::Euclidean: return xi.norm();
            case NormFamily::Ellipsoid: return std::sqrt(std::max(Scalar(0), xi.dot(a_ * xi)));
            case NormFamily::ShiftedEllipsoid:
                return std::sqrt(std::max(Scalar(0), xi.dot(a_ * xi))) + b_.dot(xi);
            case NormFamily::LrRegularized: {
                const Scalar hr = lr_norm(xi, r_);
                return std::sqrt((1 - blend_) * hr * hr + blend_ * xi.squaredNorm());
            }
        }
        return 0;
    }

    [[nodiscard]] Vector gradient(const Vector& xi) const {
        check_nonzero(xi, "gradient");
        switch (family_) {
            case NormFamily::Euclidean: return xi / xi.norm();
            case NormFamily::Ellipsoid: {
                const Vector ax = a_ * xi;
                return ax / std::sqrt(xi.dot(ax));
            }
            case NormFamily::ShiftedEllipsoid: {
                const Vector ax = a_ * xi;
                return ax / std::sqrt(xi.dot(ax)) + b_;
            }
            case NormFamily::LrRegularized: {
                const Scalar hr = lr_norm(xi, r_);
                const Scalar h = value(xi);
                return ((1 - blend_) * hr * lr_gradient(xi, r_, hr) + blend_ * xi) / h;
            }
        }
        return Vector::Zero(dim_);
    }

    /// Hessian of H^2/2 at xi != 0.
    [[nodiscard]] Matrix half_hessian_sq(const Vector& xi) const {
        check_nonzero(xi, "hessian");
        switch (family_) {
            case NormFamily::Euclidean: return Matrix::Identity(dim_, dim_);
            case NormFamily::Ellipsoid: return a_;
            case NormFamily::ShiftedEllipsoid: {
                const Vector ax = a_ * xi;
                const Scalar s = std::sqrt(xi.dot(ax));
                const Vector g = ax / s + b_;
                const Scalar h = s + b_.dot(xi);
                return g * g.transpose() + h * (a_ / s - ax * ax.transpose() / (s * s * s));
            }
            case NormFamily::LrRegularized: {
                if (blend_ == 1) return Matrix::Identity(dim_, dim_);
                const Scalar hr = lr_norm(xi, r_);
                const Vector gr = lr_gradient(xi, r_, hr);
                Matrix m = (2 - r_) * gr * gr.transpose();
                for (int i = 0; i < dim_; ++i)
                    m(i, i) += (r_ - 1) * std::pow(std::abs(xi(i)) / hr, r_ - 2);
                return (1 - blend_) * m + blend_ * Matrix::Identity(dim_, dim_);
            }
        }
        return Matrix::Identity(dim_, dim_);
    }

    [[nodiscard]] Scalar hessian_quadform(const Vector& xi, const Vector& eta) const {
        check_size(eta);
        return eta.dot(half_hessian_sq(xi) * eta);
    }

    [[nodiscard]] bool has_closed_form_dual() const noexcept {
        switch (family_) {
            case NormFamily::Euclidean:
            case NormFamily::Ellipsoid: return true;
            case NormFamily::ShiftedEllipsoid: return b_.isZero(0);
            case NormFamily::LrRegularized: return blend_ == 0 || blend_ == 1;
        }
        return false;
    }

    /// H0(zeta) = sup{<zeta, xi> : H(xi) = 1}.
    [[nodiscard]] Scalar dual_value(const Vector& zeta) const {
        check_size(zeta);
        detail::require_finite(zeta, "dual norm");
        if (dual_mode_ == DualMode::Numeric) {
            if (zeta.isZero(0)) return 0;
            return numeric_dual(zeta).value;
        }
        switch (family_) {
            case NormFamily::Euclidean: return zeta.norm();
            case NormFamily::Ellipsoid:
            case NormFamily::ShiftedEllipsoid: return std::sqrt(std::max(Scalar(0), zeta.dot(a_inv_ * zeta)));
            case NormFamily::LrRegularized:
                return blend_ == 1 ? zeta.norm() : lr_norm(zeta, conjugate(r_));
        }
        return 0;
    }

    [[nodiscard]] Vector dual_gradient(const Vector& zeta) const {
        check_nonzero(zeta, "dual gradient");
        if (dual_mode_ == DualMode::Numeric) {
            const auto sp = numeric_dual(zeta);
            return sp.maximizer / value(sp.maximizer);
        }
        switch (family_) {
            case NormFamily::Euclidean: return zeta / zeta.norm();
            case NormFamily::Ellipsoid:
            case NormFamily::ShiftedEllipsoid: {
                const Vector az = a_inv_ * zeta;
                return az / std::sqrt(zeta.dot(az));
            }
            case NormFamily::LrRegularized: {
                if (blend_ == 1) return zeta / zeta.norm();
                const Scalar rc = conjugate(r_);
                return lr_gradient(zeta, rc, lr_norm(zeta, rc));
            }
        }
        return Vector::Zero(dim_);
    }

    /// Numeric support function of the unit ball; throws when no start converges.
    [[nodiscard]] SupportPoint<Scalar> numeric_dual(const Vector& zeta) const {
        auto gauge = [this](const Vector& x) { return value(x); };
        auto grad = [this](const Vector& x) { return gradient(x); };
        auto sp = support_function<Scalar>(gauge, grad, zeta);
        if (!sp.converged) {
            for (std::uint64_t retry = 1; retry <= 3 && !sp.converged; ++retry) {
                auto again = support_function<Scalar>(gauge, grad, zeta, 0x5eedULL + retry, 16, 20000);
                if (again.value >= sp.value || again.converged) sp = again;
            }
        }
        if (!sp.converged)
            throw ConvergenceError<Scalar>("numeric dual norm did not converge", sp.value);
        return sp;
    }

private:
    AnisotropicNorm(NormFamily family, int dim) : family_(family), dim_(dim) {}

    void set_spd(const Matrix& a) {
        if (a.rows() != a.cols() || a.rows() < 2) throw DomainError("matrix must be square with n >= 2");
        if (!a.allFinite()) throw DomainError("matrix has non-finite entries");
        if (!a.isApprox(a.transpose(), Scalar(1e-12))) throw DomainError("matrix must be symmetric");
        Eigen::LLT<Matrix> llt(a);
        if (llt.info() != Eigen::Success) throw DomainError("matrix must be positive definite");
        a_ = a;
        a_inv_ = llt.solve(Matrix::Identity(a.rows(), a.cols()));
        b_ = Vector::Zero(a.rows());
    }

    void check_size(const Vector& v) const {
        if (v.size() != dim_) throw DomainError("vector dimension does not match norm dimension");
    }

    void check_nonzero(const Vector& v, const char* what) const {
        check_size(v);
        detail::require_finite(v, what);
        if (v.isZero(0)) throw SingularityError(std::string(what) + " undefined at the origin");
    }

    static Scalar conjugate(Scalar r) { return r / (r - 1); }

    static Scalar lr_norm(const Vector& x, Scalar r) {
        const Scalar m = x.cwiseAbs().maxCoeff();
        if (m == Scalar(0)) return 0;
        Scalar s = 0;
        for (Eigen::Index i = 0; i < x.size(); ++i) s += std::pow(std::abs(x(i)) / m, r);
        return m * std::pow(s, 1 / r);
    }

    static Vector lr_gradient(const Vector& x, Scalar r, Scalar norm) {
        Vector g(x.size());
        for (Eigen::Index i = 0; i < x.size(); ++i) {
            const Scalar t = std::abs(x(i)) / norm;
            g(i) = (x(i) < 0 ? -1 : 1) * (t == 0 ? Scalar(0) : std::pow(t, r - 1));
        }
        return g;
    }

    NormConstants<Scalar> sample_constants() const {
        NormConstants<Scalar> c;
        Scalar h_lo = std::numeric_limits<Scalar>::infinity(), h_hi = 0;
        Scalar g_lo = h_lo, g_hi = 0, e_lo = h_lo, e_hi = 0;
        for (const auto& d : detail::sample_directions<Scalar>(dim_, 4096, 0xC0FFEEULL)) {
            const Scalar h = value(d);
            h_lo = std::min(h_lo, h);
            h_hi = std::max(h_hi, h);
            const Scalar gn = gradient(d).norm();
            g_lo = std::min(g_lo, gn);
            g_hi = std::max(g_hi, gn);
            const Matrix m = half_hessian_sq(d);
            if (!m.allFinite()) {
                e_hi = std::numeric_limits<Scalar>::infinity();
                continue;
            }
            Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
            e_lo = std::min(e_lo, es.eigenvalues().minCoeff());
            e_hi = std::max(e_hi, es.eigenvalues().maxCoeff());
        }
        const Scalar widen = Scalar(1.01);
        c.equivalence = widen * std::max(h_hi, 1 / h_lo);
        c.gradient_bound = widen * std::max(g_hi, 1 / g_lo);
        c.ellipticity_lower = e_lo / widen;
        c.ellipticity_upper = e_hi * widen;
        c.uniformly_convex = c.ellipticity_lower > Scalar(1e-4) && std::isfinite(static_cast<double>(e_hi));
        return c;
    }

    NormFamily family_;
    int dim_;
    DualMode dual_mode_{DualMode::ClosedForm};
    NormConstants<Scalar> constants_{};
    Matrix a_;
    Matrix a_inv_;
    Vector b_;
    Scalar r_{2};
    Scalar delta_{0};
    Scalar blend_{0};
};

/// H0 or its reflection H0hat(zeta) = H0(-zeta), bundled with the parent norm.
template <typename Scalar>
class DualNorm {
public:
    DualNorm(AnisotropicNorm<Scalar> parent, Orientation orientation)
        : parent_(std::move(parent)), orientation_(orientation) {}

    [[nodiscard]] Scalar value(const Vec<Scalar>& zeta) const {
        return orientation_ == Orientation::H0 ? parent_.dual_value(zeta) : parent_.dual_value(-zeta);
    }
    [[nodiscard]] Vec<Scalar> gradient(const Vec<Scalar>& zeta) const {
        return orientation_ == Orientation::H0 ? Vec<Scalar>(parent_.dual_gradient(zeta))
                                               : Vec<Scalar>(-parent_.dual_gradient(-zeta));
    }
    [[nodiscard]] const AnisotropicNorm<Scalar>& parent() const noexcept { return parent_; }
    [[nodiscard]] Orientation orientation() const noexcept { return orientation_; }
    [[nodiscard]] int dim() const noexcept { return parent_.dim(); }

private:
    AnisotropicNorm<Scalar> parent_;
    Orientation orientation_;
};

using Norm = AnisotropicNorm<double>;
using Dual = DualNorm<double>;
using Vector = Vec<double>;
using Matrix = Mat<double>;

extern template class AnisotropicNorm<double>;
extern template class DualNorm<double>;

inline double eval_H(const Norm& h, const Vector& xi) { return h.value(xi); }
inline Vector grad_H(const Norm& h, const Vector& xi) { return h.gradient(xi); }
inline double hess_H2_quadform(const Norm& h, const Vector& xi, const Vector& eta) {
    return h.hessian_quadform(xi, eta);
}
inline double dual_norm(const Norm& h, const Vector& zeta) { return h.dual_value(zeta); }

struct Ellipticity {
    double lower;
    double upper;
    bool flagged;  // lower bound indistinguishable from 0
};

/// Sampled min/max of <(1/2) D^2 H^2(xi) eta, eta>/|eta|^2.
Ellipticity estimate_ellipticity(const Norm& h, int samples, std::uint64_t seed);

struct AxiomReport {
    std::string family;
    std::string dual_mode;
    int samples{0};
    double homogeneity{0};
    double triangle{0};
    double lipschitz{0};
    double euler{0};
    double gradient_modulus{0};
    double gradient_fd{0};
    double dual_homogeneity{0};
    double dual_triangle{0};
    double duality_grad_dual{0};  // |H(grad H0) - 1|
    double duality_dual_grad{0};  // |H0(grad H) - 1|
    Ellipticity ellipticity{};

    /// Worst of the algebraic residuals (everything except the finite-difference check).
    [[nodiscard]] double worst_identity() const;
    /// Tolerances: closed-form duals 1e-8, numeric duals 1e-5 on the duality pair.
    [[nodiscard]] bool passes() const;
};

AxiomReport verify_norm_axioms(const Norm& h, int samples, std::uint64_t seed);

}  // namespace anisobn
