#pragma once

#include <optional>
#include <span>
#include <vector>

#include "anisobn/anisotropy.hpp"

namespace anisobn {

/// n p / (n - p).
double critical_exponent(double n, double p);

/// Normalizing constant of the extremal profile; requires 1 < p < n.
double c_np(double n, double p);

/// Extremal of the anisotropic Sobolev inequality centred at `center` with scale `mu`.
struct Bubble {
    Bubble(Norm norm, double p, double mu = 1.0, std::optional<Vector> center = std::nullopt);

    [[nodiscard]] int n() const noexcept { return norm.dim(); }

    Norm norm;
    double p;
    double mu;
    Vector center;
};

/// Value of the profile at reflected-dual distance rho from the centre.
double bubble_profile(double n, double p, double mu, double rho);
double bubble_eval(const Bubble& b, const Vector& x);

/// H(grad U)^p for mu = 1 at reflected-dual distance rho.
double bubble_density_profile(double n, double p, double rho);
/// Requires mu = 1 and centre 0; returns 0 at the centre.
double bubble_grad_energy_density(const Bubble& b, const Vector& x);

/// Level-set weight of the Wulff shape {H0hat < 1}, with the orientation weight that
/// H-radial profiles with increasing slope pick up when H is not symmetric.
struct WulffGeometry {
    int n{0};
    double omega{0};           // surface route
    double omega_volume{0};    // n |{H0hat < 1}|
    double p{2};
    double upslope_ratio{1};   // (int H(grad H0hat)^p H0hat^{-n}) / omega
    double max_radius{1};      // Euclidean radius of {H0hat < 1}
    double min_radius{1};

    /// Wulff ball {H0hat < radius} volume.
    [[nodiscard]] double ball_volume(double radius) const;
};

/// Both routes to omega; throws AccuracyError when they disagree beyond 1e-6 relative.
WulffGeometry wulff_geometry(const Norm& h, double p = 2.0, int resolution = 0);
double wulff_omega(const Norm& h);

/// Smooth cutoff: 1 on [0, inner], 0 beyond outer, quintic smoothstep in between.
struct CutoffSpec {
    double inner;
    double outer;

    [[nodiscard]] double value(double rho) const;
    [[nodiscard]] double derivative(double rho) const;
    /// inner = 0.25 dist, outer = 0.5 dist.
    static CutoffSpec for_inradius(double dist);
};

/// Rectangle [x0, x1] x [y0, y1] containing the origin.
struct Rectangle {
    double x0, x1, y0, y1;
};

struct TruncatedBubble {
    Norm norm;
    double p;
    double epsilon;
    CutoffSpec cutoff;
    std::optional<Rectangle> rectangle;  // grid mode when set, Wulff ball otherwise

    [[nodiscard]] int n() const noexcept { return norm.dim(); }
    /// Cut-off kernel phi(rho) (eps + rho^{p/(p-1)})^{-(n-p)/p}.
    [[nodiscard]] double eta(double rho) const;
    [[nodiscard]] double eta_derivative(double rho) const;
    /// (eps^{1/p} c_np)^{(n-p)/p} eta.
    [[nodiscard]] double v(double rho) const;
    [[nodiscard]] double v_scale() const;
};

/// Truncated bubble on the Wulff ball {H0hat < radius}, default cutoff.
TruncatedBubble truncated_bubble(const Norm& h, double p, double epsilon, double radius);
/// Truncated bubble on a rectangle around 0 (n = 2), cutoff inside the inscribed Wulff ball.
TruncatedBubble truncated_bubble(const Norm& h, double p, double epsilon, const Rectangle& rect);

struct QuadReport {
    double epsilon{0};
    double gradHp{0};
    double lpstar{0};
    double lp{0};
    double lq{0};
    double quad_err{0};  // worst relative error estimate of the four
};

/// The four integrals of the truncated kernel: H(grad eta)^p, eta^{p*}, eta^p, eta^q.
QuadReport bubble_norms(const TruncatedBubble& t, double q, const WulffGeometry* geometry = nullptr);

/// Whole-space integrals of the mu = 1 extremal; they coincide and equal S_H^{n/p}.
struct SobolevIntegrals {
    double grad_integral{0};
    double critical_integral{0};
    double omega{0};
    [[nodiscard]] double constant(double n, double p) const;  // S_H
};

/// Radial integral int_0^inf of the profile density, without the omega factor.
SobolevIntegrals sobolev_integrals(const Norm& h, double p, const WulffGeometry* geometry = nullptr);
/// S_H; throws AccuracyError when the two integrals disagree beyond 1e-6 relative.
double sobolev_constant(const Norm& h, int n, double p);

enum class AsymptoticLaw { Power, PowerPlusO1, Log };

struct FitReport {
    AsymptoticLaw law{AsymptoticLaw::Power};
    double exponent{0};     // Power laws
    double coefficient{0};  // leading constant (Power laws) or |log eps| slope (Log)
    double constant{0};     // modelled O(1) term
    double residual{0};     // max relative misfit
    int points{0};
};

/// Least-squares fit of value ~ C eps^a (+ D) or C |log eps| + D.
FitReport fit_asymptotic(std::span<const double> epsilon, std::span<const double> value, AsymptoticLaw law);

std::string to_string(AsymptoticLaw law);

}  // namespace anisobn
