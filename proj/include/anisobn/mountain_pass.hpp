#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "anisobn/errors.hpp"
#include "anisobn/mesh.hpp"

namespace anisobn {

/// Dimension threshold p[q(p-1)+p] / (q(p-1)+p-p(p-1)); kappa(p, p) = p^2.
double kappa(double p, double q);
/// q(n-p)(1/p-1)/p + n(p-1)/p; (n-p)/p > beta exactly when n > kappa(p, q).
double beta_exponent(double n, double p, double q);
/// S_H |Omega|^{-p/n}.
double capital_lambda(double sobolev, double volume, double n, double p);
/// Compactness level S_H^{n/p} / n.
double sobolev_threshold(double sobolev, double n, double p);
/// S_H^{n/p} / n for the norm of a grid.
double sobolev_threshold(const Norm& h, int n, double p);

/// s^p - 1 - ((n-p)/n)(s^{p*} - 1); non-positive on s >= 0, zero at s = 1.
double elementary_gap(double s, double n, double p);
struct ElementaryAudit {
    double max_gap{0};     // over the samples
    double gap_at_one{0};
    int samples{0};
};
ElementaryAudit elementary_inequality_audit(double n, double p, int samples, std::uint64_t seed, double s_max = 10);

/// max_{x >= 0} (a x - b x^{n/(n-p)}) = (ap/n) [a(n-p)/(nb)]^{(n-p)/p} for a, b > 0.
double power_gap_max(double a, double b, double n, double p);

/// Homogeneous moments of w: J(tw) = t^p A/p - lambda t^q B/q - t^{p*} C/p* (flux regularization off).
struct RayMaximum {
    bool exists{false};
    double t{0};
    double value{0};
};
RayMaximum ray_maximum(const ProblemParams& params, const Moments& m);

struct GeometryReport {
    double radius{0};
    double delta0{0};  // min J over the sampled sphere ||u||_{H,p} = radius
    double eta{0};     // min of J / r^p over radius * {1, 1/2, 1/4}
    bool pass{false};
    int samples{0};
};

/// Samples smooth directions (random low modes, their absolute values, the tent) on spheres of the
/// anisotropic Dirichlet norm. Requires q > p, or q = p with 0 < lambda < lambda1.
GeometryReport mp_geometry_check(const ProblemParams& params, const std::shared_ptr<const Grid>& grid, double radius,
                                 int samples, std::uint64_t seed,
                                 double lambda1 = std::numeric_limits<double>::quiet_NaN());

struct PathReport {
    double t_star{0};
    double sup_energy{0};
    double threshold{0};
    bool below{false};
    double epsilon{std::numeric_limits<double>::quiet_NaN()};
    double lambda{0};
    double t_bar{0};                                           // smallest dyadic multiple of t_star with J < 0
    double bound{std::numeric_limits<double>::quiet_NaN()};    // closed-form bound on the eigen path
    std::vector<double> t;                                     // 33 samples on [0, t_bar]
    std::vector<double> energy;
};

/// Maximum of t -> J(tw) for w >= 0, w != 0.
PathReport path_sup(const ProblemParams& params, const DiscreteFunction& w, double threshold);
/// Same along the first eigenfunction, with the bound (lambda1 - lambda)^{n/p} |Omega| / n.
/// Requires q = p and lambda1 - capital_lambda < lambda < lambda1.
PathReport path_sup_eigen(const ProblemParams& params, const DiscreteFunction& u1, double lambda1,
                          double capital_lambda, double threshold);

enum class MPStatus { Converged, StalledAboveThreshold, Diverged };
std::string to_string(MPStatus s);

struct MPOptions {
    double tol{1e-6};
    int max_iter{200000};
    double threshold{0};                                         // S_H^{n/p}/n, required
    double lambda1{std::numeric_limits<double>::quiet_NaN()};    // needed for the q = p geometry check
    bool enforce_preconditions{true};
    bool require_path_below{true};
    int stall_window{10000};
    int geometry_samples{24};
    std::uint64_t seed{0x5eed};
    double newton_switch{1e-3};  // residual below which Newton polishing is attempted
};

struct TraceRow {
    int iteration;
    double level;
    double residual;
};

struct MPResult {
    DiscreteFunction u;
    double level{0};
    double residual{0};
    bool positive{false};
    MPStatus classification{MPStatus::Diverged};
    int iterations{0};
    double threshold{0};
    bool monotone{true};  // ray maxima never increased beyond rounding
    PathReport path;
    std::vector<TraceRow> trace;
    std::string note;
};

/// Mountain-pass search over ray paths t -> t w: the peak of the current ray is pushed down by
/// preconditioned Barzilai-Borwein descent with Armijo backtracking, then polished by Newton.
/// Throws DomainError when enforced preconditions fail and ConvergenceError<MPResult> when the
/// iteration budget runs out below the threshold.
MPResult mp_solve(const ProblemParams& params, const DiscreteFunction& seed, const MPOptions& options);

}  // namespace anisobn
