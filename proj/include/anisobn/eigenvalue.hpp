#pragma once

#include <cstdint>
#include <vector>

#include "anisobn/errors.hpp"
#include "anisobn/mesh.hpp"

namespace anisobn {

/// First Dirichlet eigenpair of the anisotropic p-Laplacian on a grid.
struct EigenResult {
    double lambda1{0};
    DiscreteFunction u1;          // ||u1||_{L^p} = 1, positive inside
    int iterations{0};
    double residual{0};           // residual_norm of the eigen-equation at (lambda1, u1)
    std::vector<double> history;  // Rayleigh quotient per accepted step
    bool monotone{true};          // no accepted step increased the quotient
};

/// int H(grad u)^p / int |u|^p; throws DomainError for u = 0.
double rayleigh(const ProblemParams& params, const DiscreteFunction& u);

/// Positive tent on the domain: R - rho on radial grids, product of distances to the sides on rectangles.
DiscreteFunction default_eigen_init(std::shared_ptr<const Grid> grid);
/// Uniform(0, 1) nodal values at free nodes.
DiscreteFunction random_eigen_init(std::shared_ptr<const Grid> grid, std::uint64_t seed);

/// Problem data for the eigen-equation at lambda: q = p, critical term off.
ProblemParams eigen_problem(const ProblemParams& params, double lambda);

/// Preconditioned Barzilai-Borwein descent of the Rayleigh quotient with L^p renormalization.
/// Stops once the relative decrease is <= tol and the eigen residual is <= 10 tol.
/// Throws ConvergenceError<EigenResult> (carrying the best iterate) after max_iter steps.
EigenResult solve_lambda1(const ProblemParams& params, const DiscreteFunction& init, double tol = 1e-8,
                          int max_iter = 100000);

}  // namespace anisobn
