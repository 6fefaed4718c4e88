#pragma once

#include "anisobn/errors.hpp"
#include "anisobn/mesh.hpp"

namespace anisobn {

/// Both sides of the Pohozaev identity for -Delta_p^H u = lambda u^{q-1} + u^{p*-1} on a domain
/// star-shaped about the origin:
///   interior = (n lambda/q) int u^q + (n/p*) int u^{p*} - ((n-p)/p) int H(grad u)^p
///   boundary = ((p-1)/p) oint H(grad u)^p <x, nu>
/// and, after substituting the tested equation, lambda (n/q - (n-p)/p) int u^q = boundary.
struct PohozaevAudit {
    double interior_terms{0};
    double boundary_term{0};
    double lambda_side{0};      // lambda (n/q - (n-p)/p) int u^q
    double residual{0};         // |lambda_side - boundary| / max(|lambda_side|, |boundary|), 0 when both vanish
    double full_residual{0};    // same comparison for interior_terms vs boundary_term
    double test_defect{0};      // test_u_identity
    double lp_norm{0};          // ||u||_{L^p}
    bool star_shaped{true};
};

/// Normal derivatives come from second-order one-sided differences at the boundary nodes and
/// grad u = (du/dnu) nu there. Throws DomainError unless the domain is star-shaped about 0.
PohozaevAudit pohozaev_audit(const ProblemParams& params, const DiscreteFunction& u);

/// |int H(grad u)^p - int (u+)^{p*} - lambda int (u+)^q| / int H(grad u)^p, the equation tested
/// against u itself; 0 for u = 0.
double test_u_identity(const ProblemParams& params, const DiscreteFunction& u);

/// True when both relative residuals are within `tol`, i.e. the candidate is consistent with
/// being a solution.
bool passes_joint_audit(const PohozaevAudit& audit, double tol);

}  // namespace anisobn
