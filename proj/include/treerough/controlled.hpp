#pragma once

#include <map>
#include <memory>
#include <vector>

#include "treerough/brp.hpp"
#include "treerough/bseries.hpp"
#include "treerough/increments.hpp"
#include "treerough/tree.hpp"

namespace treerough {

// A path weakly controlled by a branched rough path: increments expand as
//   delta y_{ts} = sum_f X^f_{ts} y^f_s + y#_{ts}
// over the nonempty forests of degree <= n-1 (n from the reference path's
// exponent), with per-coefficient expansions
//   delta y^f_{ts} = sum_sigma c(sigma -> f (x) rho) X^rho_{ts} y^sigma_s + y^{f,#}_{ts}.
// Remainders are stored as first-class 2-increments; checks compare the
// ledger against these stored surfaces instead of recomputing them.
struct ControlledPath {
    std::shared_ptr<const BranchedRoughPath> ref;
    double kappa = 0.0;
    GridPath base;                           // values in R^k
    std::map<Forest, GridPath> coeffs;       // one R^k path per stored forest
    Increment2 base_rem;                     // y#
    std::map<Forest, Increment2> coeff_rem;  // y^{f,#}

    int k() const { return base.dim; }
    int truncation() const;  // n of the reference path
};

// constant path: all coefficients and remainders vanish
ControlledPath controlled_constant(std::shared_ptr<const BranchedRoughPath> X,
                                   std::vector<double> value, double kappa);

// remainders filled from the defining ledger relations
ControlledPath controlled_from_coeffs(std::shared_ptr<const BranchedRoughPath> X, GridPath base,
                                      std::map<Forest, GridPath> coeffs, double kappa);

// the driver itself as a controlled path: base_a(i) = X^{._a}_{i0}, with unit
// coefficients on the single-vertex trees
ControlledPath controlled_driver(std::shared_ptr<const BranchedRoughPath> X, double kappa);

// |y_0| + ||y#||_{n kappa} + sum_f ||y^{f,#}||_{kappa (n - |f|)}
double controlled_norm(const ControlledPath& y);

struct RemainderReport {
    double control_defect = 0.0;   // ledger vs stored y#
    double control2_defect = 0.0;  // ledger vs stored y^{f,#}, worst forest
    double delta_sharp_defect = 0.0;    // sup |delta y#_{tus} - sum_f X^f_{tu} y^{f,#}_{us}|
    double sharp_norm = 0.0;
    std::map<Forest, double> coeff_sharp_norms;
};
RemainderReport check_remainders(const ControlledPath& y, int stride = 1);

// z = phi(y) for a polynomial map phi: R^k -> R^l; coefficients follow the
// ordered-factorization rule
//   z^f = sum_m 1/m! sum_{b} phi_{b}(y) sum_{f_1 ... f_m = f} y^{f_1,b_1} ... y^{f_m,b_m}
// and remainders are filled from the ledger.
ControlledPath compose_smooth(const std::vector<Poly>& phi, const ControlledPath& y);

// z_t = int_0^t y dX^label as a controlled path: germ
//   g_{ts} = X^{._a}_{ts} y_s + sum_f X^{[f]_a}_{ts} y^f_s
// is sewn at exponent (n+1) kappa; the additive part gives the path, the
// sewn leftover is the remainder seed z-flat.  Coefficients: z^{._a} = y,
// z^{[f]_a} = y^f, zero otherwise.
ControlledPath rough_integrate(const BranchedRoughPath& X, int label, const ControlledPath& y);

struct RdeStats {
    std::vector<double> residuals;  // controlled-norm distance between iterates
    int windows = 0;
    int iterations = 0;
};

// Picard iteration for dy = sum_a f_a(y) dX^a, y_0 = eta, up to time T
// (a prefix of the grid).  Windows halve when the measured contraction
// factor reaches 1; converged windows chain, re-basing at their endpoint.
ControlledPath solve_rde(const VectorfieldFamily& f, std::shared_ptr<const BranchedRoughPath> X,
                         std::vector<double> eta, double T, double tol = 1e-10,
                         RdeStats* stats = nullptr);

// Lift a matrix-valued controlled path (component (a,b) at index a*k_out + b)
// to a rough path over k_out labels: Y^{._b} = sum_a int y^{ab} dX^a, and
// planted trees integrate the lower-degree forest values recursively.
BranchedRoughPath lift_controlled(const ControlledPath& y, int level = -1);

}  // namespace treerough
