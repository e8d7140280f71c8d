#pragma once

#include <map>
#include <vector>

#include "treerough/brp.hpp"
#include "treerough/exact.hpp"
#include "treerough/increments.hpp"
#include "treerough/tree.hpp"

namespace treerough {

// Sparse multivariate polynomial on R^k: exponent vector -> coefficient.
// All exponent vectors in one polynomial must share the same length.
using Poly = std::map<std::vector<int>, double>;

double poly_eval(const Poly& p, const std::vector<double>& y);
Poly poly_derivative(const Poly& p, int var);
Poly poly_univariate(const std::vector<double>& ascending);

// Family of d polynomial vector fields on R^k: f[a][j] is component j of the
// field attached to label a.  Polynomial entries mean derivatives of every
// order exist, so the differentiability preconditions hold by construction.
struct VectorfieldFamily {
    int k = 1;
    int d = 1;
    std::vector<std::vector<Poly>> f;

    // scalar state, one univariate polynomial per label
    static VectorfieldFamily scalar(const std::vector<std::vector<double>>& ascending_per_label);
};

std::vector<double> field_eval(const VectorfieldFamily& f, int label, const std::vector<double>& y);

// phi^f(tree)(xi): leaf a evaluates the label-a field, a node with children
// contracts the derivative of that field against the children's values.
// The table memoizes per tree at a fixed base point.
class ElementaryDifferentialTable {
  public:
    ElementaryDifferentialTable(const VectorfieldFamily& f, std::vector<double> xi);
    const std::vector<double>& at(const Tree& t);

  private:
    const VectorfieldFamily& f_;
    std::vector<double> xi_;
    std::map<Tree, std::vector<double>> cache_;
};

std::vector<double> elementary_differential(const VectorfieldFamily& f, const Tree& t,
                                            const std::vector<double>& xi);

// Truncated series for the flow of y' = f(y) (single-label family): eta plus
// the tree sum of phi(tree)(eta) t^{|tree|} / (sigma * tree-factorial).
std::vector<double> bseries_autonomous(const VectorfieldFamily& f, const std::vector<double>& eta,
                                       double t, int N);

// One driven step between grid indices s < t: sum over labeled trees of
// degree <= N of phi(tree)(y_s) X^tree_{ts} / sigma(tree).
std::vector<double> bseries_driven_step(const VectorfieldFamily& f, const BranchedRoughPath& X,
                                        const std::vector<double>& y_s, int s, int t, int N);

// Coefficient paths of a solution y: y^tree_i = phi(tree)(y_i) / sigma(tree)
// for every labeled tree of degree <= max_degree, sampled on the grid of X.
std::map<Tree, GridPath> coefficient_paths(const VectorfieldFamily& f, const BranchedRoughPath& X,
                                           const GridPath& y, int max_degree);

// Defect of the coefficient expansion: for each tree of degree <= tau_max,
// the sup over grid pairs of
//   delta y^tau_{ts} - sum_sigma c(sigma -> tau (x) rho) X^rho_{ts} y^sigma_s
// where sigma runs over stored trees of degree <= sigma_max.  Entries are
// sorted by degree, then canonical tree order.
struct ExpansionDefect {
    Tree tree;
    double sup_all = 0.0;
    double sup_adjacent = 0.0;
};
std::vector<ExpansionDefect> expansion_defects(const VectorfieldFamily& f, const BranchedRoughPath& X,
                                               const GridPath& y, int tau_max, int sigma_max);

// Lower bound for the time window on which the step series converges:
// R / (2 d A M), with A the driver scale, M a field bound on the radius-R
// ball, d the number of labels.
double convergence_radius(double A, double M, double R, int d);

// Exact-arithmetic engine for scalar state and a single label.  Polynomials
// are ascending rational coefficient lists.
using RatPoly = std::vector<BigRat>;

BigRat ratpoly_eval(const RatPoly& p, const BigRat& y);
RatPoly ratpoly_derivative(const RatPoly& p);
BigRat elementary_differential_exact(const RatPoly& f, const Tree& t, const BigRat& xi);

// Coefficients c_0..c_N of the flow series: c_0 = eta and
// c_m = sum over m-vertex trees of phi(tree)(eta) / (sigma * tree-factorial).
std::vector<BigRat> bseries_coefficients_exact(const RatPoly& f, const BigRat& eta, int N);

}  // namespace treerough
