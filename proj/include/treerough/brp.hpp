#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <vector>

#include "treerough/increments.hpp"
#include "treerough/tree.hpp"

namespace treerough {

enum class QuadRule { trapezoid, simpson };

// Sampled driving path with d components and a quadrature rule choice.
// "simpson" is a sliding four-point rule: cubic interpolants of both the
// integrand and the driver per panel, integrated exactly.
struct SmoothDriver {
    GridPtr grid;
    int d = 1;
    QuadRule rule = QuadRule::simpson;
    std::vector<double> samples;  // points * d

    double at(int i, int a) const {
        return samples[static_cast<size_t>(i) * static_cast<size_t>(d) + static_cast<size_t>(a)];
    }
    static SmoothDriver sample(const GridPtr& g, int d, const std::function<double(double, int)>& f,
                               QuadRule rule = QuadRule::simpson);
};

// Tree-indexed family of 2-increments. Trees are stored; forests are
// evaluated on demand as products, the empty forest being 1.
struct BranchedRoughPath {
    double gamma = 1.0;
    int level = 0;
    int alphabet = 1;
    GridPtr grid;
    std::map<Tree, Increment2> tree_values;

    // construction-time diagnostics: a (possibly strided) multiplicativity
    // defect, and for extensions the worst norm / q-weighted-bound ratio
    double recorded_defect = std::numeric_limits<double>::quiet_NaN();
    double recorded_budget_ratio = std::numeric_limits<double>::quiet_NaN();

    const Increment2& value(const Tree& t) const;
    double forest_value(const Forest& f, int i, int j) const;
    int truncation_order() const;
};

// Largest n with n * gamma <= 1 (tiny slack for representability).
int holder_truncation(double gamma);

// Iterated integrals of x over all trees of degree <= level. Each value is
// produced by cumulative panel quadrature per base point; the last two base
// points, where no full stencil fits, are completed through the tree
// multiplicative relation against an interior base.
BranchedRoughPath lift_smooth(const SmoothDriver& x, int level, double gamma = 1.0);

BranchedRoughPath truncate(const BranchedRoughPath& X, int level);

struct MultReport {
    double max_defect = 0.0;
    Tree tree;
    int i = -1, k = -1, j = -1;
    long long triples = 0;
    int stride = 1;
};

// Worst |delta X^tau - X^{split tau}| over stored trees and grid triples.
// stride > 1 thins the triple set (endpoints always included).
MultReport check_multiplicativity(const BranchedRoughPath& X, int stride = 1);

// Unique extension to higher tree degrees via the sewn primitive of the
// coproduct expression. Requires gamma (level+1) > 1.
BranchedRoughPath extend(const BranchedRoughPath& X, int target);

struct CorrectionResult {
    BranchedRoughPath path;
    std::map<Tree, double> correction_seminorm;  // at exponent (n+1) gamma
    std::map<Tree, double> defect_norm;          // input defect, same exponent
};

// Degree-by-degree repair of an approximately multiplicative family: each
// tree value is shifted by the sewn primitive of its own relation defect,
// measured against already-corrected lower degrees. The output satisfies the
// relation to grid precision.
CorrectionResult correct_almost(const BranchedRoughPath& approx);

// Level-2 lift with c (t-s) added to every X^{[.a]a}. The added term is
// delta-closed, so the multiplicative relation is untouched, while the
// level-2 shuffle identity now fails by exactly -2c (t-s).
BranchedRoughPath ito_level2(const SmoothDriver& x, double c, double gamma = 0.5);

// Sum over nonempty forests of degree <= n of the gamma |f|-Hölder norm of
// the difference, n derived from gamma. Grids, gamma and alphabet must agree.
double distance(const BranchedRoughPath& X, const BranchedRoughPath& Y);

struct BudgetEntry {
    Forest forest;
    double norm = 0.0;
    double bound = 0.0;
};
struct BudgetReport {
    bool ok = true;
    std::vector<BudgetEntry> violations;
};

// Checks ||X^f||_{gamma |f|} <= B A^{|f|} q_gamma(f) over nonempty forests of
// degree <= level. Comparisons carry 1e-9 relative slack. Requires B in [0,1].
BudgetReport check_holder_budget(const BranchedRoughPath& X, double A, double B);

// Smallest A for which the budget holds with the given B (closed form:
// max over forests of (norm / (B q))^{1/degree}).
double fit_scale(const BranchedRoughPath& X, double B = 1.0);

}  // namespace treerough
