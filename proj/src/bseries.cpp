#include "treerough/bseries.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "treerough/hopf.hpp"
#include "treerough/parallel.hpp"

namespace treerough {

namespace {

void check_family(const VectorfieldFamily& f) {
    if (f.k < 1 || f.d < 1) throw std::invalid_argument("vectorfield family needs k >= 1 and d >= 1");
    if (static_cast<int>(f.f.size()) != f.d) throw std::invalid_argument("vectorfield family: wrong label count");
    for (const auto& comp : f.f) {
        if (static_cast<int>(comp.size()) != f.k)
            throw std::invalid_argument("vectorfield family: wrong component count");
        for (const auto& p : comp)
            for (const auto& [e, c] : p)
                if (static_cast<int>(e.size()) != f.k)
                    throw std::invalid_argument("vectorfield family: exponent length mismatch");
    }
}

double sigma_as_double(const Tree& t) { return BigRat(symmetry_factor(t)).convert_to<double>(); }

bool same_grid(const GridPtr& a, const GridPtr& b) { return a == b || (a && b && a->times() == b->times()); }

}  // namespace

double poly_eval(const Poly& p, const std::vector<double>& y) {
    double out = 0.0;
    for (const auto& [e, c] : p) {
        if (e.size() != y.size()) throw std::invalid_argument("poly_eval: dimension mismatch");
        double term = c;
        for (size_t i = 0; i < e.size(); ++i)
            for (int q = 0; q < e[i]; ++q) term *= y[i];
        out += term;
    }
    return out;
}

Poly poly_derivative(const Poly& p, int var) {
    Poly out;
    for (const auto& [e, c] : p) {
        if (var < 0 || var >= static_cast<int>(e.size()))
            throw std::invalid_argument("poly_derivative: variable out of range");
        if (e[var] == 0) continue;
        auto ne = e;
        ne[var] -= 1;
        out[ne] += c * e[var];
    }
    return out;
}

Poly poly_univariate(const std::vector<double>& ascending) {
    Poly out;
    for (size_t i = 0; i < ascending.size(); ++i)
        if (ascending[i] != 0.0) out[{static_cast<int>(i)}] = ascending[i];
    return out;
}

VectorfieldFamily VectorfieldFamily::scalar(const std::vector<std::vector<double>>& ascending_per_label) {
    VectorfieldFamily out;
    out.k = 1;
    out.d = static_cast<int>(ascending_per_label.size());
    for (const auto& a : ascending_per_label) out.f.push_back({poly_univariate(a)});
    check_family(out);
    return out;
}

std::vector<double> field_eval(const VectorfieldFamily& f, int label, const std::vector<double>& y) {
    check_family(f);
    if (label < 0 || label >= f.d) throw std::invalid_argument("field_eval: label out of range");
    if (static_cast<int>(y.size()) != f.k) throw std::invalid_argument("field_eval: state dimension mismatch");
    std::vector<double> out(f.f[label].size());
    for (size_t j = 0; j < out.size(); ++j) out[j] = poly_eval(f.f[label][j], y);
    return out;
}

ElementaryDifferentialTable::ElementaryDifferentialTable(const VectorfieldFamily& f, std::vector<double> xi)
    : f_(f), xi_(std::move(xi)) {
    check_family(f_);
    if (static_cast<int>(xi_.size()) != f_.k)
        throw std::invalid_argument("elementary differential: state dimension mismatch");
}

const std::vector<double>& ElementaryDifferentialTable::at(const Tree& t) {
    auto it = cache_.find(t);
    if (it != cache_.end()) return it->second;
    if (t.label < 0 || t.label >= f_.d)
        throw std::invalid_argument("elementary differential: tree label outside the family");

    int k = f_.k;
    std::vector<double> out(static_cast<size_t>(k), 0.0);
    int m = static_cast<int>(t.children.size());
    if (m == 0) {
        for (int j = 0; j < k; ++j) out[static_cast<size_t>(j)] = poly_eval(f_.f[t.label][j], xi_);
    } else {
        std::vector<std::vector<double>> ch;
        ch.reserve(static_cast<size_t>(m));
        for (const auto& c : t.children) ch.push_back(at(c));

        // contract the m-th derivative against the children: one term per
        // multi-index over the state dimensions
        std::vector<int> b(static_cast<size_t>(m), 0);
        for (;;) {
            for (int j = 0; j < k; ++j) {
                Poly dv = f_.f[t.label][j];
                for (int i = 0; i < m && !dv.empty(); ++i) dv = poly_derivative(dv, b[static_cast<size_t>(i)]);
                if (dv.empty()) continue;
                double term = poly_eval(dv, xi_);
                for (int i = 0; i < m; ++i) term *= ch[static_cast<size_t>(i)][static_cast<size_t>(b[static_cast<size_t>(i)])];
                out[static_cast<size_t>(j)] += term;
            }
            int i = 0;
            while (i < m && ++b[static_cast<size_t>(i)] == k) b[static_cast<size_t>(i++)] = 0;
            if (i == m) break;
        }
    }
    return cache_.emplace(t, std::move(out)).first->second;
}

std::vector<double> elementary_differential(const VectorfieldFamily& f, const Tree& t,
                                            const std::vector<double>& xi) {
    ElementaryDifferentialTable table(f, xi);
    return table.at(t);
}

std::vector<double> bseries_autonomous(const VectorfieldFamily& f, const std::vector<double>& eta,
                                       double t, int N) {
    check_family(f);
    if (f.d != 1) throw std::invalid_argument("bseries_autonomous: needs a single-label family");
    if (static_cast<int>(eta.size()) != f.k) throw std::invalid_argument("bseries_autonomous: state dimension mismatch");
    if (N < 0) throw std::invalid_argument("bseries_autonomous: negative order");

    std::vector<double> out = eta;
    ElementaryDifferentialTable table(f, eta);
    double tp = 1.0;
    for (int m = 1; m <= N; ++m) {
        tp *= t;
        for (const auto& tree : enumerate_trees(m, 1)) {
            double w = tp / (sigma_as_double(tree) * BigRat(tree_factorial(tree)).convert_to<double>());
            const auto& phi = table.at(tree);
            for (int j = 0; j < f.k; ++j) out[static_cast<size_t>(j)] += phi[static_cast<size_t>(j)] * w;
        }
    }
    return out;
}

std::vector<double> bseries_driven_step(const VectorfieldFamily& f, const BranchedRoughPath& X,
                                        const std::vector<double>& y_s, int s, int t, int N) {
    check_family(f);
    if (f.d != X.alphabet) throw std::invalid_argument("bseries_driven_step: label count mismatch");
    if (static_cast<int>(y_s.size()) != f.k) throw std::invalid_argument("bseries_driven_step: state dimension mismatch");
    if (N < 1 || N > X.level) throw std::invalid_argument("bseries_driven_step: order outside the stored range");
    int P = X.grid ? static_cast<int>(X.grid->points()) : 0;
    if (s < 0 || t < s || t >= P) throw std::invalid_argument("bseries_driven_step: bad index pair");

    std::vector<double> out(static_cast<size_t>(f.k), 0.0);
    ElementaryDifferentialTable table(f, y_s);
    for (int m = 1; m <= N; ++m) {
        for (const auto& tree : enumerate_trees(m, f.d)) {
            double w = X.value(tree).at(t, s) / sigma_as_double(tree);
            if (w == 0.0) continue;
            const auto& phi = table.at(tree);
            for (int j = 0; j < f.k; ++j) out[static_cast<size_t>(j)] += phi[static_cast<size_t>(j)] * w;
        }
    }
    return out;
}

std::map<Tree, GridPath> coefficient_paths(const VectorfieldFamily& f, const BranchedRoughPath& X,
                                           const GridPath& y, int max_degree) {
    check_family(f);
    if (f.d != X.alphabet) throw std::invalid_argument("coefficient_paths: label count mismatch");
    if (y.dim != f.k) throw std::invalid_argument("coefficient_paths: state dimension mismatch");
    if (!same_grid(y.grid, X.grid)) throw std::invalid_argument("coefficient_paths: grids differ");
    if (max_degree < 1) throw std::invalid_argument("coefficient_paths: max_degree < 1");

    std::vector<Tree> trees;
    for (int m = 1; m <= max_degree; ++m)
        for (const auto& t : enumerate_trees(m, f.d)) trees.push_back(t);
    std::vector<double> inv_sigma;
    inv_sigma.reserve(trees.size());
    for (const auto& t : trees) inv_sigma.push_back(1.0 / sigma_as_double(t));

    std::map<Tree, GridPath> out;
    for (const auto& t : trees) out.emplace(t, GridPath(y.grid, f.k));
    std::vector<GridPath*> slot;
    slot.reserve(trees.size());
    for (const auto& t : trees) slot.push_back(&out.at(t));

    int P = static_cast<int>(y.grid->points());
    parallel_blocks(P, [&](int b, int e) {
        std::vector<double> xi(static_cast<size_t>(f.k));
        for (int i = b; i < e; ++i) {
            for (int c = 0; c < f.k; ++c) xi[static_cast<size_t>(c)] = y.at(i, c);
            ElementaryDifferentialTable table(f, xi);
            for (size_t q = 0; q < trees.size(); ++q) {
                const auto& phi = table.at(trees[q]);
                for (int c = 0; c < f.k; ++c) slot[q]->ref(i, c) = phi[static_cast<size_t>(c)] * inv_sigma[q];
            }
        }
    });
    return out;
}

std::vector<ExpansionDefect> expansion_defects(const VectorfieldFamily& f, const BranchedRoughPath& X,
                                               const GridPath& y, int tau_max, int sigma_max) {
    if (tau_max < 1 || tau_max > sigma_max)
        throw std::invalid_argument("expansion_defects: need 1 <= tau_max <= sigma_max");
    auto paths = coefficient_paths(f, X, y, sigma_max);

    struct Term {
        double c;
        Forest rho;
        const GridPath* sigma;
    };

    std::vector<ExpansionDefect> out;
    int P = static_cast<int>(y.grid->points());
    for (int m = 1; m <= tau_max; ++m) {
        for (const auto& tau : enumerate_trees(m, f.d)) {
            // collect every way tau appears as the rooted part of a stored tree
            std::vector<Term> terms;
            for (const auto& [sigma, path] : paths) {
                for (const auto& [key, c] : reduced_coproduct(sigma)) {
                    if (key.first.trees.size() == 1 && key.first.trees.front() == tau)
                        terms.push_back({BigRat(c).convert_to<double>(), key.second, &path});
                }
            }
            const GridPath& ytau = paths.at(tau);
            ExpansionDefect d;
            d.tree = tau;
            for (int i = 1; i < P; ++i) {
                for (int j = 0; j < i; ++j) {
                    double worst = 0.0;
                    for (int c = 0; c < f.k; ++c) {
                        double dev = ytau.at(i, c) - ytau.at(j, c);
                        for (const auto& term : terms)
                            dev -= term.c * X.forest_value(term.rho, i, j) * term.sigma->at(j, c);
                        worst = std::max(worst, std::abs(dev));
                    }
                    d.sup_all = std::max(d.sup_all, worst);
                    if (j + 1 == i) d.sup_adjacent = std::max(d.sup_adjacent, worst);
                }
            }
            out.push_back(std::move(d));
        }
    }
    return out;
}

double convergence_radius(double A, double M, double R, int d) {
    if (!(A > 0.0) || !(M > 0.0) || !(R > 0.0) || d < 1)
        throw std::invalid_argument("convergence_radius: all inputs must be positive");
    return R / (2.0 * d * A * M);
}

BigRat ratpoly_eval(const RatPoly& p, const BigRat& y) {
    BigRat out = 0;
    for (auto it = p.rbegin(); it != p.rend(); ++it) out = out * y + *it;
    return out;
}

RatPoly ratpoly_derivative(const RatPoly& p) {
    RatPoly out;
    for (size_t i = 1; i < p.size(); ++i) out.push_back(p[i] * BigRat(static_cast<int>(i)));
    return out;
}

namespace {

BigRat phi_exact(const RatPoly& f, const Tree& t, const BigRat& xi, std::map<Tree, BigRat>& memo) {
    if (t.label != 0) throw std::invalid_argument("exact engine: single label only");
    auto it = memo.find(t);
    if (it != memo.end()) return it->second;
    RatPoly dv = f;
    for (size_t i = 0; i < t.children.size(); ++i) dv = ratpoly_derivative(dv);
    BigRat out = ratpoly_eval(dv, xi);
    for (const auto& c : t.children) out *= phi_exact(f, c, xi, memo);
    memo.emplace(t, out);
    return out;
}

}  // namespace

BigRat elementary_differential_exact(const RatPoly& f, const Tree& t, const BigRat& xi) {
    std::map<Tree, BigRat> memo;
    return phi_exact(f, t, xi, memo);
}

std::vector<BigRat> bseries_coefficients_exact(const RatPoly& f, const BigRat& eta, int N) {
    if (N < 0) throw std::invalid_argument("bseries_coefficients_exact: negative order");
    std::vector<BigRat> out(static_cast<size_t>(N) + 1, BigRat(0));
    out[0] = eta;
    std::map<Tree, BigRat> memo;
    for (int m = 1; m <= N; ++m) {
        for (const auto& t : enumerate_trees(m, 1)) {
            out[static_cast<size_t>(m)] +=
                phi_exact(f, t, eta, memo) / (BigRat(symmetry_factor(t)) * BigRat(tree_factorial(t)));
        }
    }
    return out;
}

}  // namespace treerough
