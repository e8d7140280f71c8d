#include "treerough/brp.hpp"

#include <algorithm>
#include <stdexcept>

#include "treerough/hopf.hpp"
#include "treerough/parallel.hpp"

namespace treerough {

SmoothDriver SmoothDriver::sample(const GridPtr& g, int d, const std::function<double(double, int)>& f,
                                  QuadRule rule) {
    if (!g || d < 1) throw std::invalid_argument("SmoothDriver: need a grid and d >= 1");
    SmoothDriver x;
    x.grid = g;
    x.d = d;
    x.rule = rule;
    x.samples.resize(static_cast<size_t>(g->points()) * static_cast<size_t>(d));
    for (int i = 0; i < g->points(); ++i)
        for (int a = 0; a < d; ++a)
            x.samples[static_cast<size_t>(i) * static_cast<size_t>(d) + static_cast<size_t>(a)] = f((*g)[i], a);
    return x;
}

const Increment2& BranchedRoughPath::value(const Tree& t) const {
    auto it = tree_values.find(t);
    if (it == tree_values.end()) throw std::out_of_range("no stored value for tree " + format_tree(t));
    return it->second;
}

double BranchedRoughPath::forest_value(const Forest& f, int i, int j) const {
    double p = 1.0;
    for (const Tree& t : f.trees) p *= value(t).at(i, j);
    return p;
}

int BranchedRoughPath::truncation_order() const { return holder_truncation(gamma); }

int holder_truncation(double gamma) {
    if (!(gamma > 0.0) || gamma > 1.0) throw std::invalid_argument("holder_truncation: gamma must be in (0,1]");
    int n = static_cast<int>(std::floor((1.0 + 1e-9) / gamma));
    return std::max(1, n);
}

namespace {

// One term of the split relation: coefficient, rooted factor, detached factor.
struct TermRef {
    double c;
    const Increment2* trunk;
    std::vector<const Increment2*> pruned;
};

std::vector<TermRef> resolve_terms(const Tree& t, const BranchedRoughPath& X) {
    std::vector<TermRef> out;
    for (const auto& [key, c] : reduced_coproduct(t)) {
        TermRef r;
        r.c = c.convert_to<double>();
        r.trunk = &X.value(key.first.trees.front());
        for (const Tree& p : key.second.trees) r.pruned.push_back(&X.value(p));
        out.push_back(std::move(r));
    }
    return out;
}

double eval_terms(const std::vector<TermRef>& terms, int i, int k, int j) {
    double s = 0.0;
    for (const TermRef& t : terms) {
        double p = t.c * t.trunk->at(i, k);
        for (const Increment2* q : t.pruned) p *= q->at(k, j);
        s += p;
    }
    return s;
}

// Integral of (interpolant of F) d(interpolant of x) over [g[j], g[j+1]].
// Stencil: four nodes straddling the panel, clamped to the base window
// [s, M]; three-node and two-node fallbacks when the window is short.
// Three-point Gauss is exact through degree five, covering every case.
double panel_quad(const Grid& g, const std::vector<double>& F, const std::vector<double>& x, int s, int j,
                  QuadRule rule) {
    const int M = g.panels();
    const double a = g[j], b = g[j + 1];
    if (rule == QuadRule::trapezoid || M - s < 2) return 0.5 * (F[j] + F[j + 1]) * (x[j + 1] - x[j]);
    int lo, nn;
    if (M - s == 2) {
        lo = s;
        nn = 3;
    } else {
        lo = std::clamp(j - 1, s, M - 3);
        nn = 4;
    }
    static const double gp[3] = {-0.7745966692414833770, 0.0, 0.7745966692414833770};
    static const double gw[3] = {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};
    double acc = 0.0;
    for (int q = 0; q < 3; ++q) {
        double u = 0.5 * (a + b) + 0.5 * (b - a) * gp[q];
        double p = 0.0, dq = 0.0;
        for (int r = 0; r < nn; ++r) {
            double den = 1.0, num = 1.0, dnum = 0.0;
            for (int s2 = 0; s2 < nn; ++s2) {
                if (s2 == r) continue;
                den *= g[lo + r] - g[lo + s2];
                num *= u - g[lo + s2];
                double term = 1.0;
                for (int s3 = 0; s3 < nn; ++s3)
                    if (s3 != r && s3 != s2) term *= u - g[lo + s3];
                dnum += term;
            }
            p += F[lo + r] * num / den;
            dq += x[lo + r] * dnum / den;
        }
        acc += gw[q] * p * dq;
    }
    return acc * 0.5 * (b - a);
}

int defect_stride(int points) { return std::max(1, points / 48); }

// holder_norm3 restricted to a strided triple set; enough to report the
// size of a correction defect without the cubic sweep.
double strided_norm3(const Increment3& h, double mu, int stride) {
    const Grid& g = *h.grid;
    std::vector<int> idx;
    for (int i = 0; i < g.points(); i += stride) idx.push_back(i);
    if (idx.back() != g.points() - 1) idx.push_back(g.points() - 1);
    double best = -1.0;
    for (int split = 1; split <= 7; ++split) {
        double rho = mu * split / 8.0;
        double worst = 0.0;
        for (size_t ii = 2; ii < idx.size(); ++ii)
            for (size_t kk = 1; kk < ii; ++kk)
                for (size_t jj = 0; jj < kk; ++jj) {
                    int i = idx[ii], k = idx[kk], j = idx[jj];
                    double w = std::pow(g[k] - g[j], rho) * std::pow(g[i] - g[k], mu - rho);
                    double v = 0.0;
                    for (int c = 0; c < h.dim; ++c) {
                        double e = h.eval(i, k, j, c);
                        v += e * e;
                    }
                    worst = std::max(worst, std::sqrt(v) / w);
                }
        if (best < 0.0 || worst < best) best = worst;
    }
    return best;
}

std::vector<Forest> nonempty_forests(int max_degree, int labels) { return enumerate_forests(max_degree, labels); }

}  // namespace

BranchedRoughPath lift_smooth(const SmoothDriver& x, int level, double gamma) {
    if (!x.grid) throw std::invalid_argument("lift_smooth: driver has no grid");
    if (level < 1) throw std::invalid_argument("lift_smooth: level must be >= 1");
    if (!(gamma > 0.0) || gamma > 1.0) throw std::invalid_argument("lift_smooth: gamma must be in (0,1]");
    const Grid& g = *x.grid;
    const int P = g.points(), M = g.panels();
    if (level >= 2 && P < 4)
        throw std::invalid_argument("lift_smooth: need at least four sample points for level >= 2");

    std::vector<std::vector<Tree>> by_degree(static_cast<size_t>(level) + 1);
    size_t total = 0;
    for (int m = 1; m <= level; ++m) {
        by_degree[static_cast<size_t>(m)] = enumerate_trees(m, x.d);
        total += by_degree[static_cast<size_t>(m)].size();
    }
    if (total * (static_cast<size_t>(P) * static_cast<size_t>(P) / 2) > (size_t{1} << 27))
        throw std::length_error("lift_smooth: tree count times grid size exceeds the resource cap");

    std::vector<std::vector<double>> xcol(static_cast<size_t>(x.d), std::vector<double>(static_cast<size_t>(P)));
    for (int a = 0; a < x.d; ++a)
        for (int i = 0; i < P; ++i) xcol[static_cast<size_t>(a)][static_cast<size_t>(i)] = x.at(i, a);

    BranchedRoughPath X;
    X.gamma = gamma;
    X.level = level;
    X.alphabet = x.d;
    X.grid = x.grid;

    for (int a = 0; a < x.d; ++a) {
        Increment2 v(x.grid, 1);
        for (int i = 1; i < P; ++i)
            for (int j = 0; j < i; ++j)
                v.ref(i, j) = xcol[static_cast<size_t>(a)][static_cast<size_t>(i)] -
                              xcol[static_cast<size_t>(a)][static_cast<size_t>(j)];
        X.tree_values.emplace(Tree(a), std::move(v));
    }

    for (int m = 2; m <= level; ++m)
        for (const Tree& tau : by_degree[static_cast<size_t>(m)]) {
            std::vector<const Increment2*> kids;
            for (const Tree& c : tau.children) kids.push_back(&X.value(c));
            const std::vector<double>& xa = xcol[static_cast<size_t>(tau.label)];
            Increment2 v(x.grid, 1);

            // quadrature bases: every s with a full four-point window
            parallel_blocks(M - 2, [&](int begin, int end) {
                std::vector<double> F(static_cast<size_t>(P));
                for (int s = begin; s < end; ++s) {
                    for (int u = s; u <= M; ++u) {
                        double p = 1.0;
                        for (const Increment2* k : kids) p *= k->at(u, s);
                        F[static_cast<size_t>(u)] = p;
                    }
                    double acc = 0.0;
                    for (int j = s; j < M; ++j) {
                        acc += panel_quad(g, F, xa, s, j, x.rule);
                        v.ref(j + 1, s) = acc;
                    }
                }
            });

            // the last two bases have no room for a stencil; complete them
            // through the split relation against the nearest full base
            const int r = M - 3;
            auto terms = resolve_terms(tau, X);
            for (int s = M - 2; s < M; ++s)
                for (int t = s + 1; t <= P - 1; ++t) {
                    double val = v.at(t, r) - v.at(s, r);
                    for (const TermRef& tm : terms) {
                        double p = tm.c * tm.trunk->at(t, s);
                        for (const Increment2* q : tm.pruned) p *= q->at(s, r);
                        val -= p;
                    }
                    v.ref(t, s) = val;
                }

            X.tree_values.emplace(tau, std::move(v));
        }

    X.recorded_defect = check_multiplicativity(X, defect_stride(P)).max_defect;
    return X;
}

BranchedRoughPath truncate(const BranchedRoughPath& X, int level) {
    if (level < 1) throw std::invalid_argument("truncate: level must be >= 1");
    BranchedRoughPath out = X;
    out.level = std::min(X.level, level);
    std::erase_if(out.tree_values, [&](const auto& kv) { return degree(kv.first) > out.level; });
    // the recorded defect ranges over a superset of the remaining trees, so
    // it stays valid as an upper bound; the budget ratio does not transfer
    out.recorded_budget_ratio = std::numeric_limits<double>::quiet_NaN();
    return out;
}

MultReport check_multiplicativity(const BranchedRoughPath& X, int stride) {
    if (stride < 1) throw std::invalid_argument("check_multiplicativity: stride must be >= 1");
    const Grid& g = *X.grid;
    std::vector<int> idx;
    for (int i = 0; i < g.points(); i += stride) idx.push_back(i);
    if (idx.back() != g.points() - 1) idx.push_back(g.points() - 1);

    std::vector<const Tree*> trees;
    for (const auto& [t, v] : X.tree_values) trees.push_back(&t);
    std::vector<MultReport> local(trees.size());

    parallel_blocks(static_cast<int>(trees.size()), [&](int begin, int end) {
        for (int ti = begin; ti < end; ++ti) {
            const Tree& tau = *trees[static_cast<size_t>(ti)];
            const Increment2& v = X.value(tau);
            auto terms = resolve_terms(tau, X);
            MultReport& r = local[static_cast<size_t>(ti)];
            r.tree = tau;
            for (size_t ii = 2; ii < idx.size(); ++ii)
                for (size_t kk = 1; kk < ii; ++kk)
                    for (size_t jj = 0; jj < kk; ++jj) {
                        int i = idx[ii], k = idx[kk], j = idx[jj];
                        double lhs = v.at(i, j) - v.at(i, k) - v.at(k, j);
                        double d = std::abs(lhs - eval_terms(terms, i, k, j));
                        ++r.triples;
                        if (d > r.max_defect) {
                            r.max_defect = d;
                            r.i = i;
                            r.k = k;
                            r.j = j;
                        }
                    }
        }
    });

    MultReport best;
    best.stride = stride;
    for (const MultReport& r : local) {
        best.triples += r.triples;
        if (r.max_defect > best.max_defect) {
            best.max_defect = r.max_defect;
            best.tree = r.tree;
            best.i = r.i;
            best.k = r.k;
            best.j = r.j;
        }
    }
    return best;
}

BranchedRoughPath extend(const BranchedRoughPath& X, int target) {
    const int n = X.level;
    if (target < n) throw std::invalid_argument("extend: target below current level");
    if (!(X.gamma * (n + 1) > 1.0 + 1e-12))
        throw std::invalid_argument("extend: gamma (level+1) must exceed 1");

    BranchedRoughPath out = X;
    out.level = target;
    const double A = fit_scale(X, 1.0);
    double ratio = 0.0;

    for (int m = n + 1; m <= target; ++m)
        for (const Tree& tau : enumerate_trees(m, out.alphabet)) {
            auto terms = resolve_terms(tau, out);
            Increment3 h{out.grid, 1,
                         [&terms](int i, int k, int j, int) { return eval_terms(terms, i, k, j); }};
            Increment2 v = lambda_of_closed(h);
            double norm = holder_norm2(v, out.gamma * m).norm;
            double denom = std::pow(A, m) * q_gamma(tau, out.gamma);
            if (denom > 0.0)
                ratio = std::max(ratio, norm / denom);
            else if (norm > 0.0)
                ratio = std::numeric_limits<double>::infinity();
            out.tree_values.emplace(tau, std::move(v));
        }

    out.recorded_budget_ratio = ratio;
    out.recorded_defect = check_multiplicativity(out, defect_stride(out.grid->points())).max_defect;
    return out;
}

CorrectionResult correct_almost(const BranchedRoughPath& approx) {
    CorrectionResult res;
    res.path = approx;
    BranchedRoughPath& out = res.path;
    const int n = holder_truncation(approx.gamma);
    const double mu = (n + 1) * approx.gamma;
    const int stride = std::max(1, approx.grid->points() / 32);

    std::map<int, std::vector<Tree>> by_deg;
    for (const auto& [t, v] : approx.tree_values) by_deg[degree(t)].push_back(t);

    for (const auto& [m, taus] : by_deg)
        for (const Tree& tau : taus) {
            const Increment2& orig = approx.value(tau);

            // report the input defect at the correction exponent first
            auto terms_in = resolve_terms(tau, approx);
            Increment3 defect{approx.grid, 1, [&](int i, int k, int j, int) {
                                  double lhs = orig.at(i, j) - orig.at(i, k) - orig.at(k, j);
                                  return lhs - eval_terms(terms_in, i, k, j);
                              }};
            double dn = strided_norm3(defect, mu, stride);
            if (!std::isfinite(dn))
                throw std::invalid_argument("correct_almost: defect norm not finite for " + format_tree(tau));
            res.defect_norm[tau] = dn;

            // shift by the sewn primitive of the residual, measured against
            // the already-corrected lower degrees
            auto terms = resolve_terms(tau, out);
            Increment3 h{approx.grid, 1, [&](int i, int k, int j, int) {
                             double lhs = orig.at(i, j) - orig.at(i, k) - orig.at(k, j);
                             return eval_terms(terms, i, k, j) - lhs;
                         }};
            Increment2 lam = lambda_of_closed(h);
            res.correction_seminorm[tau] = holder_norm2(lam, mu).norm;
            Increment2 v = orig;
            v += lam;
            out.tree_values.at(tau) = std::move(v);
        }

    out.recorded_defect = check_multiplicativity(out, defect_stride(out.grid->points())).max_defect;
    return res;
}

BranchedRoughPath ito_level2(const SmoothDriver& x, double c, double gamma) {
    if (gamma > 0.5 + 1e-12)
        throw std::invalid_argument("ito_level2: the level-2 correction needs gamma <= 1/2");
    BranchedRoughPath X = lift_smooth(x, 2, gamma);
    const Grid& g = *X.grid;
    for (int a = 0; a < x.d; ++a) {
        Increment2& v = X.tree_values.at(Tree(a, {Tree(a)}));
        for (int i = 1; i < g.points(); ++i)
            for (int j = 0; j < i; ++j) v.ref(i, j) += c * (g[i] - g[j]);
    }
    // c (t-s) is additive in t-s, hence delta-closed: the recorded defect of
    // the plain lift still applies
    return X;
}

double distance(const BranchedRoughPath& X, const BranchedRoughPath& Y) {
    if (X.gamma != Y.gamma || X.alphabet != Y.alphabet)
        throw std::invalid_argument("distance: gamma and alphabet must agree");
    if (X.grid != Y.grid && X.grid->times() != Y.grid->times())
        throw std::invalid_argument("distance: grids must agree");
    const int n = holder_truncation(X.gamma);
    if (std::min(X.level, Y.level) < n)
        throw std::invalid_argument("distance: stored level below the truncation order");
    double sum = 0.0;
    for (const Forest& f : nonempty_forests(n, X.alphabet)) {
        Increment2 diff(X.grid, 1);
        for (int i = 1; i < X.grid->points(); ++i)
            for (int j = 0; j < i; ++j) diff.ref(i, j) = X.forest_value(f, i, j) - Y.forest_value(f, i, j);
        sum += holder_norm2(diff, X.gamma * degree(f)).norm;
    }
    return sum;
}

BudgetReport check_holder_budget(const BranchedRoughPath& X, double A, double B) {
    if (A < 0.0 || B < 0.0 || B > 1.0)
        throw std::invalid_argument("check_holder_budget: need A >= 0 and B in [0,1]");
    BudgetReport rep;
    for (const Forest& f : nonempty_forests(X.level, X.alphabet)) {
        Increment2 val(X.grid, 1);
        for (int i = 1; i < X.grid->points(); ++i)
            for (int j = 0; j < i; ++j) val.ref(i, j) = X.forest_value(f, i, j);
        double norm = holder_norm2(val, X.gamma * degree(f)).norm;
        double bound = B * std::pow(A, degree(f)) * q_gamma(f, X.gamma);
        if (norm > bound * (1.0 + 1e-9) + 1e-300) {
            rep.ok = false;
            rep.violations.push_back({f, norm, bound});
        }
    }
    return rep;
}

double fit_scale(const BranchedRoughPath& X, double B) {
    if (!(B > 0.0) || B > 1.0) throw std::invalid_argument("fit_scale: need B in (0,1]");
    double A = 0.0;
    for (const Forest& f : nonempty_forests(X.level, X.alphabet)) {
        Increment2 val(X.grid, 1);
        for (int i = 1; i < X.grid->points(); ++i)
            for (int j = 0; j < i; ++j) val.ref(i, j) = X.forest_value(f, i, j);
        double norm = holder_norm2(val, X.gamma * degree(f)).norm;
        double q = q_gamma(f, X.gamma);
        if (norm > 0.0) A = std::max(A, std::pow(norm / (B * q), 1.0 / degree(f)));
    }
    return A;
}

}  // namespace treerough
