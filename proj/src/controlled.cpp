#include "treerough/controlled.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <utility>

#include "treerough/hopf.hpp"
#include "treerough/parallel.hpp"

namespace treerough {

namespace {

bool same_times(const GridPtr& a, const GridPtr& b) {
    if (a == b) return true;
    if (!a || !b) return false;
    return a->times() == b->times();
}

void validate_path(const ControlledPath& y) {
    if (!y.ref || !y.ref->grid) throw std::invalid_argument("controlled path: missing reference path");
}

void check_kappa(const BranchedRoughPath& X, double kappa) {
    int n = holder_truncation(X.gamma);
    if (!(kappa > 1.0 / (n + 1)) || kappa > X.gamma + 1e-12)
        throw std::invalid_argument("controlled path: kappa outside (1/(n+1), gamma]");
}

// One chain-rule term of delta y^f = sum c X^rho y^sigma + y^{f,#}.
struct LedgerTerm {
    double weight;
    Forest rho;
    Forest sigma;
};

// Everything derived from the reference path that the ledger operations
// share: the stored forest index, the relation terms keyed by trunk, and
// dense tables of the driver's forest values.
struct LedgerCtx {
    const BranchedRoughPath* X = nullptr;
    int n = 0;
    std::vector<Forest> stored;
    std::map<Forest, int> pos;
    std::map<Forest, std::vector<LedgerTerm>> terms;
    std::vector<Increment2> tables;
};

LedgerCtx make_ctx(const BranchedRoughPath& X) {
    LedgerCtx ctx;
    ctx.X = &X;
    ctx.n = holder_truncation(X.gamma);
    if (ctx.n >= 2) ctx.stored = enumerate_forests(ctx.n - 1, X.alphabet);
    for (int q = 0; q < static_cast<int>(ctx.stored.size()); ++q) ctx.pos.emplace(ctx.stored[q], q);
    for (const Forest& f : ctx.stored) ctx.terms[f];
    for (const Forest& sigma : ctx.stored)
        for (const auto& [key, cnt] : reduced_coproduct(sigma)) {
            auto it = ctx.terms.find(key.first);
            if (it != ctx.terms.end())
                it->second.push_back({cnt.convert_to<double>(), key.second, sigma});
        }
    int P = X.grid->points();
    ctx.tables.reserve(ctx.stored.size());
    for (const Forest& f : ctx.stored) {
        Increment2 v(X.grid, 1);
        parallel_blocks(P, [&](int b, int e) {
            for (int i = std::max(b, 1); i < e; ++i)
                for (int j = 0; j < i; ++j) v.ref(i, j) = X.forest_value(f, i, j);
        });
        ctx.tables.push_back(std::move(v));
    }
    return ctx;
}

// Remainders are whatever the expansions miss; this makes the ledger hold
// by construction, so checks probe the chain rule, not arithmetic.
void fill_remainders(ControlledPath& y, const LedgerCtx& ctx) {
    const GridPtr& g = y.ref->grid;
    int P = g->points(), k = y.k();
    int F = static_cast<int>(ctx.stored.size());
    std::vector<const GridPath*> cp(F);
    for (int q = 0; q < F; ++q) cp[q] = &y.coeffs.at(ctx.stored[q]);

    y.base_rem = Increment2(g, k);
    parallel_blocks(P, [&](int b, int e) {
        for (int i = std::max(b, 1); i < e; ++i)
            for (int j = 0; j < i; ++j)
                for (int c = 0; c < k; ++c) {
                    double r = y.base.at(i, c) - y.base.at(j, c);
                    for (int q = 0; q < F; ++q) r -= ctx.tables[q].at(i, j) * cp[q]->at(j, c);
                    y.base_rem.ref(i, j, c) = r;
                }
    });

    y.coeff_rem.clear();
    for (int q = 0; q < F; ++q) {
        Increment2 rem(g, k);
        struct Src {
            double w;
            const Increment2* rho;
            const GridPath* sig;
        };
        std::vector<Src> src;
        for (const auto& t : ctx.terms.at(ctx.stored[q]))
            src.push_back({t.weight, &ctx.tables[ctx.pos.at(t.rho)], &y.coeffs.at(t.sigma)});
        parallel_blocks(P, [&](int b, int e) {
            for (int i = std::max(b, 1); i < e; ++i)
                for (int j = 0; j < i; ++j)
                    for (int c = 0; c < k; ++c) {
                        double r = cp[q]->at(i, c) - cp[q]->at(j, c);
                        for (const Src& s : src) r -= s.w * s.rho->at(i, j) * s.sig->at(j, c);
                        rem.ref(i, j, c) = r;
                    }
        });
        y.coeff_rem.emplace(ctx.stored[q], std::move(rem));
    }
}

// Distinct ordered tuples (f_1, ..., f_m) of nonempty forests with
// f_1 ... f_m = f, each tuple once.
void tuples_rec(const Forest& rest, std::vector<Forest>& acc, std::vector<std::vector<Forest>>& out) {
    if (rest.trees.empty()) {
        if (!acc.empty()) out.push_back(acc);
        return;
    }
    std::vector<std::pair<Tree, int>> groups;
    for (const Tree& t : rest.trees) {
        if (!groups.empty() && groups.back().first == t) ++groups.back().second;
        else groups.emplace_back(t, 1);
    }
    int G = static_cast<int>(groups.size());
    std::vector<int> take(G, 0);
    for (;;) {
        int p = 0;
        while (p < G && take[p] == groups[p].second) take[p++] = 0;
        if (p == G) break;
        ++take[p];
        Forest part, left;
        for (int q = 0; q < G; ++q) {
            for (int c = 0; c < take[q]; ++c) part.trees.push_back(groups[q].first);
            for (int c = take[q]; c < groups[q].second; ++c) left.trees.push_back(groups[q].first);
        }
        acc.push_back(std::move(part));
        tuples_rec(left, acc, out);
        acc.pop_back();
    }
}

// All ways to split a forest into an ordered pair of sub-multisets; either
// side may be empty.
std::vector<std::pair<Forest, Forest>> submultiset_splits(const Forest& f) {
    std::vector<std::pair<Tree, int>> groups;
    for (const Tree& t : f.trees) {
        if (!groups.empty() && groups.back().first == t) ++groups.back().second;
        else groups.emplace_back(t, 1);
    }
    int G = static_cast<int>(groups.size());
    std::vector<int> take(G, 0);
    std::vector<std::pair<Forest, Forest>> out;
    for (;;) {
        Forest a, b;
        for (int q = 0; q < G; ++q) {
            for (int c = 0; c < take[q]; ++c) a.trees.push_back(groups[q].first);
            for (int c = take[q]; c < groups[q].second; ++c) b.trees.push_back(groups[q].first);
        }
        out.emplace_back(std::move(a), std::move(b));
        int p = 0;
        while (p < G && take[p] == groups[p].second) take[p++] = 0;
        if (p == G) break;
        ++take[p];
    }
    return out;
}

ControlledPath compose_impl(const std::vector<Poly>& phi, const ControlledPath& y, const LedgerCtx& ctx) {
    int k = y.k();
    int l = static_cast<int>(phi.size());
    if (l == 0) throw std::invalid_argument("compose_smooth: empty map");
    for (const Poly& p : phi)
        for (const auto& [e, c] : p) {
            (void)c;
            if (static_cast<int>(e.size()) != k)
                throw std::invalid_argument("compose_smooth: map arity does not match the path dimension");
        }
    const GridPtr& g = y.ref->grid;
    int P = g->points();
    int F = static_cast<int>(ctx.stored.size());

    ControlledPath z;
    z.ref = y.ref;
    z.kappa = y.kappa;
    z.base = GridPath(g, l);
    for (const Forest& f : ctx.stored) z.coeffs.emplace(f, GridPath(g, l));

    struct TupleInfo {
        std::vector<int> parts;  // positions into ctx.stored
        double inv_fact;
    };
    std::vector<std::vector<TupleInfo>> tinfo(F);
    int max_m = 0;
    for (int q = 0; q < F; ++q) {
        std::vector<std::vector<Forest>> tuples;
        std::vector<Forest> acc;
        tuples_rec(ctx.stored[q], acc, tuples);
        for (auto& tp : tuples) {
            TupleInfo ti;
            double fact = 1;
            for (int m = 1; m <= static_cast<int>(tp.size()); ++m) fact *= m;
            ti.inv_fact = 1.0 / fact;
            for (const Forest& part : tp) ti.parts.push_back(ctx.pos.at(part));
            max_m = std::max(max_m, static_cast<int>(ti.parts.size()));
            tinfo[q].push_back(std::move(ti));
        }
    }

    // mixed partials of each output, keyed by the sorted direction list
    std::vector<std::map<std::vector<int>, Poly>> dcache(l);
    for (int j = 0; j < l; ++j) dcache[j].emplace(std::vector<int>{}, phi[j]);
    for (int m = 1; m <= max_m; ++m) {
        std::vector<int> dirs(m, 0);
        for (;;) {
            for (int j = 0; j < l; ++j) {
                std::vector<int> key = dirs;
                std::sort(key.begin(), key.end());
                if (!dcache[j].count(key)) {
                    std::vector<int> head(key.begin(), key.end() - 1);
                    dcache[j].emplace(key, poly_derivative(dcache[j].at(head), key.back()));
                }
            }
            int p = 0;
            while (p < m && ++dirs[p] == k) dirs[p++] = 0;
            if (p == m) break;
        }
    }

    std::vector<const GridPath*> cp(F);
    std::vector<GridPath*> zp(F);
    for (int q = 0; q < F; ++q) {
        cp[q] = &y.coeffs.at(ctx.stored[q]);
        zp[q] = &z.coeffs.at(ctx.stored[q]);
    }

    parallel_blocks(P, [&](int b, int e) {
        std::vector<double> yv(k), accv(l);
        for (int i = b; i < e; ++i) {
            for (int c = 0; c < k; ++c) yv[c] = y.base.at(i, c);
            for (int j = 0; j < l; ++j) z.base.ref(i, j) = poly_eval(phi[j], yv);
            for (int q = 0; q < F; ++q) {
                std::fill(accv.begin(), accv.end(), 0.0);
                for (const TupleInfo& ti : tinfo[q]) {
                    int m = static_cast<int>(ti.parts.size());
                    std::vector<int> bi(m, 0);
                    for (;;) {
                        double w = 1;
                        for (int r = 0; r < m; ++r) w *= cp[ti.parts[r]]->at(i, bi[r]);
                        if (w != 0.0) {
                            std::vector<int> key(bi);
                            std::sort(key.begin(), key.end());
                            for (int j = 0; j < l; ++j)
                                accv[j] += ti.inv_fact * w * poly_eval(dcache[j].at(key), yv);
                        }
                        int p = 0;
                        while (p < m && ++bi[p] == k) bi[p++] = 0;
                        if (p == m) break;
                    }
                }
                for (int j = 0; j < l; ++j) zp[q]->ref(i, j) = accv[j];
            }
        }
    });

    fill_remainders(z, ctx);
    return z;
}

ControlledPath integrate_impl(const BranchedRoughPath& X, int label, const ControlledPath& y,
                              const LedgerCtx& ctx) {
    const GridPtr& g = X.grid;
    int P = g->points(), k = y.k();
    int F = static_cast<int>(ctx.stored.size());
    const Increment2& x1 = X.value(Tree(label));
    std::vector<const Increment2*> planted(F);
    std::vector<const GridPath*> cp(F);
    for (int q = 0; q < F; ++q) {
        planted[q] = &X.value(Tree(label, ctx.stored[q].trees));
        cp[q] = &y.coeffs.at(ctx.stored[q]);
    }

    Increment2 germ(g, k);
    parallel_blocks(P, [&](int b, int e) {
        for (int i = std::max(b, 1); i < e; ++i)
            for (int j = 0; j < i; ++j)
                for (int c = 0; c < k; ++c) {
                    double v = x1.at(i, j) * y.base.at(j, c);
                    for (int q = 0; q < F; ++q) v += planted[q]->at(i, j) * cp[q]->at(j, c);
                    germ.ref(i, j, c) = v;
                }
    });
    SewResult sr = sew(germ, (ctx.n + 1) * y.kappa);

    ControlledPath z;
    z.ref = y.ref;
    z.kappa = y.kappa;
    z.base = GridPath(g, k);
    for (int i = 1; i < P; ++i)
        for (int c = 0; c < k; ++c) z.base.ref(i, c) = sr.path_part.at(i, 0, c);

    Tree dot(label);
    for (const Forest& f : ctx.stored) {
        if (f.trees.size() == 1 && f.trees[0] == dot) {
            z.coeffs.emplace(f, y.base);
        } else if (f.trees.size() == 1 && f.trees[0].label == label && !f.trees[0].children.empty()) {
            z.coeffs.emplace(f, y.coeffs.at(Forest{f.trees[0].children}));
        } else {
            z.coeffs.emplace(f, GridPath(g, k));
        }
    }
    fill_remainders(z, ctx);
    return z;
}

std::shared_ptr<const BranchedRoughPath> restrict_brp(const BranchedRoughPath& X, int i0, int i1) {
    const auto& ts = X.grid->times();
    auto g = std::make_shared<Grid>(std::vector<double>(ts.begin() + i0, ts.begin() + i1 + 1));
    auto out = std::make_shared<BranchedRoughPath>();
    out->gamma = X.gamma;
    out->level = X.level;
    out->alphabet = X.alphabet;
    out->grid = g;
    int P = i1 - i0 + 1;
    for (const auto& [t, v] : X.tree_values) {
        Increment2 w(g, 1);
        for (int i = 1; i < P; ++i)
            for (int j = 0; j < i; ++j) w.ref(i, j) = v.at(i0 + i, i0 + j);
        out->tree_values.emplace(t, std::move(w));
    }
    out->recorded_defect = X.recorded_defect;
    return out;
}

void add_into(ControlledPath& acc, const ControlledPath& inc) {
    for (size_t q = 0; q < acc.base.v.size(); ++q) acc.base.v[q] += inc.base.v[q];
    for (auto& [f, c] : acc.coeffs) {
        const GridPath& o = inc.coeffs.at(f);
        for (size_t q = 0; q < c.v.size(); ++q) c.v[q] += o.v[q];
    }
    acc.base_rem += inc.base_rem;
    for (auto& [f, r] : acc.coeff_rem) r += inc.coeff_rem.at(f);
}

// Distance driving the Picard stopping rule. The remainder seminorms alone
// vanish on differences that are exact driver polynomials (their ledger
// closes with zero remainder), so sup norms of the base and coefficient
// paths are added to make the iterates actually separate.
double iterate_distance(const ControlledPath& a, const ControlledPath& b, int n) {
    double out = 0;
    for (size_t q = 0; q < a.base.v.size(); ++q)
        out = std::max(out, std::abs(a.base.v[q] - b.base.v[q]));
    for (const auto& [f, c] : a.coeffs) {
        const GridPath& o = b.coeffs.at(f);
        for (size_t q = 0; q < c.v.size(); ++q) out = std::max(out, std::abs(c.v[q] - o.v[q]));
    }
    Increment2 diff = a.base_rem;
    diff -= b.base_rem;
    out += holder_norm2(diff, n * a.kappa).norm;
    for (const auto& [f, r] : a.coeff_rem) {
        Increment2 u = r;
        u -= b.coeff_rem.at(f);
        out += holder_norm2(u, a.kappa * (n - degree(f))).norm;
    }
    return out;
}

}  // namespace

int ControlledPath::truncation() const { return ref ? holder_truncation(ref->gamma) : 0; }

ControlledPath controlled_constant(std::shared_ptr<const BranchedRoughPath> X,
                                   std::vector<double> value, double kappa) {
    if (!X || !X->grid) throw std::invalid_argument("controlled_constant: missing driver");
    check_kappa(*X, kappa);
    if (value.empty()) throw std::invalid_argument("controlled_constant: empty value");
    int k = static_cast<int>(value.size());
    ControlledPath y;
    y.ref = std::move(X);
    y.kappa = kappa;
    const GridPtr& g = y.ref->grid;
    int P = g->points();
    y.base = GridPath(g, k);
    for (int i = 0; i < P; ++i)
        for (int c = 0; c < k; ++c) y.base.ref(i, c) = value[c];
    int n = holder_truncation(y.ref->gamma);
    if (n >= 2)
        for (const Forest& f : enumerate_forests(n - 1, y.ref->alphabet)) {
            y.coeffs.emplace(f, GridPath(g, k));
            y.coeff_rem.emplace(f, Increment2(g, k));
        }
    y.base_rem = Increment2(g, k);
    return y;
}

ControlledPath controlled_from_coeffs(std::shared_ptr<const BranchedRoughPath> X, GridPath base,
                                      std::map<Forest, GridPath> coeffs, double kappa) {
    if (!X || !X->grid) throw std::invalid_argument("controlled_from_coeffs: missing driver");
    check_kappa(*X, kappa);
    if (base.dim < 1 || !same_times(base.grid, X->grid))
        throw std::invalid_argument("controlled_from_coeffs: base path is off the driver grid");
    ControlledPath y;
    y.ref = std::move(X);
    y.kappa = kappa;
    y.base = std::move(base);
    LedgerCtx ctx = make_ctx(*y.ref);
    for (const auto& [f, c] : coeffs) {
        if (!ctx.pos.count(f))
            throw std::invalid_argument("controlled_from_coeffs: coefficient outside the stored forests");
        if (c.dim != y.base.dim || !same_times(c.grid, y.ref->grid))
            throw std::invalid_argument("controlled_from_coeffs: coefficient path shape mismatch");
    }
    for (const Forest& f : ctx.stored) {
        auto it = coeffs.find(f);
        if (it != coeffs.end()) y.coeffs.emplace(f, std::move(it->second));
        else y.coeffs.emplace(f, GridPath(y.ref->grid, y.base.dim));
    }
    fill_remainders(y, ctx);
    return y;
}

ControlledPath controlled_driver(std::shared_ptr<const BranchedRoughPath> X, double kappa) {
    if (!X || !X->grid) throw std::invalid_argument("controlled_driver: missing driver");
    check_kappa(*X, kappa);
    int d = X->alphabet;
    const GridPtr& g = X->grid;
    int P = g->points();
    GridPath base(g, d);
    for (int a = 0; a < d; ++a) {
        const Increment2& v = X->value(Tree(a));
        for (int i = 1; i < P; ++i) base.ref(i, a) = v.at(i, 0);
    }
    std::map<Forest, GridPath> coeffs;
    if (holder_truncation(X->gamma) >= 2)
        for (int a = 0; a < d; ++a) {
            GridPath e(g, d);
            for (int i = 0; i < P; ++i) e.ref(i, a) = 1.0;
            coeffs.emplace(Forest{{Tree(a)}}, std::move(e));
        }
    return controlled_from_coeffs(std::move(X), std::move(base), std::move(coeffs), kappa);
}

double controlled_norm(const ControlledPath& y) {
    validate_path(y);
    int n = holder_truncation(y.ref->gamma);
    double s = 0;
    for (int c = 0; c < y.k(); ++c) s += y.base.at(0, c) * y.base.at(0, c);
    double out = std::sqrt(s);
    out += holder_norm2(y.base_rem, n * y.kappa).norm;
    for (const auto& [f, rem] : y.coeff_rem) out += holder_norm2(rem, y.kappa * (n - degree(f))).norm;
    return out;
}

RemainderReport check_remainders(const ControlledPath& y, int stride) {
    validate_path(y);
    if (stride < 1) throw std::invalid_argument("check_remainders: stride must be positive");
    LedgerCtx ctx = make_ctx(*y.ref);
    int P = y.ref->grid->points(), k = y.k();
    int F = static_cast<int>(ctx.stored.size());
    std::vector<const GridPath*> cp(F);
    std::vector<const Increment2*> crem(F);
    for (int q = 0; q < F; ++q) {
        cp[q] = &y.coeffs.at(ctx.stored[q]);
        crem[q] = &y.coeff_rem.at(ctx.stored[q]);
    }

    RemainderReport rep;
    for (int i = 1; i < P; ++i)
        for (int j = 0; j < i; ++j)
            for (int c = 0; c < k; ++c) {
                double r = y.base.at(i, c) - y.base.at(j, c);
                for (int q = 0; q < F; ++q) r -= ctx.tables[q].at(i, j) * cp[q]->at(j, c);
                rep.control_defect = std::max(rep.control_defect, std::abs(r - y.base_rem.at(i, j, c)));
            }
    for (int q = 0; q < F; ++q) {
        struct Src {
            double w;
            const Increment2* rho;
            const GridPath* sig;
        };
        std::vector<Src> src;
        for (const auto& t : ctx.terms.at(ctx.stored[q]))
            src.push_back({t.weight, &ctx.tables[ctx.pos.at(t.rho)], &y.coeffs.at(t.sigma)});
        for (int i = 1; i < P; ++i)
            for (int j = 0; j < i; ++j)
                for (int c = 0; c < k; ++c) {
                    double r = cp[q]->at(i, c) - cp[q]->at(j, c);
                    for (const Src& s : src) r -= s.w * s.rho->at(i, j) * s.sig->at(j, c);
                    rep.control2_defect =
                        std::max(rep.control2_defect, std::abs(r - crem[q]->at(i, j, c)));
                }
    }

    std::vector<int> idx;
    for (int i = 0; i < P; i += stride) idx.push_back(i);
    if (idx.back() != P - 1) idx.push_back(P - 1);
    int Q = static_cast<int>(idx.size());
    for (int a = 2; a < Q; ++a)
        for (int b = 1; b < a; ++b)
            for (int c0 = 0; c0 < b; ++c0) {
                int i = idx[a], u = idx[b], j = idx[c0];
                for (int c = 0; c < k; ++c) {
                    double r = y.base_rem.at(i, j, c) - y.base_rem.at(i, u, c) - y.base_rem.at(u, j, c);
                    for (int q = 0; q < F; ++q) r -= ctx.tables[q].at(i, u) * crem[q]->at(u, j, c);
                    rep.delta_sharp_defect = std::max(rep.delta_sharp_defect, std::abs(r));
                }
            }

    rep.sharp_norm = holder_norm2(y.base_rem, ctx.n * y.kappa).norm;
    for (int q = 0; q < F; ++q)
        rep.coeff_sharp_norms[ctx.stored[q]] =
            holder_norm2(*crem[q], y.kappa * (ctx.n - degree(ctx.stored[q]))).norm;
    return rep;
}

ControlledPath compose_smooth(const std::vector<Poly>& phi, const ControlledPath& y) {
    validate_path(y);
    LedgerCtx ctx = make_ctx(*y.ref);
    return compose_impl(phi, y, ctx);
}

ControlledPath rough_integrate(const BranchedRoughPath& X, int label, const ControlledPath& y) {
    validate_path(y);
    if (label < 0 || label >= X.alphabet)
        throw std::invalid_argument("rough_integrate: label out of range");
    if (!same_times(X.grid, y.ref->grid) || X.gamma != y.ref->gamma || X.alphabet != y.ref->alphabet)
        throw std::invalid_argument("rough_integrate: driver incompatible with the reference path");
    int n = holder_truncation(X.gamma);
    if (X.level < n)
        throw std::invalid_argument("rough_integrate: driver level below the truncation order");
    if (!(y.kappa * (n + 1) > 1.0))
        throw std::invalid_argument("rough_integrate: kappa*(n+1) must exceed 1");
    LedgerCtx ctx = make_ctx(X);
    return integrate_impl(X, label, y, ctx);
}

ControlledPath solve_rde(const VectorfieldFamily& f, std::shared_ptr<const BranchedRoughPath> X,
                         std::vector<double> eta, double T, double tol, RdeStats* stats) {
    if (!X || !X->grid) throw std::invalid_argument("solve_rde: missing driver");
    if (static_cast<int>(f.f.size()) != f.d)
        throw std::invalid_argument("solve_rde: malformed vector field family");
    if (f.d != X->alphabet) throw std::invalid_argument("solve_rde: field count != driver alphabet");
    if (f.k != static_cast<int>(eta.size()))
        throw std::invalid_argument("solve_rde: initial value dimension != field dimension");
    if (!(tol > 0)) throw std::invalid_argument("solve_rde: tolerance must be positive");
    const auto& ts = X->grid->times();
    int P = X->grid->points();
    double span = ts.back() - ts.front();
    int iT = 0;
    for (int i = 0; i < P; ++i)
        if (ts[i] <= T + 1e-9 * span) iT = i;
    if (iT < 1) throw std::invalid_argument("solve_rde: T lies before the first grid point");

    double kap = X->gamma;  // kappa = gamma always satisfies (n+1) kappa > 1
    int n = holder_truncation(X->gamma);
    int k = f.k;
    std::vector<Forest> stored;
    if (n >= 2) stored = enumerate_forests(n - 1, X->alphabet);

    std::vector<double> vals(static_cast<size_t>(iT + 1) * k, 0.0);
    std::map<Forest, std::vector<double>> cvals;
    for (const Forest& fo : stored) cvals.emplace(fo, std::vector<double>(static_cast<size_t>(iT + 1) * k, 0.0));
    for (int c = 0; c < k; ++c) vals[c] = eta[c];

    RdeStats local;
    std::vector<double> cur = eta;
    int i0 = 0;
    int win = iT;  // window length in panels
    int splits = 0;
    while (i0 < iT) {
        int i1 = std::min(i0 + win, iT);
        auto Xw = restrict_brp(*X, i0, i1);
        LedgerCtx ctx = make_ctx(*Xw);
        ControlledPath ywin = controlled_constant(Xw, cur, kap);
        bool converged = false, stalled = false;
        double prev = std::numeric_limits<double>::infinity();
        for (int it = 1; it <= 100; ++it) {
            ++local.iterations;
            ControlledPath next = controlled_constant(Xw, cur, kap);
            for (int a = 0; a < f.d; ++a) {
                ControlledPath w = compose_impl(f.f[a], ywin, ctx);
                ControlledPath za = integrate_impl(*Xw, a, w, ctx);
                add_into(next, za);
            }
            double dist = iterate_distance(next, ywin, n);
            local.residuals.push_back(dist);
            ywin = std::move(next);
            if (dist < tol) {
                converged = true;
                break;
            }
            // the first n iterations populate ever deeper coefficient slots
            // with O(1) values, so contraction can only be judged afterwards
            if (it > n && dist >= prev) {
                stalled = true;
                break;
            }
            prev = dist;
        }
        if (converged) {
            ++local.windows;
            int Pw = i1 - i0 + 1;
            for (int q = 0; q < Pw; ++q)
                for (int c = 0; c < k; ++c)
                    vals[static_cast<size_t>(i0 + q) * k + c] = ywin.base.at(q, c);
            for (const Forest& fo : stored) {
                auto& dst = cvals.at(fo);
                const GridPath& srcp = ywin.coeffs.at(fo);
                for (int q = 0; q < Pw; ++q)
                    for (int c = 0; c < k; ++c) dst[static_cast<size_t>(i0 + q) * k + c] = srcp.at(q, c);
            }
            for (int c = 0; c < k; ++c) cur[c] = ywin.base.at(Pw - 1, c);
            i0 = i1;
            if (i0 < iT) win = std::min(win * 2, iT - i0);
        } else if (stalled) {
            if (++splits > 16 || win == 1)
                throw std::runtime_error("solve_rde: no contraction after repeated window splits");
            win = std::max(1, win / 2);
        } else {
            throw std::runtime_error("solve_rde: Picard iteration cap reached");
        }
    }

    std::shared_ptr<const BranchedRoughPath> Xp =
        (iT == P - 1) ? std::move(X) : restrict_brp(*X, 0, iT);
    ControlledPath out;
    out.ref = Xp;
    out.kappa = kap;
    out.base = GridPath(Xp->grid, k);
    out.base.v = std::move(vals);
    for (const Forest& fo : stored) {
        GridPath p(Xp->grid, k);
        p.v = std::move(cvals.at(fo));
        out.coeffs.emplace(fo, std::move(p));
    }
    LedgerCtx ctx = make_ctx(*Xp);
    fill_remainders(out, ctx);
    if (stats) *stats = std::move(local);
    return out;
}

BranchedRoughPath lift_controlled(const ControlledPath& y, int level) {
    validate_path(y);
    const BranchedRoughPath& X = *y.ref;
    int d = X.alphabet, kd = y.k();
    if (kd % d != 0)
        throw std::invalid_argument("lift_controlled: path dimension is not a multiple of the driver alphabet");
    int kout = kd / d;
    if (level < 0) level = X.level;
    if (level < 1 || level > X.level)
        throw std::invalid_argument("lift_controlled: level out of range");
    LedgerCtx ctx = make_ctx(X);
    const GridPtr& g = X.grid;
    const auto& ts = g->times();
    int P = g->points();
    int n = ctx.n;
    int F = static_cast<int>(ctx.stored.size());

    BranchedRoughPath Y;
    Y.gamma = X.gamma;
    Y.level = level;
    Y.alphabet = kout;
    Y.grid = g;

    // per built tree: X-expansion coefficients read at the base point
    std::map<Tree, std::map<Forest, GridPath>> kled;

    // level 1: integrate each driver slice of y
    {
        std::vector<ControlledPath> za;
        za.reserve(d);
        for (int a = 0; a < d; ++a) za.push_back(integrate_impl(X, a, y, ctx));
        for (int b = 0; b < kout; ++b) {
            Increment2 v(g, 1);
            for (int i = 1; i < P; ++i)
                for (int j = 0; j < i; ++j) {
                    double s = 0;
                    for (int a = 0; a < d; ++a) {
                        int c = a * kout + b;
                        s += za[a].base.at(i, c) - za[a].base.at(j, c);
                    }
                    v.ref(i, j) = s;
                }
            Y.tree_values.emplace(Tree(b), std::move(v));
            std::map<Forest, GridPath> led;
            for (int q = 0; q < F; ++q) {
                GridPath p(g, 1);
                bool nz = false;
                for (int i = 0; i < P; ++i) {
                    double s = 0;
                    for (int a = 0; a < d; ++a) s += za[a].coeffs.at(ctx.stored[q]).at(i, a * kout + b);
                    p.ref(i) = s;
                    nz = nz || (s != 0.0);
                }
                if (nz) led.emplace(ctx.stored[q], std::move(p));
            }
            kled.emplace(Tree(b), std::move(led));
        }
    }

    auto yforest = [&](const Forest& fo, int i, int j) {
        double v = 1;
        for (const Tree& t : fo.trees) v *= Y.tree_values.at(t).at(i, j);
        return v;
    };

    // X-expansion of a product of built tree increments: ledgers multiply,
    // index forests merge, truncation at degree n-1
    auto forest_ledger = [&](const Forest& fo) {
        std::map<Forest, GridPath> acc;
        bool first = true;
        for (const Tree& t : fo.trees) {
            const auto& tl = kled.at(t);
            if (first) {
                acc = tl;
                first = false;
                continue;
            }
            std::map<Forest, GridPath> nxt;
            for (const auto& [g1, p1] : acc)
                for (const auto& [g2, p2] : tl) {
                    Forest gm = merge(g1, g2);
                    if (degree(gm) > n - 1) continue;
                    auto [it, fresh] = nxt.try_emplace(gm, GridPath(g, 1));
                    (void)fresh;
                    for (int i = 0; i < P; ++i) it->second.ref(i) += p1.at(i) * p2.at(i);
                }
            acc = std::move(nxt);
        }
        return acc;
    };

    // trunk-first splits of the forest coproduct with a nonempty trunk
    struct FSplit {
        double c;
        Forest trunk;
        Forest rest;
    };

    std::vector<std::vector<std::pair<Forest, Forest>>> gsplits(F);
    for (int q = 0; q < F; ++q) gsplits[q] = submultiset_splits(ctx.stored[q]);

    std::vector<const Increment2*> x1(d);
    std::vector<std::vector<const Increment2*>> xp(d, std::vector<const Increment2*>(F));
    for (int a = 0; a < d; ++a) {
        x1[a] = &X.value(Tree(a));
        for (int q = 0; q < F; ++q) xp[a][q] = &X.value(Tree(a, ctx.stored[q].trees));
    }

    for (int m = 2; m <= level; ++m) {
        for (const Tree& T : enumerate_trees(m, kout)) {
            int b = T.label;
            Forest fch{T.children};

            std::vector<FSplit> fs{{1.0, fch, Forest{}}};
            for (const auto& [key, cnt] : reduced_coproduct(fch))
                fs.push_back({cnt.convert_to<double>(), key.first, key.second});

            // ledgers of every trunk that can appear, keyed by forest
            std::map<Forest, std::map<Forest, GridPath>> trunk_led;
            for (const auto& t : fs)
                if (!trunk_led.count(t.trunk)) trunk_led.emplace(t.trunk, forest_ledger(t.trunk));

            Increment2 out(g, 1);
            std::map<Forest, GridPath> led;  // own ledger, collected at each base

            std::vector<double> wval(static_cast<size_t>(d) * P);
            std::vector<double> wco(static_cast<size_t>(d) * F * P);
            std::vector<double> Fco(static_cast<size_t>(F) * P);

            for (int s = 0; s + 1 < P; ++s) {
                int Q = P - s;
                // expansion data of u -> Y^{fch}_{us} at each u >= s
                for (int u = s; u < P; ++u) {
                    double Fu = (u == s) ? 0.0 : yforest(fch, u, s);
                    for (int q = 0; q < F; ++q) {
                        double acc = 0;
                        for (const auto& t : fs) {
                            auto lit = trunk_led.at(t.trunk).find(ctx.stored[q]);
                            if (lit == trunk_led.at(t.trunk).end()) continue;
                            double tail = t.rest.trees.empty() ? 1.0 : (u == s ? 0.0 : yforest(t.rest, u, s));
                            if (tail != 0.0) acc += t.c * lit->second.at(u) * tail;
                        }
                        Fco[static_cast<size_t>(q) * P + u] = acc;
                    }
                    for (int a = 0; a < d; ++a) {
                        int comp = a * kout + b;
                        wval[static_cast<size_t>(a) * P + u] = y.base.at(u, comp) * Fu;
                        for (int q = 0; q < F; ++q) {
                            double acc = 0;
                            for (const auto& [g1, g2] : gsplits[q]) {
                                double lead;
                                if (g1.trees.empty()) lead = y.base.at(u, comp);
                                else lead = y.coeffs.at(g1).at(u, comp);
                                if (lead == 0.0) continue;
                                double tail;
                                if (g2.trees.empty()) tail = Fu;
                                else tail = Fco[static_cast<size_t>(ctx.pos.at(g2)) * P + u];
                                acc += lead * tail;
                            }
                            wco[(static_cast<size_t>(a) * F + q) * P + u] = acc;
                        }
                    }
                }

                auto gs = std::make_shared<Grid>(std::vector<double>(ts.begin() + s, ts.end()));
                Increment2 germ(gs, 1);
                for (int i = 1; i < Q; ++i)
                    for (int j = 0; j < i; ++j) {
                        int gi = s + i, gj = s + j;
                        double v = 0;
                        for (int a = 0; a < d; ++a) {
                            v += x1[a]->at(gi, gj) * wval[static_cast<size_t>(a) * P + gj];
                            for (int q = 0; q < F; ++q) {
                                double w = wco[(static_cast<size_t>(a) * F + q) * P + gj];
                                if (w != 0.0) v += xp[a][q]->at(gi, gj) * w;
                            }
                        }
                        germ.ref(i, j) = v;
                    }
                SewResult sr = sew(germ, (n + 1) * y.kappa);
                for (int i = 1; i < Q; ++i) out.ref(s + i, s) = sr.path_part.at(i, 0);

                // the germ coefficients at u = s are the expansion at base s
                if (m <= level - 1) {
                    for (int a = 0; a < d; ++a)
                        for (int q = 0; q < F; ++q) {
                            if (degree(ctx.stored[q]) > n - 2) continue;
                            double w = wco[(static_cast<size_t>(a) * F + q) * P + s];
                            if (w == 0.0) continue;
                            Forest slot{{Tree(a, ctx.stored[q].trees)}};
                            auto [it, fresh] = led.try_emplace(slot, GridPath(g, 1));
                            (void)fresh;
                            it->second.ref(s) += w;
                        }
                }
            }
            Y.tree_values.emplace(T, std::move(out));
            if (m <= level - 1) kled.emplace(T, std::move(led));
        }
    }
    return Y;
}

}  // namespace treerough
