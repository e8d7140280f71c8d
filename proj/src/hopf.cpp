#include "treerough/hopf.hpp"

#include <cmath>
#include <stdexcept>
#include <tuple>

namespace treerough {

void tensor_add(TensorSeries& into, const TensorSeries& from, const BigInt& scale) {
    for (const auto& [k, v] : from) {
        BigInt& slot = into[k];
        slot += v * scale;
        if (slot == 0) into.erase(k);
    }
}

TensorSeries tensor_product(const TensorSeries& a, const TensorSeries& b) {
    TensorSeries out;
    for (const auto& [ka, va] : a)
        for (const auto& [kb, vb] : b) {
            TensorKey k{merge(ka.first, kb.first), merge(ka.second, kb.second)};
            BigInt& slot = out[k];
            slot += va * vb;
            if (slot == 0) out.erase(k);
        }
    return out;
}

TensorSeries coproduct(const Tree& t) {
    TensorSeries out;
    out[{Forest{}, Forest(t)}] = 1;
    // regraft the rooted slot of the children coproduct
    TensorSeries inner = coproduct(detach_root(t));
    for (const auto& [k, v] : inner)
        out[{Forest(graft(k.first, t.label)), k.second}] += v;
    return out;
}

TensorSeries coproduct(const Forest& f) {
    TensorSeries out;
    out[{Forest{}, Forest{}}] = 1;
    for (const auto& t : f.trees) out = tensor_product(out, coproduct(t));
    return out;
}

namespace {

// rooted-part ⊗ detached pairs over admissible cuts, empty cut included,
// the "everything detached" term excluded (it needs the root edge, which is
// not part of the tree).
TensorSeries cut_terms(const Tree& t) {
    // per child: either detach it whole, or keep it and cut inside
    TensorSeries acc;
    acc[{Forest{}, Forest{}}] = 1;
    for (const auto& c : t.children) {
        TensorSeries choice;
        choice[{Forest{}, Forest(c)}] = 1;  // severed child edge
        tensor_add(choice, cut_terms(c));
        acc = tensor_product(acc, choice);
    }
    TensorSeries out;
    for (const auto& [k, v] : acc)
        out[{Forest(graft(k.first, t.label)), k.second}] += v;
    return out;
}

}  // namespace

TensorSeries coproduct_by_cuts(const Tree& t) {
    TensorSeries out = cut_terms(t);
    out[{Forest{}, Forest(t)}] += 1;
    return out;
}

TensorSeries reduced_coproduct(const Forest& f) {
    TensorSeries out = coproduct(f);
    auto drop = [&out](const TensorKey& k) {
        auto it = out.find(k);
        if (it != out.end()) {
            it->second -= 1;
            if (it->second == 0) out.erase(it);
        }
    };
    drop({Forest{}, f});
    drop({f, Forest{}});
    return out;
}

TensorSeries reduced_coproduct(const Tree& t) { return reduced_coproduct(Forest(t)); }

BigInt count_reduced(const Forest& sigma, const Forest& rooted, const Forest& detached) {
    TensorSeries d = reduced_coproduct(sigma);
    auto it = d.find({rooted, detached});
    return it == d.end() ? BigInt(0) : it->second;
}

BigInt count_reduced(const Tree& sigma, const Tree& rooted, const Forest& detached) {
    return count_reduced(Forest(sigma), Forest(rooted), detached);
}

BigInt count_allowing_empty(const Forest& sigma, const Forest& rooted, const Forest& detached) {
    if (detached.empty()) return sigma == rooted ? 1 : 0;
    return count_reduced(sigma, rooted, detached);
}

namespace {

void shuffle_rec(const Word& a, size_t i, const Word& b, size_t j, Word& acc, WordSeries& out) {
    if (i == a.size() && j == b.size()) {
        out[acc] += 1;
        return;
    }
    if (i < a.size()) {
        acc.push_back(a[i]);
        shuffle_rec(a, i + 1, b, j, acc, out);
        acc.pop_back();
    }
    if (j < b.size()) {
        acc.push_back(b[j]);
        shuffle_rec(a, i, b, j + 1, acc, out);
        acc.pop_back();
    }
}

}  // namespace

WordSeries shuffle(const Word& a, const Word& b) {
    WordSeries out;
    Word acc;
    acc.reserve(a.size() + b.size());
    shuffle_rec(a, 0, b, 0, acc, out);
    return out;
}

WordSeries shuffle_product(const WordSeries& a, const WordSeries& b) {
    WordSeries out;
    for (const auto& [wa, ca] : a)
        for (const auto& [wb, cb] : b)
            for (const auto& [w, c] : shuffle(wa, wb)) out[w] += ca * cb * c;
    return out;
}

Tree chen_tree(const Word& w) {
    if (w.empty()) throw std::invalid_argument("chen_tree: empty word");
    Tree t(w.back());
    for (size_t i = w.size() - 1; i-- > 0;) t = graft(Forest(t), w[i]);
    return t;
}

WordSeries geometric_reduce(const Tree& t) {
    WordSeries sp;
    sp[Word{}] = 1;
    for (const auto& c : t.children) sp = shuffle_product(sp, geometric_reduce(c));
    WordSeries out;
    for (const auto& [w, cnt] : sp) {
        Word p;
        p.reserve(w.size() + 1);
        p.push_back(t.label);
        p.insert(p.end(), w.begin(), w.end());
        out[p] += cnt;
    }
    return out;
}

namespace {

BigRat rat_pow(const BigRat& x, int n) {
    BigRat r = 1;
    for (int i = 0; i < n; ++i) r *= x;
    return r;
}

}  // namespace

BigRat tree_binomial_defect(const Tree& t, const BigRat& a, const BigRat& b) {
    BigRat sum = 0;
    BigRat tf(tree_factorial(t));
    for (const auto& [k, v] : coproduct(t)) {
        BigRat coeff = tf / (BigRat(tree_factorial(k.first)) * BigRat(tree_factorial(k.second)));
        sum += BigRat(v) * coeff * rat_pow(a, degree(k.first)) * rat_pow(b, degree(k.second));
    }
    return rat_pow(a + b, degree(t)) - sum;
}

namespace {

double q_gamma_tree(const Tree& t, double gamma, std::map<Tree, double>& cache);

double q_gamma_forest(const Forest& f, double gamma, std::map<Tree, double>& cache) {
    double r = 1.0;
    for (const auto& t : f.trees) r *= q_gamma_tree(t, gamma, cache);
    return r;
}

double q_gamma_tree(const Tree& t, double gamma, std::map<Tree, double>& cache) {
    if (auto it = cache.find(t); it != cache.end()) return it->second;
    int m = degree(t);
    double q;
    if (m * gamma <= 1.0 + 1e-12) {
        q = 1.0;
    } else {
        double s = 0.0;
        for (const auto& [k, v] : reduced_coproduct(t))
            s += static_cast<double>(v) * q_gamma_forest(k.first, gamma, cache) *
                 q_gamma_forest(k.second, gamma, cache);
        q = s / (std::pow(2.0, gamma * m) - 2.0);
    }
    cache.emplace(t, q);
    return q;
}

}  // namespace

double q_gamma(const Forest& f, double gamma) {
    if (!(gamma > 0.0) || gamma > 1.0) throw std::invalid_argument("q_gamma: need gamma in (0,1]");
    std::map<Tree, double> cache;
    return q_gamma_forest(f, gamma, cache);
}

double q_gamma(const Tree& t, double gamma) { return q_gamma(Forest(t), gamma); }

double q_gamma_full_residual(const Tree& t, double gamma) {
    int m = degree(t);
    if (m * gamma <= 1.0 + 1e-12)
        throw std::invalid_argument("q_gamma_full_residual: tree below threshold");
    std::map<Tree, double> cache;
    double s = 0.0;
    for (const auto& [k, v] : coproduct(t))
        s += static_cast<double>(v) * q_gamma_forest(k.first, gamma, cache) *
             q_gamma_forest(k.second, gamma, cache);
    return q_gamma_tree(t, gamma, cache) - std::pow(2.0, -gamma * m) * s;
}

double neoclassical_ratio(int n, double gamma, double a, double b) {
    if (n < 0 || n > 10000) throw std::invalid_argument("neoclassical_ratio: n out of range");
    if (!(gamma > 0.0) || gamma > 1.0) throw std::invalid_argument("neoclassical_ratio: gamma in (0,1]");
    if (!(a > 0.0) || !(b > 0.0)) throw std::invalid_argument("neoclassical_ratio: need a,b > 0");
    if (n == 0) return 1.0;
    // ratio = sum_k pmf(n, k; a/(a+b))^gamma, evaluated in log space
    double lp = std::log(a) - std::log(a + b);
    double lq = std::log(b) - std::log(a + b);
    double lgn = std::lgamma(n + 1.0);
    double sum = 0.0;
    for (int k = 0; k <= n; ++k) {
        double lpmf = lgn - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0) + k * lp + (n - k) * lq;
        sum += std::exp(gamma * lpmf);
    }
    return sum;
}

BigRat neoclassical_ratio_exact(int n, const BigRat& a, const BigRat& b) {
    if (n < 0 || n > 10000) throw std::invalid_argument("neoclassical_ratio_exact: n out of range");
    BigRat num = 0;
    for (int k = 0; k <= n; ++k)
        num += BigRat(binomial(static_cast<unsigned>(n), static_cast<unsigned>(k))) *
               rat_pow(a, k) * rat_pow(b, n - k);
    return num / rat_pow(a + b, n);
}

namespace {

using Triple = std::tuple<Forest, Forest, Forest>;
using TripleSeries = std::map<Triple, BigInt>;

template <typename Copro>
TripleSeries expand_left(const TensorSeries& d, Copro&& copro) {
    TripleSeries out;
    for (const auto& [k, v] : d)
        for (const auto& [k2, v2] : copro(k.first)) {
            Triple key{k2.first, k2.second, k.second};
            BigInt& slot = out[key];
            slot += v * v2;
            if (slot == 0) out.erase(key);
        }
    return out;
}

template <typename Copro>
TripleSeries expand_right(const TensorSeries& d, Copro&& copro) {
    TripleSeries out;
    for (const auto& [k, v] : d)
        for (const auto& [k2, v2] : copro(k.second)) {
            Triple key{k.first, k2.first, k2.second};
            BigInt& slot = out[key];
            slot += v * v2;
            if (slot == 0) out.erase(key);
        }
    return out;
}

std::vector<Forest> all_forests_with_empty(int max_degree, int labels) {
    auto fs = enumerate_forests(max_degree, labels);
    fs.insert(fs.begin(), Forest{});
    return fs;
}

}  // namespace

CheckReport verify_counit(int max_degree, int labels) {
    CheckReport r;
    for (const auto& f : all_forests_with_empty(max_degree, labels)) {
        TensorSeries d = coproduct(f);
        long left_empty = 0, right_empty = 0;
        for (const auto& [k, v] : d) {
            if (k.first.empty()) {
                ++left_empty;
                if (k.second != f || v != 1) {
                    return {false, r.checked, "counit failed on left slot of " + format_forest(f)};
                }
            }
            if (k.second.empty()) {
                ++right_empty;
                if (k.first != f || v != 1) {
                    return {false, r.checked, "counit failed on right slot of " + format_forest(f)};
                }
            }
        }
        if (left_empty != 1 || right_empty != 1)
            return {false, r.checked, "primitive term count wrong for " + format_forest(f)};
        ++r.checked;
    }
    return r;
}

CheckReport verify_coassociativity(int max_degree, int labels) {
    CheckReport r;
    auto copro = [](const Forest& f) { return coproduct(f); };
    for (const auto& f : all_forests_with_empty(max_degree, labels)) {
        TensorSeries d = coproduct(f);
        if (expand_left(d, copro) != expand_right(d, copro))
            return {false, r.checked, "coassociativity failed on " + format_forest(f)};
        ++r.checked;
    }
    return r;
}

CheckReport verify_reduced_coassociativity(int max_degree, int labels) {
    CheckReport r;
    auto copro = [](const Forest& f) { return reduced_coproduct(f); };
    for (const auto& f : all_forests_with_empty(max_degree, labels)) {
        TensorSeries d = reduced_coproduct(f);
        if (expand_left(d, copro) != expand_right(d, copro))
            return {false, r.checked, "reduced coassociativity failed on " + format_forest(f)};
        ++r.checked;
    }
    return r;
}

CheckReport verify_grading(int max_degree, int labels) {
    CheckReport r;
    for (const auto& f : enumerate_forests(max_degree, labels)) {
        for (const auto& [k, v] : reduced_coproduct(f)) {
            (void)v;
            if (k.first.empty() || k.second.empty() ||
                degree(k.first) + degree(k.second) != degree(f))
                return {false, r.checked, "grading failed on " + format_forest(f)};
        }
        ++r.checked;
    }
    return r;
}

CheckReport verify_homomorphism(int max_degree, int labels) {
    CheckReport r;
    auto fs = all_forests_with_empty(max_degree, labels);
    for (const auto& f : fs)
        for (const auto& g : fs) {
            if (degree(f) + degree(g) > max_degree) continue;
            if (coproduct(merge(f, g)) != tensor_product(coproduct(f), coproduct(g)))
                return {false, r.checked,
                        "homomorphism failed on " + format_forest(f) + " * " + format_forest(g)};
            ++r.checked;
        }
    return r;
}

CheckReport verify_cuts_match_recursion(int max_degree, int labels) {
    CheckReport r;
    for (int m = 1; m <= max_degree; ++m)
        for (const auto& t : enumerate_trees(m, labels)) {
            if (coproduct_by_cuts(t) != coproduct(t))
                return {false, r.checked, "cut enumeration differs on " + format_tree(t)};
            ++r.checked;
        }
    return r;
}

CheckReport verify_hopf(int max_degree, int labels) {
    CheckReport total;
    for (auto* fn : {&verify_counit, &verify_coassociativity, &verify_reduced_coassociativity,
                     &verify_grading, &verify_homomorphism, &verify_cuts_match_recursion}) {
        CheckReport r = fn(max_degree, labels);
        total.checked += r.checked;
        if (!r.ok) {
            total.ok = false;
            total.detail = r.detail;
            return total;
        }
    }
    return total;
}

}  // namespace treerough
