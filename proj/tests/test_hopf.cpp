#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "treerough/hopf.hpp"

using namespace treerough;

namespace {

Tree leaf(Label a = 0) { return Tree(a); }
Tree node(Label a, std::vector<Tree> cs) { return Tree(a, std::move(cs)); }
Tree lad(int m, Label a = 0) {
    Tree t = leaf(a);
    for (int i = 1; i < m; ++i) t = node(a, {t});
    return t;
}
Forest F(std::vector<Tree> ts) { return Forest(std::move(ts)); }

// Oracle: reduced coproduct through the root-peeling recursion, with the
// product rule for multi-tree forests. Entirely separate code path from the
// library's full-coproduct route.
TensorSeries dprime_oracle(const Forest& f);

TensorSeries dprime_oracle(const Tree& t) {
    TensorSeries out;
    if (t.children.empty()) return out;
    Forest below = detach_root(t);
    out[{Forest(leaf(t.label)), below}] = 1;
    for (const auto& [k, v] : dprime_oracle(below))
        out[{Forest(graft(k.first, t.label)), k.second}] += v;
    return out;
}

TensorSeries dprime_oracle(const Forest& f) {
    if (f.empty()) return {};
    if (f.single()) return dprime_oracle(f.trees.front());
    Forest rho(f.trees.front());
    Forest sigma(std::vector<Tree>(f.trees.begin() + 1, f.trees.end()));
    TensorSeries dr = dprime_oracle(rho);
    TensorSeries ds = dprime_oracle(sigma);
    auto wrap = [](const Forest& g) {
        TensorSeries w;
        w[{Forest{}, g}] = 1;
        w[{g, Forest{}}] = 1;
        return w;
    };
    TensorSeries out = tensor_product(ds, dr);
    tensor_add(out, tensor_product(wrap(sigma), dr));
    tensor_add(out, tensor_product(wrap(rho), ds));
    out[{rho, sigma}] += 1;
    out[{sigma, rho}] += 1;
    return out;
}

BigInt coeff(const TensorSeries& d, const Forest& a, const Forest& b) {
    auto it = d.find({a, b});
    return it == d.end() ? BigInt(0) : it->second;
}

}  // namespace

TEST_CASE("reduced coproduct: the seven low-degree one-label forests, term for term") {
    Tree d = leaf(), l2 = lad(2), l3 = lad(3), v2 = node(0, {leaf(), leaf()});

    CHECK(reduced_coproduct(d).empty());

    TensorSeries e2{{{F({d}), F({d})}, 1}};
    CHECK(reduced_coproduct(l2) == e2);

    TensorSeries e3{{{F({d}), F({d})}, 2}};
    CHECK(reduced_coproduct(F({d, d})) == e3);

    TensorSeries e4{{{F({l2}), F({d})}, 1}, {{F({d}), F({l2})}, 1}};
    CHECK(reduced_coproduct(l3) == e4);

    TensorSeries e5{{{F({d}), F({d, d})}, 1},
                    {{F({d, d}), F({d})}, 1},
                    {{F({l2}), F({d})}, 1},
                    {{F({d}), F({l2})}, 1}};
    CHECK(reduced_coproduct(F({d, l2})) == e5);

    TensorSeries e6{{{F({d, d}), F({d})}, 3}, {{F({d}), F({d, d})}, 3}};
    CHECK(reduced_coproduct(F({d, d, d})) == e6);

    TensorSeries e7{{{F({d}), F({d, d})}, 1}, {{F({l2}), F({d})}, 2}};
    CHECK(reduced_coproduct(v2) == e7);
}

TEST_CASE("reduced coproduct matches the root-peeling oracle") {
    for (const auto& f : enumerate_forests(6, 1)) CHECK(reduced_coproduct(f) == dprime_oracle(f));
    for (const auto& f : enumerate_forests(4, 2)) CHECK(reduced_coproduct(f) == dprime_oracle(f));
}

TEST_CASE("structural verifiers pass at the acceptance sizes") {
    for (auto [deg, labels] : {std::pair{6, 1}, std::pair{4, 2}}) {
        auto r = verify_hopf(deg, labels);
        INFO(r.detail);
        CHECK(r.ok);
        CHECK(r.checked > 0);
    }
}

TEST_CASE("cut enumeration equals the recursive coproduct, small cases by hand") {
    // single vertex: only primitives
    TensorSeries d0 = coproduct_by_cuts(leaf(1));
    CHECK(d0.size() == 2);
    CHECK(coeff(d0, Forest{}, F({leaf(1)})) == 1);
    CHECK(coeff(d0, F({leaf(1)}), Forest{}) == 1);
    // two-child root: both single cuts give the same pair, coefficient 2
    Tree v2 = node(0, {leaf(), leaf()});
    TensorSeries d2 = coproduct_by_cuts(v2);
    CHECK(coeff(d2, F({lad(2)}), F({leaf()})) == 2);
    CHECK(coeff(d2, F({leaf()}), F({leaf(), leaf()})) == 1);
}

TEST_CASE("counting functions") {
    // cutting the whole child forest off a one-vertex trunk
    for (const auto& rho : enumerate_forests(4, 2))
        for (Label a : {0, 1}) CHECK(count_reduced(Forest(graft(rho, a)), Forest(leaf(a)), rho) == 1);
    CHECK(count_reduced(lad(3), lad(2), F({leaf()})) == 1);
    CHECK(count_reduced(node(0, {leaf(), leaf()}), lad(2), F({leaf()})) == 2);
    CHECK(count_reduced(lad(3), leaf(), F({lad(2)})) == 1);
    // mismatched labels never cut
    CHECK(count_reduced(F({lad(2, 1)}), F({leaf(0)}), F({leaf(1)})) == 0);
    // empty detached forest: indicator through the tilde variant only
    CHECK(count_allowing_empty(F({lad(2)}), F({lad(2)}), Forest{}) == 1);
    CHECK(count_allowing_empty(F({lad(2)}), F({leaf()}), Forest{}) == 0);
    CHECK(count_allowing_empty(F({lad(2)}), F({leaf()}), F({leaf()})) ==
          count_reduced(F({lad(2)}), F({leaf()}), F({leaf()})));
}

TEST_CASE("shuffle") {
    WordSeries ab = shuffle({0}, {1});
    CHECK(ab == WordSeries{{{0, 1}, 1}, {{1, 0}, 1}});
    CHECK(shuffle({0}, {0}) == WordSeries{{{0, 0}, 2}});
    CHECK(shuffle({0, 1}, {0}) == WordSeries{{{0, 0, 1}, 2}, {{0, 1, 0}, 1}});
    // total count is the binomial coefficient
    std::mt19937 rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        int n = static_cast<int>(rng() % 5), m = static_cast<int>(rng() % 4);
        Word a, b;
        for (int i = 0; i < n; ++i) a.push_back(static_cast<Label>(rng() % 3));
        for (int i = 0; i < m; ++i) b.push_back(static_cast<Label>(rng() % 3));
        BigInt total = 0;
        for (const auto& [w, c] : shuffle(a, b)) {
            CHECK(w.size() == a.size() + b.size());
            total += c;
        }
        CHECK(total == binomial(static_cast<unsigned>(n + m), static_cast<unsigned>(n)));
    }
}

TEST_CASE("chen trees and the geometric word expansion") {
    CHECK(chen_tree({2}) == leaf(2));
    CHECK(chen_tree({0, 1, 2}) == node(0, {node(1, {leaf(2)})}));
    // ladders reduce to their own word
    for (const Word& w : {Word{0}, Word{1, 0}, Word{0, 1, 1}, Word{1, 0, 1, 0}}) {
        WordSeries r = geometric_reduce(chen_tree(w));
        CHECK(r == WordSeries{{w, 1}});
    }
    // branching shuffles the children words behind the root label
    CHECK(geometric_reduce(node(0, {leaf(1), leaf(2)})) ==
          WordSeries{{{0, 1, 2}, 1}, {{0, 2, 1}, 1}});
    CHECK(geometric_reduce(node(0, {leaf(), leaf()})) == WordSeries{{{0, 0, 0}, 2}});
}

TEST_CASE("tree binomial identity holds exactly, and its reduced truncation does not") {
    std::mt19937 rng(11);
    auto rnd_rat = [&rng]() {
        int num = static_cast<int>(rng() % 19) - 9;
        int den = 1 + static_cast<int>(rng() % 7);
        if (num == 0) num = 2;
        return BigRat(num, den);
    };
    for (int m = 1; m <= 7; ++m)
        for (const auto& t : enumerate_trees(m, 1)) {
            for (int trial = 0; trial < 3; ++trial)
                CHECK(tree_binomial_defect(t, rnd_rat(), rnd_rat()) == 0);
        }
    // two labels, smaller degrees
    for (int m = 1; m <= 4; ++m)
        for (const auto& t : enumerate_trees(m, 2)) CHECK(tree_binomial_defect(t, rnd_rat(), rnd_rat()) == 0);

    // sanity that the check can fail: dropping the primitive terms breaks it
    Tree l2 = lad(2);
    BigRat a(1, 2), b(1, 3), sum = 0;
    BigRat tf(tree_factorial(l2));
    for (const auto& [k, v] : reduced_coproduct(l2)) {
        sum += BigRat(v) * tf / (BigRat(tree_factorial(k.first)) * BigRat(tree_factorial(k.second))) *
               a * b;
    }
    CHECK(sum != (a + b) * (a + b));
}

TEST_CASE("holder budget weights") {
    // frozen: first tree above the gamma=0.5 threshold
    CHECK(q_gamma(lad(3), 0.5) == doctest::Approx(2.0 / (std::pow(2.0, 1.5) - 2.0)).epsilon(1e-12));
    // gamma=1: the weight is the inverse tree factorial
    for (int m = 1; m <= 6; ++m)
        for (const auto& t : enumerate_trees(m, 1)) {
            double expect = 1.0 / static_cast<double>(tree_factorial(t));
            CHECK(q_gamma(t, 1.0) == doctest::Approx(expect).epsilon(1e-10));
        }
    // multiplicative over forests
    Forest f = merge(Forest(lad(3)), Forest(lad(2)));
    CHECK(q_gamma(f, 0.4) == doctest::Approx(q_gamma(lad(3), 0.4) * q_gamma(lad(2), 0.4)).epsilon(1e-13));
    // full-coproduct form of the recursion is consistent
    for (double g : {0.3, 0.5, 0.9})
        for (int m = 1; m <= 6; ++m)
            for (const auto& t : enumerate_trees(m, 1)) {
                if (m * g <= 1.0 + 1e-12) continue;
                CHECK(std::abs(q_gamma_full_residual(t, g)) <= 1e-12);
            }
}

TEST_CASE("interpolated binomial ratio") {
    // exact rational route at gamma = 1
    CHECK(neoclassical_ratio_exact(7, BigRat(3, 2), BigRat(5, 7)) == 1);
    CHECK(neoclassical_ratio_exact(40, BigRat(1, 3), BigRat(9, 4)) == 1);
    // floating route agrees at gamma = 1
    CHECK(neoclassical_ratio(12, 1.0, 0.7, 1.9) == doctest::Approx(1.0).epsilon(1e-12));
    // n = 1 closed form: 2^(1-gamma) at a == b
    for (double g : {0.3, 0.5, 0.7})
        CHECK(neoclassical_ratio(1, g, 1.3, 1.3) == doctest::Approx(std::pow(2.0, 1.0 - g)).epsilon(1e-12));
    CHECK_THROWS_AS(neoclassical_ratio(20000, 0.5, 1.0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(neoclassical_ratio(5, 0.5, -1.0, 1.0), std::invalid_argument);
}
