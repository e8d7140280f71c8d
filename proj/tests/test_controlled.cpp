#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <memory>
#include <vector>

#include "treerough/bseries.hpp"
#include "treerough/brp.hpp"
#include "treerough/controlled.hpp"
#include "treerough/hopf.hpp"
#include "treerough/tree.hpp"

using namespace treerough;

namespace {

Tree leaf(int a = 0) { return Tree(a); }
Tree node(int a, std::vector<Tree> ch) { return Tree(a, std::move(ch)); }
Forest F(std::vector<Tree> ts) { return Forest{std::move(ts)}; }

GridPtr unit_grid(int panels, double t1 = 1.0) {
    return std::make_shared<Grid>(Grid::uniform(panels, 0.0, t1));
}

// closed-form lift of x_a(t) = t for every label: X^tau = (t-s)^{|tau|}/tau!
std::shared_ptr<BranchedRoughPath> exact_identity(GridPtr g, int level, double gamma, int alphabet = 1) {
    auto X = std::make_shared<BranchedRoughPath>();
    X->gamma = gamma;
    X->level = level;
    X->alphabet = alphabet;
    X->grid = g;
    int P = g->points();
    for (int m = 1; m <= level; ++m) {
        for (const auto& t : enumerate_trees(m, alphabet)) {
            Increment2 v(g, 1);
            double tf = BigRat(tree_factorial(t)).convert_to<double>();
            for (int i = 1; i < P; ++i)
                for (int j = 0; j < i; ++j) v.ref(i, j) = std::pow((*g)[i] - (*g)[j], m) / tf;
            X->tree_values.emplace(t, std::move(v));
        }
    }
    return X;
}

std::shared_ptr<BranchedRoughPath> smooth_lift(GridPtr g, int d, const std::function<double(double, int)>& fn,
                                               int level, double gamma) {
    auto x = SmoothDriver::sample(g, d, fn);
    return std::make_shared<BranchedRoughPath>(lift_smooth(x, level, gamma));
}

double rk4(const std::function<double(double, double)>& g, double y0, double t0, double t1, int steps) {
    double h = (t1 - t0) / steps;
    double y = y0;
    for (int i = 0; i < steps; ++i) {
        double t = t0 + i * h;
        double k1 = g(t, y);
        double k2 = g(t + h / 2, y + h / 2 * k1);
        double k3 = g(t + h / 2, y + h / 2 * k2);
        double k4 = g(t + h, y + h * k3);
        y += h / 6 * (k1 + 2 * k2 + 2 * k3 + k4);
    }
    return y;
}

double fit_slope(const std::vector<double>& xs, const std::vector<double>& ys) {
    double n = static_cast<double>(xs.size());
    double mx = 0, my = 0;
    for (size_t i = 0; i < xs.size(); ++i) { mx += xs[i]; my += ys[i]; }
    mx /= n;
    my /= n;
    double num = 0, den = 0;
    for (size_t i = 0; i < xs.size(); ++i) {
        num += (xs[i] - mx) * (ys[i] - my);
        den += (xs[i] - mx) * (xs[i] - mx);
    }
    return num / den;
}

}  // namespace

TEST_CASE("constant controlled path") {
    auto X = exact_identity(unit_grid(16), 3, 0.3);
    auto y = controlled_constant(X, {1.25, -0.5}, 0.3);
    CHECK(y.base.dim == 2);
    CHECK(controlled_norm(y) == doctest::Approx(std::sqrt(1.25 * 1.25 + 0.25)));
    auto rep = check_remainders(y);
    CHECK(rep.control_defect == 0.0);
    CHECK(rep.control2_defect == 0.0);
    CHECK(rep.delta_sharp_defect == 0.0);
    CHECK(rep.sharp_norm == 0.0);

    CHECK_THROWS_AS((void)controlled_constant(X, {1.0}, 0.2), std::invalid_argument);  // kappa <= 1/(n+1)
    CHECK_THROWS_AS((void)controlled_constant(X, {1.0}, 0.5), std::invalid_argument);  // kappa > gamma
}

TEST_CASE("driver as a controlled path; norm homogeneity") {
    int M = 64;
    auto g = unit_grid(M);
    auto X = smooth_lift(g, 1, [](double t, int) { return t; }, 3, 0.3);
    auto y = controlled_driver(X, 0.3);
    CHECK(y.base.dim == 1);
    CHECK(y.base.at(M) == doctest::Approx(1.0));
    CHECK(y.coeffs.at(F({leaf()})).at(7) == 1.0);

    // degree-1 values of a lift are exact sampled increments, so the control
    // remainder vanishes identically
    auto rep = check_remainders(y);
    CHECK(rep.control_defect <= 1e-15);
    CHECK(rep.control2_defect <= 1e-15);
    CHECK(rep.delta_sharp_defect <= 1e-13);
    CHECK(controlled_norm(y) == doctest::Approx(0.0).epsilon(1e-12));  // y_0 = 0, all remainders 0

    // homogeneity: scaling base and coefficients scales the norm
    GridPath base(g, 1), cy(g, 1);
    for (int i = 0; i <= M; ++i) {
        double t = (*g)[i];
        base.ref(i) = t * t;
        cy.ref(i) = t;
    }
    std::map<Forest, GridPath> coeffs{{F({leaf()}), cy}};
    auto y1 = controlled_from_coeffs(X, base, coeffs, 0.3);
    GridPath base3 = base, cy3 = cy;
    for (auto& v : base3.v) v *= 3.0;
    for (auto& v : cy3.v) v *= 3.0;
    auto y3 = controlled_from_coeffs(X, base3, {{F({leaf()}), cy3}}, 0.3);
    double n1 = controlled_norm(y1);
    CHECK(n1 > 0.1);
    CHECK(controlled_norm(y3) == doctest::Approx(3.0 * n1).epsilon(1e-12));
}

TEST_CASE("ledger identity on exactly constructed paths") {
    int M = 64;
    auto g = unit_grid(M);
    auto X = exact_identity(g, 3, 0.3);
    GridPath base(g, 1), cy(g, 1);
    for (int i = 0; i <= M; ++i) {
        double t = (*g)[i];
        base.ref(i) = t * t;
        cy.ref(i) = 2 * t;
    }
    auto y = controlled_from_coeffs(X, base, {{F({leaf()}), cy}}, 0.3);
    auto rep = check_remainders(y);
    // delta y-sharp == sum X^f (x) y^{f,sharp} is algebra, not quadrature
    CHECK(rep.delta_sharp_defect <= 1e-10);
    CHECK(rep.control_defect <= 1e-15);
    CHECK(rep.control2_defect <= 1e-15);
    CHECK(std::isfinite(rep.sharp_norm));
    for (const auto& [f, nrm] : rep.coeff_sharp_norms) CHECK(std::isfinite(nrm));
}

TEST_CASE("coefficient relation table, degree-4 structure") {
    // the chained relations group as
    //   delta y^. = X^.(y^[.] + 2 y^..) + ... : counts from the reduced coproduct
    Tree l = leaf();
    Forest dot = F({l});
    Forest lad2 = F({Tree(0, {l})});
    Forest pair2 = F({l, l});
    CHECK(count_reduced(lad2, dot, dot) == 1);
    CHECK(count_reduced(pair2, dot, dot) == 2);
    Forest cherry = F({node(0, {l, l})});
    Forest lad3 = F({node(0, {Tree(0, {l})})});
    Forest mixed = F({l, Tree(0, {l})});
    CHECK(count_reduced(cherry, dot, pair2) == 1);      // prune both leaves of [..]
    CHECK(count_reduced(cherry, lad2, dot) == 2);       // prune one leaf
    CHECK(count_reduced(lad3, lad2, dot) == 1);
    CHECK(count_reduced(lad3, dot, lad2) == 1);
    CHECK(count_reduced(mixed, lad2, dot) == 1);
    CHECK(count_reduced(mixed, dot, lad2) == 1);
    CHECK(count_reduced(mixed, pair2, dot) == 1);
    CHECK(count_reduced(mixed, dot, pair2) == 1);       // lone vertex detaches, [.] cut at the root
}

TEST_CASE("composition with smooth maps") {
    int M = 32;
    auto g = unit_grid(M);
    auto X = exact_identity(g, 4, 0.25);
    int n = holder_truncation(0.25);
    REQUIRE(n == 4);

    // scalar controlled path with nonzero coefficients on every stored forest
    GridPath base(g, 1);
    std::map<Forest, GridPath> coeffs;
    for (int i = 0; i <= M; ++i) base.ref(i) = 0.2 + 0.5 * (*g)[i];
    int which = 0;
    for (const auto& f : enumerate_forests(n - 1, 1)) {
        GridPath c(g, 1);
        for (int i = 0; i <= M; ++i) c.ref(i) = 0.1 + 0.15 * which + 0.3 * (*g)[i] * ((which % 2) ? 1.0 : -1.0);
        coeffs.emplace(f, std::move(c));
        ++which;
    }
    auto y = controlled_from_coeffs(X, base, coeffs, 0.25);

    SUBCASE("identity map returns the same ledger") {
        auto z = compose_smooth({poly_univariate({0.0, 1.0})}, y);
        for (int i = 0; i <= M; ++i) CHECK(z.base.at(i) == doctest::Approx(y.base.at(i)));
        for (const auto& [f, c] : y.coeffs)
            for (int i = 0; i <= M; ++i) CHECK(z.coeffs.at(f).at(i) == doctest::Approx(c.at(i)));
    }

    SUBCASE("affine map scales coefficients") {
        auto z = compose_smooth({poly_univariate({1.0, 3.0})}, y);
        for (int i = 0; i <= M; ++i) CHECK(z.base.at(i) == doctest::Approx(1.0 + 3.0 * y.base.at(i)));
        for (const auto& [f, c] : y.coeffs)
            for (int i = 0; i <= M; ++i) CHECK(z.coeffs.at(f).at(i) == doctest::Approx(3.0 * c.at(i)));
    }

    SUBCASE("square map: ordered forest factorizations") {
        auto z = compose_smooth({poly_univariate({0.0, 0.0, 1.0})}, y);
        auto yv = [&](const Forest& f, int i) { return y.coeffs.at(f).at(i); };
        Forest dot = F({leaf()});
        Forest lad2 = F({node(0, {leaf()})});
        Forest pair2 = F({leaf(), leaf()});
        Forest mixed = F({leaf(), node(0, {leaf()})});
        Forest trip = F({leaf(), leaf(), leaf()});
        for (int i = 0; i <= M; ++i) {
            double b = y.base.at(i);
            CHECK(z.base.at(i) == doctest::Approx(b * b));
            CHECK(z.coeffs.at(dot).at(i) == doctest::Approx(2 * b * yv(dot, i)));
            CHECK(z.coeffs.at(lad2).at(i) == doctest::Approx(2 * b * yv(lad2, i)));
            CHECK(z.coeffs.at(pair2).at(i) ==
                  doctest::Approx(2 * b * yv(pair2, i) + yv(dot, i) * yv(dot, i)));
            CHECK(z.coeffs.at(mixed).at(i) ==
                  doctest::Approx(2 * b * yv(mixed, i) + 2 * yv(dot, i) * yv(lad2, i)));
            CHECK(z.coeffs.at(trip).at(i) ==
                  doctest::Approx(2 * b * yv(trip, i) + 2 * yv(dot, i) * yv(pair2, i)));
        }
    }

    SUBCASE("cube map exercises the third-order term") {
        auto z = compose_smooth({poly_univariate({0.0, 0.0, 0.0, 1.0})}, y);
        auto yv = [&](const Forest& f, int i) { return y.coeffs.at(f).at(i); };
        Forest dot = F({leaf()});
        Forest pair2 = F({leaf(), leaf()});
        Forest trip = F({leaf(), leaf(), leaf()});
        for (int i = 0; i <= M; ++i) {
            double b = y.base.at(i);
            double d1 = yv(dot, i);
            CHECK(z.coeffs.at(trip).at(i) ==
                  doctest::Approx(3 * b * b * yv(trip, i) + 6 * b * d1 * yv(pair2, i) + d1 * d1 * d1));
        }
    }

    SUBCASE("wrong arity throws") {
        Poly bivar{{{1, 1}, 1.0}};
        CHECK_THROWS_AS((void)compose_smooth({bivar}, y), std::invalid_argument);
    }
}

TEST_CASE("integral of a constant path") {
    int M = 32;
    auto g = unit_grid(M);
    auto X = exact_identity(g, 2, 0.45);
    auto one = controlled_constant(X, {1.0}, 0.45);
    auto z = rough_integrate(*X, 0, one);
    for (int i = 0; i <= M; ++i) CHECK(z.base.at(i) == doctest::Approx((*g)[i]).epsilon(1e-14));
    // integration grafts the integrand under a new root: z^{._a} = y, everything else zero
    for (int i = 0; i <= M; ++i) CHECK(z.coeffs.at(F({leaf()})).at(i) == 1.0);
    auto rep = check_remainders(z);
    CHECK(rep.control_defect <= 1e-14);
    CHECK(rep.delta_sharp_defect <= 1e-13);

    auto Xs = exact_identity(g, 1, 0.45);
    CHECK_THROWS_AS((void)rough_integrate(*Xs, 0, controlled_constant(Xs, {1.0}, 0.45)),
                    std::invalid_argument);  // level < n
}

TEST_CASE("integral of x^2 dx against the identity driver") {
    auto run = [](int M) {
        auto g = unit_grid(M);
        auto X = smooth_lift(g, 1, [](double t, int) { return t; }, 2, 0.45);
        auto y = compose_smooth({poly_univariate({0.0, 0.0, 1.0})}, controlled_driver(X, 0.45));
        auto z = rough_integrate(*X, 0, y);
        double worst = 0;
        for (int i = 0; i <= M; ++i) {
            double t = (*g)[i];
            worst = std::max(worst, std::abs(z.base.at(i) - t * t * t / 3.0));
        }
        return worst;
    };
    double e128 = run(128), e256 = run(256);
    CHECK(e256 <= 1e-5);
    CHECK(e128 / e256 == doctest::Approx(4.0).epsilon(0.3));  // second-order germ sum

    // structural law: z^{._a} equals the integrand path
    int M = 64;
    auto g = unit_grid(M);
    auto X = smooth_lift(g, 1, [](double t, int) { return t; }, 2, 0.45);
    auto y = compose_smooth({poly_univariate({0.0, 0.0, 1.0})}, controlled_driver(X, 0.45));
    auto z = rough_integrate(*X, 0, y);
    for (int i = 0; i <= M; ++i) CHECK(z.coeffs.at(F({leaf()})).at(i) == doctest::Approx(y.base.at(i)));
    auto rep = check_remainders(z);
    CHECK(rep.delta_sharp_defect <= 1e-12);
    CHECK(std::isfinite(rep.sharp_norm));
}

TEST_CASE("level-2 perturbation shifts the integral by c*t") {
    int M = 128;
    auto g = unit_grid(M);
    auto x = SmoothDriver::sample(g, 1, [](double t, int) { return t; });
    auto Xg = std::make_shared<BranchedRoughPath>(lift_smooth(x, 2, 0.5));
    auto Xi = std::make_shared<BranchedRoughPath>(ito_level2(x, 0.3, 0.5));

    auto zg = rough_integrate(*Xg, 0, controlled_driver(Xg, 0.5));
    auto zi = rough_integrate(*Xi, 0, controlled_driver(Xi, 0.5));
    for (int i = 0; i <= M; ++i) {
        double want = 0.3 * (*g)[i];
        CHECK(zi.base.at(i) - zg.base.at(i) == doctest::Approx(want).epsilon(1e-12));
    }
}

TEST_CASE("rde: zero field is constant, linear field is exponential") {
    auto g = unit_grid(1024);
    auto X = smooth_lift(g, 1, [](double t, int) { return t; }, 3, 0.3);

    auto zero = VectorfieldFamily::scalar({{0.0}});
    auto yz = solve_rde(zero, X, {0.7}, 1.0);
    for (int i = 0; i <= 1024; ++i) CHECK(yz.base.at(i) == doctest::Approx(0.7));

    auto lin = VectorfieldFamily::scalar({{0.0, 1.0}});
    RdeStats stats;
    auto y = solve_rde(lin, X, {0.7}, 1.0, 1e-10, &stats);
    double worst = 0;
    for (int i = 0; i <= 1024; ++i)
        worst = std::max(worst, std::abs(y.base.at(i) - 0.7 * std::exp((*g)[i])));
    CHECK(worst <= 1e-6);

    // Picard residuals decay geometrically once the iteration settles
    REQUIRE(stats.residuals.size() >= 3);
    size_t q = stats.residuals.size();
    CHECK(stats.residuals[q - 1] < stats.residuals[q - 2]);
    CHECK(stats.residuals[q - 2] < stats.residuals[q - 3]);

    auto rep = check_remainders(y, 8);
    CHECK(rep.delta_sharp_defect <= 1e-9);
    CHECK(std::isfinite(rep.sharp_norm));
}

TEST_CASE("rde: two drivers against a classical solve") {
    auto f = VectorfieldFamily::scalar({{0.0, 0.6}, {0.5, 0.25}});
    auto ode = [](double t, double y) { return 0.6 * y + std::cos(t) * (0.5 + 0.25 * y); };
    double ref = rk4(ode, 0.4, 0.0, 1.0, 4096);

    std::vector<double> lh, le;
    for (int M : {32, 64, 128, 256}) {
        auto g = unit_grid(M);
        auto X = smooth_lift(g, 2, [](double t, int a) { return a == 0 ? t : std::sin(t); }, 3, 0.3);
        auto y = solve_rde(f, X, {0.4}, 1.0);
        double err = std::abs(y.base.at(M) - ref);
        lh.push_back(std::log(1.0 / M));
        le.push_back(std::log(err));
    }
    CHECK(std::exp(le.back()) <= 1e-4);
    CHECK(fit_slope(lh, le) >= 1.0);
}

TEST_CASE("lifting a constant identity matrix reproduces the rough path") {
    int M = 48;
    auto g = unit_grid(M);
    auto X = exact_identity(g, 2, 0.45, 2);
    // y in R^{k*d} with k = d = 2: component (a,b) = delta_ab, layout a*k+b
    auto y = controlled_constant(X, {1.0, 0.0, 0.0, 1.0}, 0.45);
    auto Y = lift_controlled(y);
    CHECK(Y.alphabet == 2);
    CHECK(Y.level == 2);
    double worst = 0;
    for (const auto& [t, v] : Y.tree_values) {
        const auto& ref = X->value(t);
        for (int i = 1; i <= M; ++i)
            for (int j = 0; j < i; ++j) worst = std::max(worst, std::abs(v.at(i, j) - ref.at(i, j)));
    }
    CHECK(worst <= 1e-10);
}

TEST_CASE("lifting a smooth integrand matches the smooth lift of the integral") {
    int M = 96;
    auto g = unit_grid(M);
    auto X = smooth_lift(g, 1, [](double t, int) { return t; }, 3, 1.0 / 3);
    auto y = compose_smooth({poly_univariate({0.0, 0.0, 1.0})}, controlled_driver(X, 1.0 / 3));
    auto Y = lift_controlled(y);

    auto ref = lift_smooth(SmoothDriver::sample(g, 1, [](double t, int) { return t * t * t / 3.0; }), 3, 1.0);
    double worst = 0;
    for (const auto& [t, v] : Y.tree_values) {
        const auto& rv = ref.value(t);
        for (int i = 1; i <= M; ++i)
            for (int j = 0; j < i; ++j) worst = std::max(worst, std::abs(v.at(i, j) - rv.at(i, j)));
    }
    INFO("sup deviation from the smooth lift: " << worst);
    CHECK(worst <= 2e-4);

    auto mult = check_multiplicativity(Y, 2);
    INFO("multiplicativity defect " << mult.max_defect);
    CHECK(mult.max_defect <= 1e-6);
}
