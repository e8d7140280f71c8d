// Command line front end. Every subcommand reads plain files, writes tables
// or path files with a schema header, and prints one summary JSON line to
// stdout. Bad arguments and unreadable inputs exit 2, numerical failures
// exit 1 with a JSON diagnostic.
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "treerough/brp.hpp"
#include "treerough/bseries.hpp"
#include "treerough/controlled.hpp"
#include "treerough/hopf.hpp"
#include "treerough/increments.hpp"
#include "treerough/io.hpp"
#include "treerough/parallel.hpp"

using namespace treerough;
using ojson = nlohmann::ordered_json;

namespace {

std::string csv_cell(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

// Table files: "# {schema,command,config}" line, column header, data rows.
void emit_table(const std::string& path, const ojson& header,
                const std::vector<std::string>& columns,
                const std::vector<std::vector<std::string>>& rows) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << "# " << header.dump() << '\n';
    for (size_t q = 0; q < columns.size(); ++q) out << (q ? "," : "") << csv_cell(columns[q]);
    out << '\n';
    for (const auto& row : rows) {
        for (size_t q = 0; q < row.size(); ++q) out << (q ? "," : "") << csv_cell(row[q]);
        out << '\n';
    }
}

ojson table_header(const std::string& command, const ojson& config) {
    ojson h;
    h["schema"] = "treerough-table-1";
    h["command"] = command;
    h["config"] = config;
    return h;
}

void print_summary(const std::string& command, const ojson& config, ojson extra) {
    ojson s;
    s["schema"] = "treerough-run-1";
    s["command"] = command;
    s["config"] = config;
    for (auto& [k, v] : extra.items()) s[k] = v;
    std::cout << s.dump() << std::endl;
}

QuadRule rule_from(const std::string& name) {
    return name == "trapezoid" ? QuadRule::trapezoid : QuadRule::simpson;
}

ojson forest_ojson(const Forest& f) { return ojson::parse(forest_to_json(f)); }

// ---- hopf-table ------------------------------------------------------------

int run_hopf_table(int max_degree, int labels, const std::string& out) {
    auto forests = enumerate_forests(max_degree, labels);
    std::vector<std::vector<std::string>> rows;
    rows.reserve(forests.size());
    for (const Forest& f : forests) {
        ojson cop = ojson::array();
        for (const auto& [key, count] : coproduct(f))
            cop.push_back(ojson::array(
                {forest_ojson(key.first), forest_ojson(key.second), count.convert_to<long long>()}));
        rows.push_back({forest_to_json(f), std::to_string(degree(f)), tree_factorial(f).str(),
                        symmetry_factor(f).str(), cop.dump()});
    }
    ojson config{{"max-degree", max_degree}, {"labels", labels}};
    emit_table(out, table_header("hopf-table", config),
               {"forest", "degree", "tree-factorial", "symmetry", "coproduct"}, rows);
    print_summary("hopf-table", config, {{"rows", rows.size()}, {"out", out}});
    return 0;
}

// ---- verify ----------------------------------------------------------------

void push_check(ojson& checks, const std::string& name, bool ok, double value, double bound,
                long checked, const std::string& detail) {
    ojson c;
    c["name"] = name;
    c["ok"] = ok;
    if (!std::isnan(value)) c["value"] = value;
    if (!std::isnan(bound)) c["bound"] = bound;
    if (checked >= 0) c["checked"] = checked;
    if (!detail.empty()) c["detail"] = detail;
    checks.push_back(c);
}

void verify_hopf_suite(ojson& checks, int max_degree, int labels) {
    const std::pair<const char*, CheckReport (*)(int, int)> suite[] = {
        {"counit", verify_counit},
        {"coassociativity", verify_coassociativity},
        {"reduced-coassociativity", verify_reduced_coassociativity},
        {"grading", verify_grading},
        {"homomorphism", verify_homomorphism},
        {"cuts-match-recursion", verify_cuts_match_recursion},
    };
    for (const auto& [name, fn] : suite) {
        CheckReport r = fn(max_degree, labels);
        push_check(checks, std::string("hopf/") + name, r.ok, std::nan(""), std::nan(""), r.checked,
                   r.detail);
    }
}

void verify_increment_suite(ojson& checks) {
    const double mu = 1.6;
    auto grid = std::make_shared<Grid>(Grid::uniform(64, 0.0, 1.0));
    GridPath f(grid, 1);
    for (int i = 0; i <= 64; ++i) f.ref(i, 0) = std::sin(3.0 * (*grid)[i]);
    Increment2 g = coboundary1(f);
    for (int i = 1; i <= 64; ++i)
        for (int j = 0; j < i; ++j) {
            double ti = (*grid)[i], tj = (*grid)[j];
            g.ref(i, j, 0) += std::pow(ti - tj, mu) * (0.5 + 0.3 * std::cos(tj));
        }
    SewResult s = sew(g, mu);

    double recon = 0, additive = 0;
    for (int i = 1; i <= 64; ++i)
        for (int j = 0; j < i; ++j) {
            recon = std::max(recon, std::abs(s.path_part.at(i, j, 0) + s.lambda_part.at(i, j, 0) -
                                             g.at(i, j, 0)));
            additive = std::max(additive, std::abs(s.path_part.at(i, j, 0) -
                                                   s.path_part.at(i, 0, 0) + s.path_part.at(j, 0, 0)));
        }
    push_check(checks, "increments/reconstruction", recon < 1e-12, recon, 1e-12, 64 * 65 / 2, "");
    push_check(checks, "increments/path-additivity", additive < 1e-12, additive, 1e-12, -1, "");

    Increment3 hg = coboundary2(g), hl = coboundary2(s.lambda_part);
    double closure = 0;
    for (int i = 2; i <= 64; i += 3)
        for (int k = 1; k < i; k += 2)
            for (int j = 0; j < k; ++j)
                closure = std::max(closure, std::abs(hl.eval(i, k, j, 0) - hg.eval(i, k, j, 0)));
    push_check(checks, "increments/sewn-closedness", closure < 1e-10, closure, 1e-10, -1, "");

    double lnorm = holder_norm2(s.lambda_part, mu).norm;
    double bound = holder_norm3(hg, mu).norm / (std::pow(2.0, mu) - 2.0) * 1.05;
    push_check(checks, "increments/sewing-bound", lnorm <= bound, lnorm, bound, -1, "");
}

void verify_brp_suite(ojson& checks) {
    auto grid = std::make_shared<Grid>(Grid::uniform(64, 0.0, 1.0));
    SmoothDriver x = SmoothDriver::sample(grid, 2,
                                          [](double t, int a) { return a == 0 ? t : t * t / 2; });
    BranchedRoughPath X = lift_smooth(x, 2, 0.5);

    MultReport m = check_multiplicativity(X, 1);
    push_check(checks, "brp/multiplicativity", m.max_defect < 1e-8, m.max_defect, 1e-8, m.triples,
               "");

    double lvl1 = 0;
    for (int a = 0; a < 2; ++a) {
        const Increment2& v = X.value(Tree(a));
        for (int i = 1; i <= 64; ++i)
            for (int j = 0; j < i; ++j)
                lvl1 = std::max(lvl1, std::abs(v.at(i, j, 0) - (x.at(i, a) - x.at(j, a))));
    }
    push_check(checks, "brp/level-one-matches-driver", lvl1 < 1e-12, lvl1, 1e-12, -1, "");

    double chain = 0;
    const Increment2& v = X.value(Tree(0, {Tree(0)}));
    for (int i = 1; i <= 64; ++i)
        for (int j = 0; j < i; ++j) {
            double dt = (*grid)[i] - (*grid)[j];
            chain = std::max(chain, std::abs(v.at(i, j, 0) - dt * dt / 2));
        }
    push_check(checks, "brp/planted-chain-closed-form", chain < 1e-8, chain, 1e-8, -1, "");

    BranchedRoughPath X3 = extend(X, 3);
    MultReport m3 = check_multiplicativity(X3, 2);
    push_check(checks, "brp/extension-multiplicativity", m3.max_defect < 1e-8, m3.max_defect, 1e-8,
               m3.triples, "");
}

int run_verify(const std::string& suite, int max_degree, int labels, const std::string& out) {
    ojson checks = ojson::array();
    if (suite == "hopf" || suite == "all") verify_hopf_suite(checks, max_degree, labels);
    if (suite == "increments" || suite == "all") verify_increment_suite(checks);
    if (suite == "brp" || suite == "all") verify_brp_suite(checks);
    bool passed = true;
    for (const auto& c : checks) passed = passed && c.at("ok").get<bool>();

    ojson summary;
    summary["schema"] = "treerough-verify-1";
    summary["command"] = "verify";
    summary["config"] = ojson{{"suite", suite}, {"max-degree", max_degree}, {"labels", labels}};
    summary["checks"] = checks;
    summary["passed"] = passed;
    if (!out.empty()) {
        std::ofstream f(out);
        if (!f) throw std::runtime_error("cannot open for writing: " + out);
        f << summary.dump(2) << '\n';
    }
    std::cout << summary.dump() << std::endl;
    return passed ? 0 : 1;
}

// ---- lift / extend / correct ----------------------------------------------

int run_lift(const std::string& driver, int degree, double gamma, const std::string& rule,
             const std::string& out) {
    SmoothDriver x = read_driver_csv(driver, rule_from(rule));
    BranchedRoughPath X = lift_smooth(x, degree, gamma);
    write_brp(out, X);
    ojson config{{"driver", driver}, {"degree", degree}, {"gamma", gamma}, {"rule", rule}};
    print_summary("lift", config,
                  {{"out", out},
                   {"grid-points", X.grid->points()},
                   {"trees", X.tree_values.size()},
                   {"defect", X.recorded_defect}});
    return 0;
}

int run_extend(const std::string& brp, int level, const std::string& out) {
    BranchedRoughPath X = read_brp(brp);
    BranchedRoughPath Y = extend(X, level);
    write_brp(out, Y);
    ojson config{{"brp", brp}, {"level", level}};
    print_summary("extend", config,
                  {{"out", out},
                   {"trees", Y.tree_values.size()},
                   {"budget-ratio", Y.recorded_budget_ratio}});
    return 0;
}

int run_correct(const std::string& brp, const std::string& out) {
    BranchedRoughPath X = read_brp(brp);
    CorrectionResult r = correct_almost(X);
    write_brp(out, r.path);
    ojson corrections = ojson::object();
    for (const auto& [t, v] : r.correction_seminorm)
        corrections[format_tree(t)] = ojson{{"correction", v}, {"defect", r.defect_norm.at(t)}};
    ojson config{{"brp", brp}};
    print_summary("correct", config, {{"out", out}, {"corrections", corrections}});
    return 0;
}

// ---- sew -------------------------------------------------------------------

int run_sew(const std::string& input, double mu, const std::string& out_path,
            const std::string& out_lambda) {
    Increment2File f = read_increment2(input);
    SewResult s = sew(f.values, mu);
    write_increment2(out_path, s.path_part, mu);
    write_increment2(out_lambda, s.lambda_part, mu);
    ojson config{{"input", input}, {"mu", mu}};
    print_summary("sew", config,
                  {{"out-path", out_path},
                   {"out-lambda", out_lambda},
                   {"lambda-norm", holder_norm2(s.lambda_part, mu).norm},
                   {"input-max", f.values.max_abs()}});
    return 0;
}

// ---- solve-rde -------------------------------------------------------------

int run_solve_rde(const std::string& brp, const std::string& field, std::vector<double> eta,
                  double T, double tol, const std::string& out, const std::string& report) {
    auto X = std::make_shared<BranchedRoughPath>(read_brp(brp));
    VectorfieldFamily f = read_field_json(field);
    if (T < 0) T = (*X->grid)[X->grid->points() - 1];

    RdeStats stats;
    ControlledPath y = solve_rde(f, X, eta, T, tol, &stats);

    int k = f.k;
    std::vector<std::string> columns{"t"};
    for (int c = 0; c < k; ++c) columns.push_back("y" + std::to_string(c));
    for (const auto& [forest, path] : y.coeffs)
        for (int c = 0; c < k; ++c) {
            std::string name = "c[" + format_forest(forest) + "]";
            if (k > 1) name += "[" + std::to_string(c) + "]";
            columns.push_back(name);
        }
    const Grid& grid = *y.base.grid;
    std::vector<std::vector<std::string>> rows;
    for (int i = 0; i < grid.points(); ++i) {
        std::vector<std::string> row{format_double(grid[i])};
        for (int c = 0; c < k; ++c) row.push_back(format_double(y.base.at(i, c)));
        for (const auto& [forest, path] : y.coeffs)
            for (int c = 0; c < k; ++c) row.push_back(format_double(path.at(i, c)));
        rows.push_back(std::move(row));
    }
    ojson config{{"brp", brp}, {"field", field}, {"eta", eta}, {"T", T}, {"tol", tol}};
    emit_table(out, table_header("solve-rde", config), columns, rows);

    int stride = std::max(1, grid.points() / 32);
    RemainderReport rr = check_remainders(y, stride);
    ojson rep;
    rep["schema"] = "treerough-rde-report-1";
    rep["command"] = "solve-rde";
    rep["config"] = config;
    rep["residuals"] = stats.residuals;
    rep["windows"] = stats.windows;
    rep["iterations"] = stats.iterations;
    rep["check-stride"] = stride;
    rep["control-defect"] = rr.control_defect;
    rep["control2-defect"] = rr.control2_defect;
    rep["delta-sharp-defect"] = rr.delta_sharp_defect;
    rep["sharp-norm"] = rr.sharp_norm;
    if (!report.empty()) {
        std::ofstream rf(report);
        if (!rf) throw std::runtime_error("cannot open for writing: " + report);
        rf << rep.dump(2) << '\n';
    }
    ojson final_y = ojson::array();
    for (int c = 0; c < k; ++c) final_y.push_back(y.base.at(grid.points() - 1, c));
    print_summary("solve-rde", config,
                  {{"out", out},
                   {"report", report},
                   {"final", final_y},
                   {"windows", stats.windows},
                   {"iterations", stats.iterations},
                   {"delta-sharp-defect", rr.delta_sharp_defect}});
    return 0;
}

// ---- bseries-compare -------------------------------------------------------

int run_bseries_compare(const std::string& field, const std::string& driver,
                        std::vector<int> orders, int refinements, std::vector<double> eta,
                        double gamma, const std::string& rule, const std::string& out) {
    VectorfieldFamily f = read_field_json(field);
    SmoothDriver x = read_driver_csv(driver, rule_from(rule));
    if (orders.empty()) throw std::invalid_argument("bseries-compare: need at least one order");
    if (refinements < 2) throw std::invalid_argument("bseries-compare: need >= 2 refinements");
    int nmax = *std::max_element(orders.begin(), orders.end());
    if (*std::min_element(orders.begin(), orders.end()) < 1)
        throw std::invalid_argument("bseries-compare: orders must be >= 1");
    int panels = x.grid->panels();
    if (panels % (1 << (refinements - 1)) != 0)
        throw std::invalid_argument(
            "bseries-compare: panel count must be divisible by 2^(refinements-1)");
    if (f.d != x.d) throw std::invalid_argument("bseries-compare: field labels != driver columns");
    if (static_cast<int>(eta.size()) != f.k)
        throw std::invalid_argument("bseries-compare: eta size must match the state dimension");

    // reference step: one order above the largest requested, same lift
    BranchedRoughPath X = lift_smooth(x, nmax + 1, gamma);
    std::vector<std::vector<std::string>> rows;
    for (int N : orders) {
        double prev = -1;
        for (int r = 0; r < refinements; ++r) {
            int idx = panels >> r;
            std::vector<double> y1 = bseries_driven_step(f, X, eta, 0, idx, N);
            std::vector<double> yr = bseries_driven_step(f, X, eta, 0, idx, nmax + 1);
            double err = 0;
            for (int c = 0; c < f.k; ++c) err = std::max(err, std::abs(y1[c] - yr[c]));
            double h = (*X.grid)[idx] - (*X.grid)[0];
            std::string est;
            if (r > 0 && prev > 0 && err > 0) est = format_double(std::log2(prev / err));
            rows.push_back({std::to_string(N), format_double(h), format_double(err), est});
            prev = err;
        }
    }
    ojson config{{"field", field},   {"driver", driver},
                 {"orders", orders}, {"refinements", refinements},
                 {"eta", eta},       {"gamma", gamma},
                 {"rule", rule}};
    emit_table(out, table_header("bseries-compare", config),
               {"order", "h", "error", "order-estimate"}, rows);
    print_summary("bseries-compare", config, {{"out", out}, {"rows", rows.size()}});
    return 0;
}

// ---- neoclassical-sweep ----------------------------------------------------

int run_neoclassical_sweep(std::vector<double> gammas, int n_max, int ratio_grid,
                           const std::string& out) {
    if (gammas.empty()) throw std::invalid_argument("neoclassical-sweep: need a gamma grid");
    if (n_max < 0) throw std::invalid_argument("neoclassical-sweep: n-max must be >= 0");
    if (ratio_grid < 1) throw std::invalid_argument("neoclassical-sweep: ratio-grid must be >= 1");
    std::vector<double> ratios;
    for (int i = 0; i < ratio_grid; ++i)
        ratios.push_back(ratio_grid == 1
                             ? 1.0
                             : std::pow(8.0, (2.0 * i - (ratio_grid - 1)) / (ratio_grid - 1)));

    std::vector<std::vector<std::string>> rows;
    ojson sup = ojson::object();
    for (double gamma : gammas) {
        double worst = 0;
        for (int n = 0; n <= n_max; ++n)
            for (double r : ratios) {
                double v = neoclassical_ratio(n, gamma, r, 1.0);
                worst = std::max(worst, v);
                rows.push_back({format_double(gamma), std::to_string(n), format_double(r), "1",
                                format_double(v)});
            }
        sup[format_double(gamma)] = worst;
    }
    ojson config{{"gamma-grid", gammas}, {"n-max", n_max}, {"ratio-grid", ratio_grid}};
    emit_table(out, table_header("neoclassical-sweep", config), {"gamma", "n", "a", "b", "value"},
               rows);
    print_summary("neoclassical-sweep", config, {{"out", out}, {"sup", sup}});
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"branched rough path toolkit: Hopf tables, lifts, sewing, RDE solving"};
    app.require_subcommand(1);
    int threads = 0;
    app.add_option("--threads", threads, "worker threads (0 = hardware default)");

    int max_degree = 3, labels = 1, degree = 2, level = 3, refinements = 6, n_max = 200,
        ratio_grid = 5;
    double gamma = 1.0, mu = 1.5, T = -1, tol = 1e-10;
    std::string driver, brp, field, input, out, out_path, out_lambda, report, suite = "all",
                rule = "simpson";
    std::vector<double> eta, gamma_grid;
    std::vector<int> orders;

    auto* c_hopf = app.add_subcommand("hopf-table", "forest table with coproducts");
    c_hopf->add_option("--max-degree", max_degree, "largest forest degree")->check(CLI::Range(1, 8));
    c_hopf->add_option("--labels", labels, "alphabet size")->check(CLI::Range(1, 4));
    c_hopf->add_option("--out", out, "output csv")->required();

    auto* c_verify = app.add_subcommand("verify", "run invariant suites");
    c_verify->add_option("--suite", suite, "which suite")
        ->check(CLI::IsMember({"hopf", "increments", "brp", "all"}));
    c_verify->add_option("--max-degree", max_degree, "hopf check degree")->check(CLI::Range(1, 8));
    c_verify->add_option("--labels", labels, "hopf check alphabet")->check(CLI::Range(1, 4));
    c_verify->add_option("--out", out, "summary json (also printed)");

    auto* c_lift = app.add_subcommand("lift", "iterated integrals of a sampled driver");
    c_lift->add_option("--driver", driver, "driver csv")->required();
    c_lift->add_option("--degree", degree, "largest tree degree")->required()->check(CLI::Range(1, 6));
    c_lift->add_option("--gamma", gamma, "claimed Hölder exponent");
    c_lift->add_option("--rule", rule, "quadrature rule")
        ->check(CLI::IsMember({"simpson", "trapezoid"}));
    c_lift->add_option("--out", out, "rough path file")->required();

    auto* c_extend = app.add_subcommand("extend", "extend a rough path to higher degree");
    c_extend->add_option("--brp", brp, "rough path file")->required();
    c_extend->add_option("--level", level, "target degree")->required()->check(CLI::Range(1, 6));
    c_extend->add_option("--out", out, "output file")->required();

    auto* c_correct = app.add_subcommand("correct", "repair an almost multiplicative family");
    c_correct->add_option("--brp", brp, "rough path file")->required();
    c_correct->add_option("--out", out, "output file")->required();

    auto* c_sew = app.add_subcommand("sew", "split an increment into additive + sewn parts");
    c_sew->add_option("--input", input, "increment csv")->required();
    c_sew->add_option("--mu", mu, "claimed regularity, must exceed 1")->required();
    c_sew->add_option("--out-path", out_path, "additive part csv")->required();
    c_sew->add_option("--out-lambda", out_lambda, "sewn part csv")->required();

    auto* c_rde = app.add_subcommand("solve-rde", "Picard solve dy = f(y) dX");
    c_rde->add_option("--brp", brp, "driver rough path file")->required();
    c_rde->add_option("--field", field, "vector field json")->required();
    c_rde->add_option("--eta", eta, "initial state")->required()->delimiter(',');
    c_rde->add_option("--T", T, "final time (default: grid end)");
    c_rde->add_option("--tol", tol, "iterate distance tolerance");
    c_rde->add_option("--out", out, "solution csv")->required();
    c_rde->add_option("--report", report, "defect report json");

    auto* c_bs = app.add_subcommand("bseries-compare", "one-step errors against a refined step");
    c_bs->add_option("--field", field, "vector field json")->required();
    c_bs->add_option("--driver", driver, "driver csv")->required();
    c_bs->add_option("--orders", orders, "truncation orders")->required()->delimiter(',');
    c_bs->add_option("--refinements", refinements, "number of halvings")->check(CLI::Range(2, 12));
    c_bs->add_option("--eta", eta, "initial state")->required()->delimiter(',');
    c_bs->add_option("--gamma", gamma, "lift exponent");
    c_bs->add_option("--rule", rule, "quadrature rule")
        ->check(CLI::IsMember({"simpson", "trapezoid"}));
    c_bs->add_option("--out", out, "output csv")->required();

    auto* c_nc = app.add_subcommand("neoclassical-sweep", "interpolated binomial ratio table");
    c_nc->add_option("--gamma-grid", gamma_grid, "exponents")->required()->delimiter(',');
    c_nc->add_option("--n-max", n_max, "largest n")->check(CLI::Range(0, 10000));
    c_nc->add_option("--ratio-grid", ratio_grid, "number of a/b points")->check(CLI::Range(1, 64));
    c_nc->add_option("--out", out, "output csv")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    CLI::App* cmd = app.get_subcommands().front();
    auto diagnostic = [&](const char* what) {
        ojson d;
        d["schema"] = "treerough-diagnostic-1";
        d["command"] = cmd->get_name();
        d["error"] = what;
        std::cout << d.dump() << std::endl;
    };
    try {
        set_thread_count(threads);
        if (cmd == c_hopf) return run_hopf_table(max_degree, labels, out);
        if (cmd == c_verify) return run_verify(suite, max_degree, labels, out);
        if (cmd == c_lift) return run_lift(driver, degree, gamma, rule, out);
        if (cmd == c_extend) return run_extend(brp, level, out);
        if (cmd == c_correct) return run_correct(brp, out);
        if (cmd == c_sew) return run_sew(input, mu, out_path, out_lambda);
        if (cmd == c_rde) return run_solve_rde(brp, field, eta, T, tol, out, report);
        if (cmd == c_bs)
            return run_bseries_compare(field, driver, orders, refinements, eta, gamma, rule, out);
        if (cmd == c_nc) return run_neoclassical_sweep(gamma_grid, n_max, ratio_grid, out);
        return 2;
    } catch (const std::invalid_argument& e) {
        diagnostic(e.what());
        return 2;
    } catch (const std::exception& e) {
        diagnostic(e.what());
        return 1;
    }
}
