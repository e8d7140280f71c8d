// Exercises the file formats and the command line binary. The binary path
// arrives as the first positional argument (wired up in CMake); everything
// runs inside ./cli_work so reruns start clean.
#define DOCTEST_CONFIG_IMPLEMENT
#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <sys/wait.h>

#include <json.hpp>

#include "treerough/brp.hpp"
#include "treerough/bseries.hpp"
#include "treerough/increments.hpp"
#include "treerough/io.hpp"

using namespace treerough;
namespace fs = std::filesystem;

static std::string g_cli;
static fs::path g_dir;

int main(int argc, char** argv) {
    std::vector<char*> args;
    args.push_back(argv[0]);
    for (int i = 1; i < argc; ++i) {
        if (g_cli.empty() && argv[i][0] != '-')
            g_cli = argv[i];
        else
            args.push_back(argv[i]);
    }
    g_dir = fs::path("cli_work");
    fs::remove_all(g_dir);
    fs::create_directories(g_dir);
    doctest::Context ctx(static_cast<int>(args.size()), args.data());
    return ctx.run();
}

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

struct RunResult {
    int code = -1;
    std::string out;
    std::string err;
};

RunResult run_cli(const std::string& args) {
    REQUIRE_MESSAGE(!g_cli.empty(), "binary path missing from argv");
    fs::path so = g_dir / "stdout.txt", se = g_dir / "stderr.txt";
    std::string cmd = g_cli + " " + args + " >" + so.string() + " 2>" + se.string();
    int raw = std::system(cmd.c_str());
    RunResult r;
    r.code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    r.out = slurp(so);
    r.err = slurp(se);
    return r;
}

std::string wp(const std::string& name) { return (g_dir / name).string(); }

// Minimal CSV row parser matching the writer: cells with commas or quotes
// are double-quoted, embedded quotes doubled.
std::vector<std::string> csv_cells(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else
                    quoted = false;
            } else
                cur += c;
        } else if (c == '"')
            quoted = true;
        else if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else
            cur += c;
    }
    out.push_back(cur);
    return out;
}

// Data rows of a table file: skips "# ..." lines and the first remaining
// line (the column header).
std::vector<std::vector<std::string>> data_rows(const fs::path& p) {
    std::ifstream in(p);
    REQUIRE(bool(in));
    std::vector<std::vector<std::string>> rows;
    std::string line;
    bool header_seen = false;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (line.rfind("# ", 0) == 0) continue;
        if (!header_seen) {
            header_seen = true;
            continue;
        }
        rows.push_back(csv_cells(line));
    }
    return rows;
}

std::string column_header(const fs::path& p) {
    std::ifstream in(p);
    std::string line;
    while (std::getline(in, line))
        if (!line.empty() && line.rfind("# ", 0) != 0) return line;
    return {};
}

GridPtr uniform_grid(int panels, double t0, double t1) {
    return std::make_shared<Grid>(Grid::uniform(panels, t0, t1));
}

}  // namespace

TEST_CASE("format_double round-trips bitwise") {
    const double corpus[] = {0.0,    1.0,   0.1,         1.0 / 3.0, 1024.5, -2.75,
                             1e300,  5e-324, 6.02214076e23, -1e-17,   M_PI,   std::nextafter(1.0, 2.0)};
    for (double v : corpus) {
        std::string s = format_double(v);
        CHECK(parse_double(s) == v);
    }
    CHECK(format_double(1.0) == "1");
    CHECK(format_double(0.5) == "0.5");
    CHECK_THROWS_AS(parse_double("12x"), std::invalid_argument);
}

TEST_CASE("driver csv round-trips bitwise") {
    auto grid = uniform_grid(16, 0.0, 2.0);
    SmoothDriver x = SmoothDriver::sample(
        grid, 2, [](double t, int a) { return a == 0 ? std::sin(t) : std::cos(3 * t) * t; });
    write_driver_csv(wp("drv.csv"), x);
    SmoothDriver y = read_driver_csv(wp("drv.csv"), QuadRule::trapezoid);
    CHECK(y.d == 2);
    CHECK(y.rule == QuadRule::trapezoid);
    REQUIRE(y.grid->points() == 17);
    for (int i = 0; i <= 16; ++i) CHECK((*y.grid)[i] == (*grid)[i]);
    REQUIRE(y.samples.size() == x.samples.size());
    for (size_t q = 0; q < x.samples.size(); ++q) CHECK(y.samples[q] == x.samples[q]);
}

TEST_CASE("increment file round-trips bitwise") {
    auto grid = uniform_grid(12, 0.0, 1.0);
    Increment2 g(grid, 2);
    for (int i = 1; i <= 12; ++i)
        for (int j = 0; j < i; ++j)
            for (int c = 0; c < 2; ++c) g.ref(i, j, c) = std::sin(3.0 * i + j) + 0.25 * c;
    write_increment2(wp("inc.csv"), g, 1.5);
    Increment2File f = read_increment2(wp("inc.csv"));
    CHECK(f.mu == 1.5);
    CHECK(f.values.dim() == 2);
    REQUIRE(f.values.grid()->points() == 13);
    for (int i = 1; i <= 12; ++i)
        for (int j = 0; j < i; ++j)
            for (int c = 0; c < 2; ++c) CHECK(f.values.at(i, j, c) == g.at(i, j, c));

    write_increment2(wp("inc2.csv"), g);
    CHECK(read_increment2(wp("inc2.csv")).mu == -1.0);
}

TEST_CASE("rough path file round-trips bitwise") {
    auto grid = uniform_grid(32, 0.0, 1.0);
    SmoothDriver x = SmoothDriver::sample(
        grid, 2, [](double t, int a) { return a == 0 ? t : t * t / 2; });
    BranchedRoughPath X = lift_smooth(x, 2, 0.5);
    write_brp(wp("X.json"), X);
    BranchedRoughPath Y = read_brp(wp("X.json"));
    CHECK(Y.gamma == X.gamma);
    CHECK(Y.level == X.level);
    CHECK(Y.alphabet == X.alphabet);
    CHECK(Y.recorded_defect == X.recorded_defect);
    CHECK(std::isnan(Y.recorded_budget_ratio));
    REQUIRE(Y.tree_values.size() == X.tree_values.size());
    for (const auto& [t, inc] : X.tree_values) {
        const Increment2& o = Y.value(t);
        for (int i = 1; i <= 32; ++i)
            for (int j = 0; j < i; ++j) CHECK(o.at(i, j, 0) == inc.at(i, j, 0));
    }
}

TEST_CASE("field json round-trips") {
    VectorfieldFamily s = VectorfieldFamily::scalar({{0.0, 1.0}, {1.0, 0.0, 2.0}});
    write_field_json(wp("fs.json"), s);
    VectorfieldFamily s2 = read_field_json(wp("fs.json"));
    CHECK(s2.k == s.k);
    CHECK(s2.d == s.d);
    CHECK(s2.f == s.f);

    VectorfieldFamily g;
    g.k = 2;
    g.d = 1;
    Poly p1{{{0, 0}, 3.0}, {{1, 1}, 1.0}};
    Poly p2{{{2, 0}, 1.0}, {{0, 1}, -0.5}};
    g.f = {{p1, p2}};
    write_field_json(wp("fg.json"), g);
    VectorfieldFamily g2 = read_field_json(wp("fg.json"));
    CHECK(g2.k == 2);
    CHECK(g2.d == 1);
    CHECK(g2.f == g.f);
}

TEST_CASE("usage errors exit 2") {
    CHECK(run_cli("").code == 2);
    CHECK(run_cli("no-such-command").code == 2);
    CHECK(run_cli("hopf-table --definitely-not-a-flag").code == 2);
    CHECK(run_cli("verify --suite bogus").code == 2);
    CHECK(run_cli("lift --driver " + wp("missing.csv") + " --degree 2 --out " + wp("o.json")).code == 2);
}

TEST_CASE("hopf-table lists the seven small forests") {
    RunResult r = run_cli("hopf-table --max-degree 3 --labels 1 --out " + wp("ht.csv"));
    CHECK(r.code == 0);
    CHECK(column_header(wp("ht.csv")) == "forest,degree,tree-factorial,symmetry,coproduct");
    auto rows = data_rows(wp("ht.csv"));
    REQUIRE(rows.size() == 7);
    // one vertex; two vertices as a pair or a cherry; three vertices four ways
    std::multiset<std::tuple<int, int, int>> got, want{
        {1, 1, 1},  // single vertex
        {2, 1, 2},  // two loose vertices: symmetry 2! = 2
        {2, 2, 1},  // vertex over vertex: factorial 2 * 1
        {3, 1, 6},  // three loose vertices: 3! = 6
        {3, 2, 1},  // vertex next to a two-chain
        {3, 3, 2},  // root with two leaves: swap symmetry
        {3, 6, 1},  // three-chain: 3 * 2 * 1
    };
    for (const auto& row : rows) {
        REQUIRE(row.size() == 5);
        got.insert({std::stoi(row[1]), std::stoi(row[2]), std::stoi(row[3])});
        CHECK(forest_to_json(forest_from_json(row[0])) == row[0]);
        auto cop = nlohmann::json::parse(row[4]);
        CHECK(cop.is_array());
        // both boundary terms of the full coproduct, each with count 1
        auto jf = nlohmann::json::parse(row[0]);
        auto empty = nlohmann::json::array();
        bool left = false, right = false;
        for (const auto& term : cop) {
            if (term[0] == jf && term[1] == empty && term[2] == 1) left = true;
            if (term[0] == empty && term[1] == jf && term[2] == 1) right = true;
        }
        CHECK(left);
        CHECK(right);
    }
    CHECK(got == want);

    RunResult r2 = run_cli("--threads 2 hopf-table --max-degree 3 --labels 1 --out " + wp("ht2.csv"));
    CHECK(r2.code == 0);
    CHECK(slurp(wp("ht.csv")) == slurp(wp("ht2.csv")));
}

TEST_CASE("verify runs the invariant suites") {
    RunResult r = run_cli("verify --suite all --max-degree 4 --labels 1 --out " + wp("verify.json"));
    CHECK(r.code == 0);
    auto j = nlohmann::json::parse(r.out);
    CHECK(j.at("passed").get<bool>());
    CHECK(j.at("checks").size() >= 10);
    for (const auto& c : j.at("checks")) CHECK(c.at("ok").get<bool>());
    auto file = nlohmann::json::parse(slurp(wp("verify.json")));
    CHECK(file.at("passed").get<bool>());
}

TEST_CASE("lift writes a deterministic rough path file") {
    SmoothDriver x = SmoothDriver::sample(uniform_grid(64, 0.0, 1.0), 1,
                                          [](double t, int) { return t; });
    write_driver_csv(wp("t.csv"), x);
    CHECK(run_cli("lift --driver " + wp("t.csv") + " --degree 2 --gamma 0.5 --out " + wp("L1.json"))
              .code == 0);
    CHECK(run_cli("--threads 2 lift --driver " + wp("t.csv") + " --degree 2 --gamma 0.5 --out " +
                  wp("L2.json"))
              .code == 0);
    CHECK(slurp(wp("L1.json")) == slurp(wp("L2.json")));

    BranchedRoughPath X = read_brp(wp("L1.json"));
    CHECK(X.level == 2);
    CHECK(X.gamma == 0.5);
    // x_t = t: the planted two-chain integrates (u - s) du = (t - s)^2 / 2
    Tree chain(0, {Tree(0)});
    const Increment2& v = X.value(chain);
    for (int i : {16, 40, 64})
        for (int j : {0, 8}) {
            double ti = (*X.grid)[i], tj = (*X.grid)[j];
            if (i <= j) continue;
            CHECK(std::abs(v.at(i, j, 0) - (ti - tj) * (ti - tj) / 2) < 1e-9);
        }
}

TEST_CASE("sew splits a file into additive and sewn parts") {
    auto grid = uniform_grid(48, 0.0, 1.0);
    GridPath f(grid, 1);
    for (int i = 0; i <= 48; ++i) f.ref(i, 0) = std::sin(3.0 * (*grid)[i]);
    Increment2 g = coboundary1(f);
    for (int i = 1; i <= 48; ++i)
        for (int j = 0; j < i; ++j) {
            double ti = (*grid)[i], tj = (*grid)[j];
            g.ref(i, j, 0) += std::pow(ti - tj, 1.6) * (0.5 + 0.3 * std::cos(tj));
        }
    write_increment2(wp("g.csv"), g);
    RunResult r = run_cli("sew --input " + wp("g.csv") + " --mu 1.6 --out-path " + wp("p.csv") +
                          " --out-lambda " + wp("l.csv"));
    CHECK(r.code == 0);
    Increment2File p = read_increment2(wp("p.csv"));
    Increment2File l = read_increment2(wp("l.csv"));
    CHECK(p.mu == 1.6);
    CHECK(l.mu == 1.6);
    double recon = 0, additive = 0;
    for (int i = 1; i <= 48; ++i)
        for (int j = 0; j < i; ++j) {
            recon = std::max(recon,
                             std::abs(p.values.at(i, j, 0) + l.values.at(i, j, 0) - g.at(i, j, 0)));
            additive = std::max(additive, std::abs(p.values.at(i, j, 0) - p.values.at(i, 0, 0) +
                                                   p.values.at(j, 0, 0)));
        }
    CHECK(recon < 1e-12);
    CHECK(additive < 1e-12);

    CHECK(run_cli("sew --input " + wp("g.csv") + " --mu 0.9 --out-path " + wp("p2.csv") +
                  " --out-lambda " + wp("l2.csv"))
              .code == 2);
}

TEST_CASE("solve-rde reproduces exponential growth through files") {
    SmoothDriver x = SmoothDriver::sample(uniform_grid(128, 0.0, 1.0), 1,
                                          [](double t, int) { return t; });
    write_driver_csv(wp("t128.csv"), x);
    REQUIRE(run_cli("lift --driver " + wp("t128.csv") + " --degree 2 --gamma 0.45 --out " +
                    wp("X128.json"))
                .code == 0);
    write_field_json(wp("lin.json"), VectorfieldFamily::scalar({{0.0, 1.0}}));

    RunResult r = run_cli("solve-rde --brp " + wp("X128.json") + " --field " + wp("lin.json") +
                          " --eta 0.7 --out " + wp("sol.csv") + " --report " + wp("rep.json"));
    CHECK(r.code == 0);
    auto rows = data_rows(wp("sol.csv"));
    REQUIRE(rows.size() == 129);
    const auto& last = rows.back();
    CHECK(parse_double(last[0]) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(parse_double(last[1]) - 0.7 * std::exp(1.0)) < 5e-4);

    auto rep = nlohmann::json::parse(slurp(wp("rep.json")));
    CHECK(rep.at("residuals").size() >= 1);
    CHECK(rep.at("windows").get<int>() >= 1);
    CHECK(rep.at("delta-sharp-defect").get<double>() < 1e-8);

    RunResult r2 = run_cli("--threads 2 solve-rde --brp " + wp("X128.json") + " --field " +
                           wp("lin.json") + " --eta 0.7 --out " + wp("sol2.csv") + " --report " +
                           wp("rep2.json"));
    CHECK(r2.code == 0);
    CHECK(slurp(wp("sol.csv")) == slurp(wp("sol2.csv")));
}

TEST_CASE("solve-rde reports blowup as a numerical failure") {
    write_field_json(wp("sq.json"), VectorfieldFamily::scalar({{0.0, 0.0, 1.0}}));
    RunResult r = run_cli("solve-rde --brp " + wp("X128.json") + " --field " + wp("sq.json") +
                          " --eta 5 --out " + wp("blow.csv") + " --report " + wp("blow.json"));
    CHECK(r.code == 1);
    auto j = nlohmann::json::parse(r.out);
    CHECK(j.at("error").get<std::string>().size() > 0);
}

TEST_CASE("extend and correct round through files") {
    REQUIRE(fs::exists(wp("X128.json")));
    RunResult r = run_cli("extend --brp " + wp("X128.json") + " --level 3 --out " + wp("X3.json"));
    CHECK(r.code == 0);
    BranchedRoughPath X3 = read_brp(wp("X3.json"));
    CHECK(X3.level == 3);
    CHECK(X3.tree_values.size() == 4);  // vertex, chain-2, cherry, chain-3
    CHECK(check_multiplicativity(X3, 4).max_defect < 1e-6);

    RunResult rc = run_cli("correct --brp " + wp("X3.json") + " --out " + wp("Xc.json"));
    CHECK(rc.code == 0);
    BranchedRoughPath Xc = read_brp(wp("Xc.json"));
    CHECK(Xc.level == 3);
    double diff = 0;
    for (const auto& [t, inc] : X3.tree_values) {
        const Increment2& o = Xc.value(t);
        for (int i = 1; i < X3.grid->points(); ++i)
            for (int j = 0; j < i; ++j) diff = std::max(diff, std::abs(o.at(i, j, 0) - inc.at(i, j, 0)));
    }
    CHECK(diff < 1e-6);  // input already satisfied the relation
}

TEST_CASE("bseries-compare estimates the classical orders") {
    SmoothDriver x = SmoothDriver::sample(uniform_grid(64, 0.0, 1.0), 1,
                                          [](double t, int) { return t; });
    write_driver_csv(wp("t64.csv"), x);
    write_field_json(wp("lin1.json"), VectorfieldFamily::scalar({{0.0, 1.0}}));
    RunResult r = run_cli("bseries-compare --field " + wp("lin1.json") + " --driver " +
                          wp("t64.csv") + " --orders 1,2 --refinements 4 --eta 1 --out " +
                          wp("bs.csv"));
    CHECK(r.code == 0);
    CHECK(column_header(wp("bs.csv")) == "order,h,error,order-estimate");
    auto rows = data_rows(wp("bs.csv"));
    REQUIRE(rows.size() == 8);
    // last estimate within each order group sits near the classical slope N+1
    for (size_t q = 0; q < rows.size(); ++q) {
        int order = std::stoi(rows[q][0]);
        bool group_last = q + 1 == rows.size() || std::stoi(rows[q + 1][0]) != order;
        if (!group_last) continue;
        double est = parse_double(rows[q][3]);
        CHECK(std::abs(est - (order + 1)) < 0.6);
    }
}

TEST_CASE("neoclassical-sweep is flat at exponent one") {
    RunResult r = run_cli("neoclassical-sweep --gamma-grid 1.0 --n-max 6 --ratio-grid 3 --out " +
                          wp("nc.csv"));
    CHECK(r.code == 0);
    CHECK(column_header(wp("nc.csv")) == "gamma,n,a,b,value");
    auto rows = data_rows(wp("nc.csv"));
    REQUIRE(rows.size() == 21);  // 7 n-values, 3 ratios
    for (const auto& row : rows) CHECK(parse_double(row[4]) == doctest::Approx(1.0).epsilon(1e-9));
}
