#include "treerough/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <system_error>

#include <json.hpp>

namespace treerough {

using ordered_json = nlohmann::ordered_json;

std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

double parse_double(const std::string& s) {
    double v = 0;
    auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw std::invalid_argument("bad numeric cell: '" + s + "'");
    return v;
}

namespace {

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    return out;
}

std::ifstream open_in(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open: " + path);
    return in;
}

std::vector<std::string> split_cells(const std::string& line) {
    std::vector<std::string> out;
    size_t start = 0;
    while (true) {
        size_t comma = line.find(',', start);
        if (comma == std::string::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
}

// Reads lines, dropping a trailing '\r' so files edited on other platforms
// still parse.
bool next_line(std::istream& in, std::string& line) {
    if (!std::getline(in, line)) return false;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
}

ordered_json grid_json(const Grid& g) {
    ordered_json arr = ordered_json::array();
    for (double t : g.times()) arr.push_back(t);
    return arr;
}

GridPtr grid_from_json(const ordered_json& arr) {
    std::vector<double> times;
    for (const auto& v : arr) times.push_back(v.get<double>());
    return std::make_shared<Grid>(std::move(times));
}

// null <-> NaN for the recorded diagnostics, null <-> -1 for mu.
ordered_json opt_json(double v, double missing) {
    if (std::isnan(v) || v == missing) return nullptr;
    return v;
}

double opt_from_json(const ordered_json& j, double missing) {
    return j.is_null() ? missing : j.get<double>();
}

ordered_json parse_header(const std::string& line, const std::string& schema,
                          const std::string& path) {
    if (line.rfind("# ", 0) != 0)
        throw std::invalid_argument(path + ": missing '# {...}' header line");
    ordered_json h = ordered_json::parse(line.substr(2), nullptr, false);
    if (h.is_discarded() || !h.is_object())
        throw std::invalid_argument(path + ": malformed header JSON");
    if (h.value("schema", std::string()) != schema)
        throw std::invalid_argument(path + ": expected schema '" + schema + "'");
    return h;
}

void write_pair_rows(std::ostream& out, const Increment2& g) {
    int points = g.grid()->points();
    for (int i = 1; i < points; ++i)
        for (int j = 0; j < i; ++j) {
            out << i << ',' << j;
            for (int c = 0; c < g.dim(); ++c) out << ',' << format_double(g.at(i, j, c));
            out << '\n';
        }
}

void read_pair_rows(std::istream& in, const std::string& path, Increment2& g) {
    std::string line;
    long expect = static_cast<long>(g.grid()->points()) * (g.grid()->points() - 1) / 2;
    long seen = 0;
    while (seen < expect && next_line(in, line)) {
        if (line.empty()) continue;
        auto cells = split_cells(line);
        if (static_cast<int>(cells.size()) != 2 + g.dim())
            throw std::invalid_argument(path + ": row with wrong arity: '" + line + "'");
        int i = std::stoi(cells[0]);
        int j = std::stoi(cells[1]);
        for (int c = 0; c < g.dim(); ++c) g.ref(i, j, c) = parse_double(cells[2 + c]);
        ++seen;
    }
    if (seen < expect) throw std::invalid_argument(path + ": truncated increment block");
}

ordered_json poly_to_json(const Poly& p) {
    ordered_json terms = ordered_json::array();
    for (const auto& [expo, coeff] : p) {
        ordered_json term;
        term["e"] = expo;
        term["c"] = coeff;
        terms.push_back(term);
    }
    return terms;
}

Poly poly_from_json(const ordered_json& terms, int k, const std::string& path) {
    Poly p;
    for (const auto& term : terms) {
        std::vector<int> expo = term.at("e").get<std::vector<int>>();
        if (static_cast<int>(expo.size()) != k)
            throw std::invalid_argument(path + ": exponent arity does not match k");
        p[expo] += term.at("c").get<double>();
    }
    return p;
}

}  // namespace

void write_driver_csv(const std::string& path, const SmoothDriver& x) {
    auto out = open_out(path);
    out << 't';
    for (int a = 0; a < x.d; ++a) out << ",x" << a;
    out << '\n';
    for (int i = 0; i < x.grid->points(); ++i) {
        out << format_double((*x.grid)[i]);
        for (int a = 0; a < x.d; ++a) out << ',' << format_double(x.at(i, a));
        out << '\n';
    }
}

SmoothDriver read_driver_csv(const std::string& path, QuadRule rule) {
    auto in = open_in(path);
    std::string line;
    if (!next_line(in, line) || line.rfind("t,", 0) != 0)
        throw std::invalid_argument(path + ": expected a 't,x0,...' header");
    int d = static_cast<int>(split_cells(line).size()) - 1;
    if (d < 1) throw std::invalid_argument(path + ": no component columns");
    std::vector<double> times, samples;
    while (next_line(in, line)) {
        if (line.empty()) continue;
        auto cells = split_cells(line);
        if (static_cast<int>(cells.size()) != d + 1)
            throw std::invalid_argument(path + ": row with wrong arity: '" + line + "'");
        times.push_back(parse_double(cells[0]));
        for (int a = 0; a < d; ++a) samples.push_back(parse_double(cells[1 + a]));
    }
    SmoothDriver x;
    x.grid = std::make_shared<Grid>(std::move(times));
    x.d = d;
    x.rule = rule;
    x.samples = std::move(samples);
    return x;
}

void write_increment2(const std::string& path, const Increment2& g, double mu) {
    auto out = open_out(path);
    ordered_json h;
    h["schema"] = "treerough-increment2-1";
    h["dim"] = g.dim();
    h["mu"] = opt_json(mu, -1.0);
    h["grid"] = grid_json(*g.grid());
    out << "# " << h.dump() << '\n';
    out << "i,j";
    for (int c = 0; c < g.dim(); ++c) out << ",v" << c;
    out << '\n';
    write_pair_rows(out, g);
}

Increment2File read_increment2(const std::string& path) {
    auto in = open_in(path);
    std::string line;
    if (!next_line(in, line)) throw std::invalid_argument(path + ": empty file");
    ordered_json h = parse_header(line, "treerough-increment2-1", path);
    GridPtr grid = grid_from_json(h.at("grid"));
    Increment2File out{Increment2(grid, h.at("dim").get<int>()), opt_from_json(h.at("mu"), -1.0)};
    if (!next_line(in, line) || line.rfind("i,j", 0) != 0)
        throw std::invalid_argument(path + ": expected an 'i,j,v0,...' header");
    read_pair_rows(in, path, out.values);
    return out;
}

void write_brp(const std::string& path, const BranchedRoughPath& X) {
    auto out = open_out(path);
    ordered_json h;
    h["schema"] = "treerough-brp-1";
    h["gamma"] = X.gamma;
    h["level"] = X.level;
    h["alphabet"] = X.alphabet;
    h["defect"] = opt_json(X.recorded_defect, std::nan(""));
    h["budget_ratio"] = opt_json(X.recorded_budget_ratio, std::nan(""));
    h["grid"] = grid_json(*X.grid);
    out << "# " << h.dump() << '\n';
    for (const auto& [tree, inc] : X.tree_values) {
        out << "# tree " << tree_to_json(tree) << '\n';
        write_pair_rows(out, inc);
    }
}

BranchedRoughPath read_brp(const std::string& path) {
    auto in = open_in(path);
    std::string line;
    if (!next_line(in, line)) throw std::invalid_argument(path + ": empty file");
    ordered_json h = parse_header(line, "treerough-brp-1", path);
    BranchedRoughPath X;
    X.gamma = h.at("gamma").get<double>();
    X.level = h.at("level").get<int>();
    X.alphabet = h.at("alphabet").get<int>();
    X.recorded_defect = opt_from_json(h.at("defect"), std::nan(""));
    X.recorded_budget_ratio = opt_from_json(h.at("budget_ratio"), std::nan(""));
    X.grid = grid_from_json(h.at("grid"));
    while (next_line(in, line)) {
        if (line.empty()) continue;
        if (line.rfind("# tree ", 0) != 0)
            throw std::invalid_argument(path + ": expected a '# tree' marker, got '" + line + "'");
        Tree t = tree_from_json(line.substr(7));
        Increment2 inc(X.grid, 1);
        read_pair_rows(in, path, inc);
        X.tree_values.emplace(std::move(t), std::move(inc));
    }
    return X;
}

void write_field_json(const std::string& path, const VectorfieldFamily& f) {
    auto out = open_out(path);
    ordered_json h;
    h["schema"] = "treerough-field-1";
    h["k"] = f.k;
    h["d"] = f.d;
    ordered_json fields = ordered_json::array();
    for (const auto& outputs : f.f) {
        ordered_json row = ordered_json::array();
        for (const auto& poly : outputs) row.push_back(poly_to_json(poly));
        fields.push_back(row);
    }
    h["fields"] = fields;
    out << h.dump(2) << '\n';
}

VectorfieldFamily read_field_json(const std::string& path) {
    auto in = open_in(path);
    ordered_json h = ordered_json::parse(in, nullptr, false);
    if (h.is_discarded() || !h.is_object())
        throw std::invalid_argument(path + ": malformed field JSON");
    if (h.value("schema", std::string()) != "treerough-field-1")
        throw std::invalid_argument(path + ": expected schema 'treerough-field-1'");
    if (h.contains("scalar"))
        return VectorfieldFamily::scalar(h.at("scalar").get<std::vector<std::vector<double>>>());
    VectorfieldFamily f;
    f.k = h.at("k").get<int>();
    f.d = h.at("d").get<int>();
    const auto& fields = h.at("fields");
    if (static_cast<int>(fields.size()) != f.d)
        throw std::invalid_argument(path + ": fields array must have d rows");
    for (const auto& row : fields) {
        if (static_cast<int>(row.size()) != f.k)
            throw std::invalid_argument(path + ": each row must list k polynomials");
        std::vector<Poly> outputs;
        for (const auto& terms : row) outputs.push_back(poly_from_json(terms, f.k, path));
        f.f.push_back(std::move(outputs));
    }
    return f;
}

}  // namespace treerough
