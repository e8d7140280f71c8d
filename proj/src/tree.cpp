#include "treerough/tree.hpp"

#include <algorithm>
#include <cctype>

#include <nlohmann/json.hpp>

namespace treerough {

Tree::Tree(Label l, std::vector<Tree> cs) : label(l), children(std::move(cs)) {
    std::sort(children.begin(), children.end());
}

std::strong_ordering compare(const Tree& a, const Tree& b) {
    if (auto c = a.label <=> b.label; c != 0) return c;
    size_t n = std::min(a.children.size(), b.children.size());
    for (size_t i = 0; i < n; ++i)
        if (auto c = compare(a.children[i], b.children[i]); c != 0) return c;
    return a.children.size() <=> b.children.size();
}

Forest::Forest(std::vector<Tree> ts) : trees(std::move(ts)) {
    std::sort(trees.begin(), trees.end());
}

std::strong_ordering compare(const Forest& a, const Forest& b) {
    size_t n = std::min(a.trees.size(), b.trees.size());
    for (size_t i = 0; i < n; ++i)
        if (auto c = compare(a.trees[i], b.trees[i]); c != 0) return c;
    return a.trees.size() <=> b.trees.size();
}

Forest merge(const Forest& a, const Forest& b) {
    std::vector<Tree> out;
    out.reserve(a.trees.size() + b.trees.size());
    std::merge(a.trees.begin(), a.trees.end(), b.trees.begin(), b.trees.end(),
               std::back_inserter(out));
    Forest f;
    f.trees = std::move(out);  // already sorted
    return f;
}

Forest merge(Forest a, const Tree& t) {
    auto it = std::upper_bound(a.trees.begin(), a.trees.end(), t);
    a.trees.insert(it, t);
    return a;
}

int degree(const Tree& t) {
    int d = 1;
    for (const auto& c : t.children) d += degree(c);
    return d;
}

int degree(const Forest& f) {
    int d = 0;
    for (const auto& t : f.trees) d += degree(t);
    return d;
}

Tree graft(const Forest& f, Label root) {
    Tree t(root);
    t.children = f.trees;  // forest is sorted, so children are canonical
    return t;
}

std::optional<Forest> ungraft(const Tree& t, Label root) {
    if (t.label != root) return std::nullopt;
    return detach_root(t);
}

Forest detach_root(const Tree& t) {
    Forest f;
    f.trees = t.children;
    return f;
}

BigInt tree_factorial(const Tree& t) {
    BigInt r = degree(t);
    for (const auto& c : t.children) r *= tree_factorial(c);
    return r;
}

BigInt tree_factorial(const Forest& f) {
    BigInt r = 1;
    for (const auto& t : f.trees) r *= tree_factorial(t);
    return r;
}

BigInt symmetry_factor(const Forest& f) {
    BigInt r = 1;
    size_t i = 0;
    while (i < f.trees.size()) {
        size_t j = i;
        while (j < f.trees.size() && f.trees[j] == f.trees[i]) ++j;
        unsigned mult = static_cast<unsigned>(j - i);
        r *= factorial(mult);
        BigInt s = symmetry_factor(f.trees[i]);
        for (unsigned k = 0; k < mult; ++k) r *= s;
        i = j;
    }
    return r;
}

BigInt symmetry_factor(const Tree& t) { return symmetry_factor(detach_root(t)); }

BigInt tuple_multiplicity(const std::vector<Tree>& tuple) {
    BigInt denom = 1;
    std::vector<Tree> sorted = tuple;
    std::sort(sorted.begin(), sorted.end());
    size_t i = 0;
    while (i < sorted.size()) {
        size_t j = i;
        while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
        denom *= factorial(static_cast<unsigned>(j - i));
        i = j;
    }
    return factorial(static_cast<unsigned>(tuple.size())) / denom;
}

namespace {

// Trees of exact degree m over the alphabet, memoized per (m, labels) call
// chain. Children forests are built from trees of smaller degree.
struct Enumerator {
    int labels;
    std::vector<std::vector<Tree>> trees_by_degree;  // [m] -> trees of degree m

    explicit Enumerator(int labels_) : labels(labels_), trees_by_degree(1) {}

    void grow_to(int m) {
        for (int d = static_cast<int>(trees_by_degree.size()); d <= m; ++d) {
            std::vector<Tree> out;
            for (Label a = 0; a < labels; ++a) {
                for (auto& f : forests_of_degree(d - 1)) out.push_back(graft(f, a));
            }
            std::sort(out.begin(), out.end());
            trees_by_degree.push_back(std::move(out));
        }
    }

    // All forests of exact total degree m (m >= 0), trees drawn in
    // non-decreasing canonical order to avoid duplicates. cap bounds the
    // total number of forests materialized through this enumerator.
    std::vector<Forest> forests_of_degree(int m, std::uint64_t cap = UINT64_MAX) {
        grow_to(m);
        std::vector<Forest> out;
        Forest acc;
        build(m, Tree{}, false, acc, out, cap);
        return out;
    }

    void build(int remaining, const Tree& min_tree, bool have_min, Forest& acc,
               std::vector<Forest>& out, std::uint64_t cap) {
        if (remaining == 0) {
            if (produced++ >= cap) throw std::length_error("enumerate_forests: cap exceeded");
            out.push_back(acc);
            return;
        }
        for (int d = 1; d <= remaining; ++d) {
            for (const auto& t : trees_by_degree[static_cast<size_t>(d)]) {
                if (have_min && t < min_tree) continue;
                acc.trees.push_back(t);
                build(remaining - d, t, true, acc, out, cap);
                acc.trees.pop_back();
            }
        }
    }

    std::uint64_t produced = 0;
};

}  // namespace

std::vector<Tree> enumerate_trees(int deg, int labels) {
    if (deg < 1 || labels < 1) return {};
    Enumerator e(labels);
    e.grow_to(deg);
    return e.trees_by_degree[static_cast<size_t>(deg)];
}

std::vector<std::uint64_t> count_trees(int max_degree, int labels) {
    // t[m] = labels * f[m-1]; f[m] counts forests of total degree m over the
    // already-counted tree types, taken with repetition per degree class.
    std::vector<BigInt> t(static_cast<size_t>(max_degree) + 1, 0);
    for (int m = 1; m <= max_degree; ++m) {
        std::vector<BigInt> g(static_cast<size_t>(m), 0);  // forests of degree < m
        g[0] = 1;
        for (int d = 1; d < m; ++d) {
            BigInt types = t[static_cast<size_t>(d)];
            if (types == 0) continue;
            std::vector<BigInt> h = g;
            for (int total = d; total < m; total += d) {
                int k = total / d;
                BigInt comb = 1;  // C(types + k - 1, k)
                for (int i = 0; i < k; ++i) { comb *= types + i; comb /= i + 1; }
                for (int rest = 0; rest + total < m; ++rest)
                    h[static_cast<size_t>(rest + total)] += g[static_cast<size_t>(rest)] * comb;
            }
            g = std::move(h);
        }
        t[static_cast<size_t>(m)] = labels * g[static_cast<size_t>(m - 1)];
    }
    std::vector<std::uint64_t> out;
    for (int m = 1; m <= max_degree; ++m) {
        const BigInt& v = t[static_cast<size_t>(m)];
        out.push_back(v > UINT64_MAX ? UINT64_MAX : static_cast<std::uint64_t>(v));
    }
    return out;
}

std::vector<Forest> enumerate_forests(int max_degree, int labels, std::uint64_t cap) {
    if (max_degree < 1 || labels < 1) return {};
    Enumerator e(labels);
    std::vector<Forest> out;
    for (int m = 1; m <= max_degree; ++m) {
        auto fs = e.forests_of_degree(m, cap);
        out.insert(out.end(), fs.begin(), fs.end());
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::string format_tree(const Tree& t) {
    std::string s = std::to_string(t.label);
    if (!t.children.empty()) {
        s += '[';
        for (size_t i = 0; i < t.children.size(); ++i) {
            if (i) s += ',';
            s += format_tree(t.children[i]);
        }
        s += ']';
    }
    return s;
}

std::string format_forest(const Forest& f) {
    if (f.empty()) return "()";
    std::string s;
    for (size_t i = 0; i < f.trees.size(); ++i) {
        if (i) s += ' ';
        s += format_tree(f.trees[i]);
    }
    return s;
}

namespace {

Tree parse_tree_at(const std::string& s, size_t& pos) {
    size_t start = pos;
    if (pos < s.size() && (s[pos] == '-' || s[pos] == '+')) ++pos;
    while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) ++pos;
    if (pos == start) throw std::invalid_argument("parse_tree: expected label at " + std::to_string(pos));
    Tree t(std::stoi(s.substr(start, pos - start)));
    if (pos < s.size() && s[pos] == '[') {
        ++pos;
        std::vector<Tree> cs;
        while (true) {
            cs.push_back(parse_tree_at(s, pos));
            if (pos < s.size() && s[pos] == ',') { ++pos; continue; }
            break;
        }
        if (pos >= s.size() || s[pos] != ']') throw std::invalid_argument("parse_tree: missing ]");
        ++pos;
        t = Tree(t.label, std::move(cs));
    }
    return t;
}

nlohmann::json tree_json(const Tree& t) {
    nlohmann::json j;
    j["l"] = t.label;
    auto cs = nlohmann::json::array();
    for (const auto& c : t.children) cs.push_back(tree_json(c));
    j["c"] = std::move(cs);
    return j;
}

Tree tree_unjson(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("l")) throw std::invalid_argument("tree json: need {\"l\":..,\"c\":[..]}");
    std::vector<Tree> cs;
    if (j.contains("c")) {
        for (const auto& c : j["c"]) cs.push_back(tree_unjson(c));
    }
    return Tree(j["l"].get<Label>(), std::move(cs));
}

}  // namespace

Tree parse_tree(const std::string& s) {
    size_t pos = 0;
    Tree t = parse_tree_at(s, pos);
    if (pos != s.size()) throw std::invalid_argument("parse_tree: trailing input");
    return t;
}

std::string tree_to_json(const Tree& t) { return tree_json(t).dump(); }

std::string forest_to_json(const Forest& f) {
    auto a = nlohmann::json::array();
    for (const auto& t : f.trees) a.push_back(tree_json(t));
    return a.dump();
}

Tree tree_from_json(const std::string& json) { return tree_unjson(nlohmann::json::parse(json)); }

Forest forest_from_json(const std::string& json) {
    auto j = nlohmann::json::parse(json);
    if (!j.is_array()) throw std::invalid_argument("forest json: need array of trees");
    std::vector<Tree> ts;
    for (const auto& e : j) ts.push_back(tree_unjson(e));
    return Forest(std::move(ts));
}

}  // namespace treerough
