#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "treerough/exact.hpp"

namespace treerough {

// Labels index driver components; alphabets are {0, ..., d-1}.
using Label = int;

// Rooted tree with labelled vertices. Children are kept sorted in canonical
// order, so structural equality is semantic equality.
struct Tree {
    Label label = 0;
    std::vector<Tree> children;

    Tree() = default;
    explicit Tree(Label l) : label(l) {}
    Tree(Label l, std::vector<Tree> cs);

    bool operator==(const Tree&) const = default;
};

// Total order on canonical trees: label first, then children lexicographically.
std::strong_ordering compare(const Tree& a, const Tree& b);
inline bool operator<(const Tree& a, const Tree& b) { return compare(a, b) < 0; }

// Multiset of trees, kept sorted. The empty forest is the unit.
struct Forest {
    std::vector<Tree> trees;

    Forest() = default;
    explicit Forest(Tree t) : trees{std::move(t)} {}
    explicit Forest(std::vector<Tree> ts);

    bool empty() const { return trees.empty(); }
    bool single() const { return trees.size() == 1; }

    bool operator==(const Forest&) const = default;
};

std::strong_ordering compare(const Forest& a, const Forest& b);
inline bool operator<(const Forest& a, const Forest& b) { return compare(a, b) < 0; }

// Multiset union.
Forest merge(const Forest& a, const Forest& b);
Forest merge(Forest a, const Tree& t);

int degree(const Tree& t);   // vertex count
int degree(const Forest& f); // total vertex count

// Attach every tree of f to a fresh root with the given label. graft({}, a)
// is the single vertex.
Tree graft(const Forest& f, Label root);

// Inverse of graft when the root label matches; nullopt otherwise.
std::optional<Forest> ungraft(const Tree& t, Label root);

// Children of the root as a forest (ungraft without the label test).
Forest detach_root(const Tree& t);

BigInt tree_factorial(const Tree& t);
BigInt tree_factorial(const Forest& f);  // product over components; empty -> 1

// Automorphism count. For a forest: prod over distinct component classes of
// mult! * sigma(tree)^mult; a tree's factor is its child forest's, so
// symmetry_factor(graft(f, a)) == symmetry_factor(f).
BigInt symmetry_factor(const Tree& t);
BigInt symmetry_factor(const Forest& f);

// Number of distinct ordered tuples realizing the multiset {t1, ..., tk}:
// k! / prod(multiplicity!).
BigInt tuple_multiplicity(const std::vector<Tree>& tuple);

// All canonical trees with the given vertex count over labels {0..labels-1}.
std::vector<Tree> enumerate_trees(int degree, int labels);

// All nonempty canonical forests of total degree <= max_degree. Throws
// std::length_error if the predicted count exceeds cap.
std::vector<Forest> enumerate_forests(int max_degree, int labels,
                                      std::uint64_t cap = 5'000'000);

// Predicted counts (no materialization): trees of each degree 1..max_degree.
std::vector<std::uint64_t> count_trees(int max_degree, int labels);

// Compact text form, e.g. "0[1,0[0]]"; used for diagnostics and map keys in
// reports. Round-trips through parse_tree.
std::string format_tree(const Tree& t);
std::string format_forest(const Forest& f);
Tree parse_tree(const std::string& s);

// JSON encoding {"l": label, "c": [children...]}; forests are arrays.
// Decoding normalizes child order.
std::string tree_to_json(const Tree& t);
std::string forest_to_json(const Forest& f);
Tree tree_from_json(const std::string& json);
Forest forest_from_json(const std::string& json);

}  // namespace treerough
