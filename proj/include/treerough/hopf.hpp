#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "treerough/exact.hpp"
#include "treerough/tree.hpp"

namespace treerough {

// Integer tensor series over forest pairs. First slot is the rooted part
// (the one that keeps the root after cutting), second the detached forest.
using TensorKey = std::pair<Forest, Forest>;
using TensorSeries = std::map<TensorKey, BigInt>;

// Formal series over forests with exact rational coefficients.
using ForestSeries = std::map<Forest, BigRat>;

// Words over the label alphabet; a word series carries integer counts.
using Word = std::vector<Label>;
using WordSeries = std::map<Word, BigInt>;

TensorSeries tensor_product(const TensorSeries& a, const TensorSeries& b);
void tensor_add(TensorSeries& into, const TensorSeries& from, const BigInt& scale = 1);

// Full coproduct. On a single vertex: unit ⊗ vertex + vertex ⊗ unit; on a
// bigger tree it recurses through the children forest and re-grafts the
// rooted slot. Forests multiply componentwise.
TensorSeries coproduct(const Tree& t);
TensorSeries coproduct(const Forest& f);

// Same object assembled from admissible edge cuts (no two cut edges on one
// root-to-leaf path). Used as an independent route in the verifiers.
TensorSeries coproduct_by_cuts(const Tree& t);

// Coproduct minus both primitive terms.
TensorSeries reduced_coproduct(const Tree& t);
TensorSeries reduced_coproduct(const Forest& f);

// Coefficient of rooted ⊗ detached in the reduced coproduct of sigma.
BigInt count_reduced(const Forest& sigma, const Forest& rooted, const Forest& detached);
BigInt count_reduced(const Tree& sigma, const Tree& rooted, const Forest& detached);

// As count_reduced, but the empty detached forest is allowed and contributes
// the indicator [sigma == rooted].
BigInt count_allowing_empty(const Forest& sigma, const Forest& rooted, const Forest& detached);

// All interleavings of two words, with multiplicities.
WordSeries shuffle(const Word& a, const Word& b);
WordSeries shuffle_product(const WordSeries& a, const WordSeries& b);

// The linear tree whose top-to-bottom labels spell the word.
Tree chen_tree(const Word& w);

// Word expansion of a tree for geometric drivers: a single vertex is its
// one-letter word; a branched vertex shuffles the children expansions and
// prefixes the root label.
WordSeries geometric_reduce(const Tree& t);

// Exact check of the tree binomial identity
//   (a+b)^{|t|} = sum over coproduct terms of t!/(f1! f2!) * a^{|f1|} b^{|f2|}.
// Returns the two sides' difference (zero iff the identity holds).
BigRat tree_binomial_defect(const Tree& t, const BigRat& a, const BigRat& b);

// Hölder budget weight: 1 up to the degree threshold 1/gamma, then the
// sewing-bound recursion over the reduced coproduct; multiplicative over
// forests.
double q_gamma(const Forest& f, double gamma);
double q_gamma(const Tree& t, double gamma);

// Residual of the full-coproduct form of the same recursion at a tree above
// the threshold; near zero when q_gamma is consistent.
double q_gamma_full_residual(const Tree& t, double gamma);

// Ratio of the gamma-interpolated binomial sum to its closed right side,
// computed in log space: sum_k pmf(n,k)^gamma with pmf the binomial(a/(a+b))
// mass function. Throws std::invalid_argument for n > 10000 or bad inputs.
double neoclassical_ratio(int n, double gamma, double a, double b);

// gamma = 1 specialization in exact rationals; equals 1 identically.
BigRat neoclassical_ratio_exact(int n, const BigRat& a, const BigRat& b);

// Structural verifiers shared by tests and the CLI. `detail` describes the
// first failure, if any.
struct CheckReport {
    bool ok = true;
    long checked = 0;
    std::string detail;
};

CheckReport verify_counit(int max_degree, int labels);
CheckReport verify_coassociativity(int max_degree, int labels);
CheckReport verify_reduced_coassociativity(int max_degree, int labels);
CheckReport verify_grading(int max_degree, int labels);
CheckReport verify_homomorphism(int max_degree, int labels);
CheckReport verify_cuts_match_recursion(int max_degree, int labels);
CheckReport verify_hopf(int max_degree, int labels);  // all of the above

}  // namespace treerough
