#pragma once

#include <boost/multiprecision/cpp_int.hpp>

namespace treerough {

// All combinatorial statistics are kept exact; doubles only appear at the
// analysis layer (grids, increments, norms).
using BigInt = boost::multiprecision::cpp_int;
using BigRat = boost::multiprecision::cpp_rational;

inline BigInt factorial(unsigned n) {
    BigInt r = 1;
    for (unsigned k = 2; k <= n; ++k) r *= k;
    return r;
}

inline BigInt binomial(unsigned n, unsigned k) {
    if (k > n) return 0;
    if (k > n - k) k = n - k;
    BigInt r = 1;
    for (unsigned i = 0; i < k; ++i) {
        r *= (n - i);
        r /= (i + 1);  // always divides evenly at this point
    }
    return r;
}

}  // namespace treerough
