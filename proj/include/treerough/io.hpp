#pragma once

#include <string>

#include "treerough/brp.hpp"
#include "treerough/bseries.hpp"
#include "treerough/increments.hpp"

namespace treerough {

// Shortest decimal string that parses back to the identical double.
std::string format_double(double v);
double parse_double(const std::string& s);

// Driver table: header "t,x0,...", one row per grid point, values written
// round-trip exact. The quadrature rule is not part of the file; the caller
// picks it on read.
void write_driver_csv(const std::string& path, const SmoothDriver& x);
SmoothDriver read_driver_csv(const std::string& path, QuadRule rule = QuadRule::simpson);

// Two-index increment file: a "# {...}" JSON line carrying schema, dim, the
// Hölder exponent mu it was produced under (null if not applicable) and the
// grid, then a column header and one "i,j,v0,..." row per pair i > j.
struct Increment2File {
    Increment2 values;
    double mu = -1.0;  // -1 when the header had null
};
void write_increment2(const std::string& path, const Increment2& g, double mu = -1.0);
Increment2File read_increment2(const std::string& path);

// Rough-path file: a "# {...}" JSON line (schema, gamma, level, alphabet,
// grid, recorded diagnostics), then per stored tree a "# tree <json>" marker
// followed by its i,j,v rows. Tree order is the canonical map order, so
// writing is deterministic.
void write_brp(const std::string& path, const BranchedRoughPath& X);
BranchedRoughPath read_brp(const std::string& path);

// Polynomial vector field family. General form: "fields" lists one row per
// driver label, each row k output polynomials, each polynomial an array of
// {"e": [exponents], "c": coefficient} terms with arity-k exponents. A
// {"scalar": [rows]} shorthand holds ascending univariate coefficients per
// label and maps through VectorfieldFamily::scalar.
void write_field_json(const std::string& path, const VectorfieldFamily& f);
VectorfieldFamily read_field_json(const std::string& path);

}  // namespace treerough
