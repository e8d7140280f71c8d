#pragma once

#include <functional>
#include <memory>
#include <vector>

namespace treerough {

// Strictly increasing sample times t_0 < ... < t_M.
class Grid {
  public:
    explicit Grid(std::vector<double> times, int max_panels = kDefaultMaxPanels);
    static Grid uniform(int panels, double t0, double t1, int max_panels = kDefaultMaxPanels);

    // midpoint refinement (panel count doubles)
    Grid refined() const;

    int points() const { return static_cast<int>(t_.size()); }
    int panels() const { return points() - 1; }
    double operator[](int i) const { return t_[static_cast<size_t>(i)]; }
    const std::vector<double>& times() const { return t_; }
    bool uniform_spacing(double rel_tol = 1e-9) const;

    static constexpr int kDefaultMaxPanels = 4096;

  private:
    std::vector<double> t_;
};

using GridPtr = std::shared_ptr<const Grid>;

// A function of ordered grid pairs (i >= j) vanishing on the diagonal,
// R^dim valued, stored densely. This is the workhorse container; the i > j
// triangle costs ~points^2/2 * dim doubles.
class Increment2 {
  public:
    Increment2() = default;
    Increment2(GridPtr grid, int dim = 1);

    const GridPtr& grid() const { return grid_; }
    int dim() const { return dim_; }

    double at(int i, int j, int c = 0) const {
        return i == j ? 0.0 : v_[index(i, j) * static_cast<size_t>(dim_) + static_cast<size_t>(c)];
    }
    double& ref(int i, int j, int c = 0) {
        return v_[index(i, j) * static_cast<size_t>(dim_) + static_cast<size_t>(c)];
    }

    Increment2& operator+=(const Increment2& o);
    Increment2& operator-=(const Increment2& o);
    Increment2& operator*=(double s);

    double max_abs() const;

  private:
    size_t index(int i, int j) const;  // i > j
    GridPtr grid_;
    int dim_ = 1;
    std::vector<double> v_;
};

// Lazy function of ordered grid triples (i >= k >= j).
struct Increment3 {
    GridPtr grid;
    int dim = 1;
    std::function<double(int i, int k, int j, int c)> eval;
};

// A path sampled on the grid: points * dim values.
struct GridPath {
    GridPtr grid;
    int dim = 1;
    std::vector<double> v;

    GridPath() = default;
    GridPath(GridPtr g, int d);
    double at(int i, int c = 0) const { return v[static_cast<size_t>(i) * static_cast<size_t>(dim) + static_cast<size_t>(c)]; }
    double& ref(int i, int c = 0) { return v[static_cast<size_t>(i) * static_cast<size_t>(dim) + static_cast<size_t>(c)]; }
};

Increment2 coboundary1(const GridPath& f);          // (i,j) -> f_i - f_j
Increment3 coboundary2(const Increment2& g);        // (i,k,j) -> g_ij - g_ik - g_kj

// (i,k,j) -> g_ik * h_kj, componentwise; a dim-1 factor broadcasts.
Increment3 exterior_product(const Increment2& g, const Increment2& h);

// (i,j) -> a_ij * b_ij, componentwise; a dim-1 factor broadcasts.
Increment2 circle_product(const Increment2& a, const Increment2& b);

struct HolderReport {
    double norm = 0.0;
    double mu = 0.0;
    double rho = 0.0;  // split exponent used (3-increment case)
    int i = -1, k = -1, j = -1;
};

// sup |g_ij| / (t_i - t_j)^mu over i > j (Euclidean norm across components).
HolderReport holder_norm2(const Increment2& g, double mu);

// Two-gap bound min over rho in {mu/8, ..., 7mu/8} of
//   sup |h_ikj| / ((t_k - t_j)^rho (t_i - t_k)^(mu - rho)),
// an upper surrogate for the mu-Hölder size of a 3-increment.
HolderReport holder_norm3(const Increment3& h, double mu);

struct SewResult {
    Increment2 path_part;    // finest-grid Riemann part, exactly additive
    Increment2 lambda_part;  // g minus path_part; coboundary2 equals that of g
};

// Split g into additive + sewn parts. mu is the regularity the caller claims
// for coboundary2(g); values <= 1 are outside the sewing domain and throw.
SewResult sew(const Increment2& g, double mu);

// Sewn primitive of a delta-closed 3-increment h: the unique (up to additive
// parts, which are removed) 2-increment L with coboundary2(L) == h. No
// regularity gate; callers own the claim that h is closed.
Increment2 lambda_of_closed(const Increment3& h);

}  // namespace treerough
