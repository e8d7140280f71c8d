#include "treerough/increments.hpp"

#include <cmath>
#include <stdexcept>

namespace treerough {

Grid::Grid(std::vector<double> times, int max_panels) : t_(std::move(times)) {
    if (t_.size() < 2) throw std::invalid_argument("Grid: need at least two points");
    if (static_cast<int>(t_.size()) - 1 > max_panels)
        throw std::length_error("Grid: panel count exceeds cap");
    for (size_t i = 1; i < t_.size(); ++i)
        if (!(t_[i] > t_[i - 1])) throw std::invalid_argument("Grid: times must strictly increase");
}

Grid Grid::uniform(int panels, double t0, double t1, int max_panels) {
    if (panels < 1 || !(t1 > t0)) throw std::invalid_argument("Grid::uniform: bad range");
    std::vector<double> t(static_cast<size_t>(panels) + 1);
    for (int i = 0; i <= panels; ++i)
        t[static_cast<size_t>(i)] = t0 + (t1 - t0) * (static_cast<double>(i) / panels);
    t.back() = t1;
    return Grid(std::move(t), max_panels);
}

Grid Grid::refined() const {
    std::vector<double> t;
    t.reserve(t_.size() * 2 - 1);
    for (size_t i = 0; i + 1 < t_.size(); ++i) {
        t.push_back(t_[i]);
        t.push_back(0.5 * (t_[i] + t_[i + 1]));
    }
    t.push_back(t_.back());
    return Grid(std::move(t), 2 * panels());
}

bool Grid::uniform_spacing(double rel_tol) const {
    double h = t_[1] - t_[0];
    for (size_t i = 1; i + 1 < t_.size(); ++i)
        if (std::abs((t_[i + 1] - t_[i]) - h) > rel_tol * h) return false;
    return true;
}

Increment2::Increment2(GridPtr grid, int dim) : grid_(std::move(grid)), dim_(dim) {
    if (!grid_) throw std::invalid_argument("Increment2: null grid");
    if (dim_ < 1) throw std::invalid_argument("Increment2: bad dim");
    size_t n = static_cast<size_t>(grid_->points());
    v_.assign(n * (n - 1) / 2 * static_cast<size_t>(dim_), 0.0);
}

size_t Increment2::index(int i, int j) const {
    return static_cast<size_t>(i) * (static_cast<size_t>(i) - 1) / 2 + static_cast<size_t>(j);
}

Increment2& Increment2::operator+=(const Increment2& o) {
    for (size_t p = 0; p < v_.size(); ++p) v_[p] += o.v_[p];
    return *this;
}

Increment2& Increment2::operator-=(const Increment2& o) {
    for (size_t p = 0; p < v_.size(); ++p) v_[p] -= o.v_[p];
    return *this;
}

Increment2& Increment2::operator*=(double s) {
    for (double& x : v_) x *= s;
    return *this;
}

double Increment2::max_abs() const {
    double m = 0.0;
    for (double x : v_) m = std::max(m, std::abs(x));
    return m;
}

GridPath::GridPath(GridPtr g, int d) : grid(std::move(g)), dim(d) {
    v.assign(static_cast<size_t>(grid->points()) * static_cast<size_t>(dim), 0.0);
}

Increment2 coboundary1(const GridPath& f) {
    Increment2 g(f.grid, f.dim);
    int n = f.grid->points();
    for (int i = 1; i < n; ++i)
        for (int j = 0; j < i; ++j)
            for (int c = 0; c < f.dim; ++c) g.ref(i, j, c) = f.at(i, c) - f.at(j, c);
    return g;
}

Increment3 coboundary2(const Increment2& g) {
    auto gp = std::make_shared<Increment2>(g);
    return Increment3{g.grid(), g.dim(), [gp](int i, int k, int j, int c) {
                          return gp->at(i, j, c) - gp->at(i, k, c) - gp->at(k, j, c);
                      }};
}

namespace {

void check_same_grid(const Increment2& a, const Increment2& b) {
    if (a.grid()->points() != b.grid()->points())
        throw std::invalid_argument("increment operands on different grids");
}

int broadcast_dim(int da, int db) {
    if (da == db || db == 1) return da;
    if (da == 1) return db;
    throw std::invalid_argument("incompatible increment dims");
}

}  // namespace

Increment3 exterior_product(const Increment2& g, const Increment2& h) {
    check_same_grid(g, h);
    int dim = broadcast_dim(g.dim(), h.dim());
    auto gp = std::make_shared<Increment2>(g);
    auto hp = std::make_shared<Increment2>(h);
    return Increment3{g.grid(), dim, [gp, hp](int i, int k, int j, int c) {
                          return gp->at(i, k, gp->dim() == 1 ? 0 : c) *
                                 hp->at(k, j, hp->dim() == 1 ? 0 : c);
                      }};
}

Increment2 circle_product(const Increment2& a, const Increment2& b) {
    check_same_grid(a, b);
    int dim = broadcast_dim(a.dim(), b.dim());
    Increment2 out(a.grid(), dim);
    int n = a.grid()->points();
    for (int i = 1; i < n; ++i)
        for (int j = 0; j < i; ++j)
            for (int c = 0; c < dim; ++c)
                out.ref(i, j, c) = a.at(i, j, a.dim() == 1 ? 0 : c) * b.at(i, j, b.dim() == 1 ? 0 : c);
    return out;
}

HolderReport holder_norm2(const Increment2& g, double mu) {
    HolderReport r;
    r.mu = mu;
    const Grid& t = *g.grid();
    int n = t.points();
    for (int i = 1; i < n; ++i)
        for (int j = 0; j < i; ++j) {
            double mag2 = 0.0;
            for (int c = 0; c < g.dim(); ++c) {
                double x = g.at(i, j, c);
                mag2 += x * x;
            }
            double val = std::sqrt(mag2) / std::pow(t[i] - t[j], mu);
            if (val > r.norm) {
                r.norm = val;
                r.i = i;
                r.j = j;
            }
        }
    return r;
}

HolderReport holder_norm3(const Increment3& h, double mu) {
    const Grid& t = *h.grid;
    int n = t.points();
    constexpr int kSplits = 7;
    double rho[kSplits];
    for (int s = 0; s < kSplits; ++s) rho[s] = mu * (s + 1) / 8.0;

    // gap^rho tables; on uniform grids gaps depend only on index distance
    bool uni = h.grid->uniform_spacing();
    std::vector<double> pow_lo(static_cast<size_t>(kSplits) * static_cast<size_t>(n), 0.0);
    std::vector<double> pow_hi(static_cast<size_t>(kSplits) * static_cast<size_t>(n), 0.0);
    if (uni) {
        double step = t[1] - t[0];
        for (int s = 0; s < kSplits; ++s)
            for (int m = 1; m < n; ++m) {
                pow_lo[static_cast<size_t>(s) * static_cast<size_t>(n) + static_cast<size_t>(m)] = std::pow(m * step, rho[s]);
                pow_hi[static_cast<size_t>(s) * static_cast<size_t>(n) + static_cast<size_t>(m)] = std::pow(m * step, mu - rho[s]);
            }
    }

    HolderReport best;
    best.mu = mu;
    best.norm = -1.0;
    for (int s = 0; s < kSplits; ++s) {
        HolderReport r;
        r.mu = mu;
        r.rho = rho[s];
        for (int i = 2; i < n; ++i)
            for (int k = 1; k < i; ++k)
                for (int j = 0; j < k; ++j) {
                    double mag2 = 0.0;
                    for (int c = 0; c < h.dim; ++c) {
                        double x = h.eval(i, k, j, c);
                        mag2 += x * x;
                    }
                    double denom = uni ? pow_lo[static_cast<size_t>(s) * static_cast<size_t>(n) + static_cast<size_t>(k - j)] *
                                             pow_hi[static_cast<size_t>(s) * static_cast<size_t>(n) + static_cast<size_t>(i - k)]
                                       : std::pow(t[k] - t[j], rho[s]) * std::pow(t[i] - t[k], mu - rho[s]);
                    double val = std::sqrt(mag2) / denom;
                    if (val > r.norm) {
                        r.norm = val;
                        r.i = i;
                        r.k = k;
                        r.j = j;
                    }
                }
        if (best.norm < 0.0 || r.norm < best.norm) best = r;
    }
    return best;
}

// Splits g into the increments of a grid path plus a leftover that vanishes
// on adjacent pairs.  The split itself is pure arithmetic; the mu > 1 gate in
// sew() is where the uniqueness claim lives.
static SewResult split_additive(const Increment2& g) {
    SewResult out;
    out.path_part = Increment2(g.grid(), g.dim());
    int n = g.grid()->points();
    int dim = g.dim();
    // running Riemann sums over the finest partition
    std::vector<double> s(static_cast<size_t>(n) * static_cast<size_t>(dim), 0.0);
    for (int i = 1; i < n; ++i)
        for (int c = 0; c < dim; ++c)
            s[static_cast<size_t>(i) * static_cast<size_t>(dim) + static_cast<size_t>(c)] =
                s[static_cast<size_t>(i - 1) * static_cast<size_t>(dim) + static_cast<size_t>(c)] + g.at(i, i - 1, c);
    for (int i = 1; i < n; ++i)
        for (int j = 0; j < i; ++j)
            for (int c = 0; c < dim; ++c)
                out.path_part.ref(i, j, c) = s[static_cast<size_t>(i) * static_cast<size_t>(dim) + static_cast<size_t>(c)] -
                                             s[static_cast<size_t>(j) * static_cast<size_t>(dim) + static_cast<size_t>(c)];
    out.lambda_part = g;
    out.lambda_part -= out.path_part;
    return out;
}

SewResult sew(const Increment2& g, double mu) {
    if (!(mu > 1.0)) throw std::invalid_argument("sew: need mu > 1");
    return split_additive(g);
}

Increment2 lambda_of_closed(const Increment3& h) {
    // g(t,s) := -h(t,s,base) is a preimage: delta g = h whenever delta h = 0.
    Increment2 g(h.grid, h.dim);
    int n = h.grid->points();
    for (int i = 1; i < n; ++i)
        for (int j = 0; j < i; ++j)
            for (int c = 0; c < h.dim; ++c) g.ref(i, j, c) = -h.eval(i, j, 0, c);
    return std::move(split_additive(g).lambda_part);
}

}  // namespace treerough
