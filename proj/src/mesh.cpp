#include "anisobn/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace anisobn {

void ProblemParams::validate() const {
    if (n < 2) throw DomainError("dimension must be at least 2");
    if (!(p > 1) || !(p < n)) throw DomainError("need 1 < p < n");
    if (!std::isfinite(lambda)) throw DomainError("lambda must be finite");
    if (!(flux_delta >= 0)) throw DomainError("flux regularization must be >= 0");
    if (critical_term) {
        if (!(q >= p) || !(q < pstar())) throw DomainError("need p <= q < p*");
    } else if (!(q >= 1)) {
        throw DomainError("need q >= 1");
    }
}

// ---------------------------------------------------------------------------
// Grid

double Grid::gradient_norm(const double* g) const {
    if (cell_dim_ == 1) return g[0] > 0 ? std::sqrt(upslope_scale_) * g[0] : -g[0];
    Vector v(2);
    v << g[0], g[1];
    return norm_.value(v);
}

void Grid::half_square_gradient(const double* g, double* out) const {
    if (cell_dim_ == 1) {
        out[0] = (g[0] > 0 ? upslope_scale_ : 1.0) * g[0];
        return;
    }
    if (g[0] == 0 && g[1] == 0) {
        out[0] = out[1] = 0;
        return;
    }
    Vector v(2);
    v << g[0], g[1];
    const Vector hg = norm_.value(v) * norm_.gradient(v);
    out[0] = hg(0);
    out[1] = hg(1);
}

void Grid::half_square_hessian(const double* g, double* out) const {
    if (cell_dim_ == 1) {
        out[0] = g[0] > 0 ? upslope_scale_ : 1.0;
        return;
    }
    Vector v(2);
    if (g[0] == 0 && g[1] == 0)
        v << 1, 0;
    else
        v << g[0], g[1];
    const Matrix m = norm_.half_hessian_sq(v);
    out[0] = m(0, 0);
    out[1] = m(0, 1);
    out[2] = m(1, 0);
    out[3] = m(1, 1);
}

void Grid::finalize(const std::vector<bool>& pinned) {
    const auto nn = static_cast<std::size_t>(coords_.cols());
    free_index_.assign(nn, -1);
    free_nodes_.clear();
    for (std::size_t i = 0; i < nn; ++i) {
        if (!pinned[i]) {
            free_index_[i] = static_cast<int>(free_nodes_.size());
            free_nodes_.push_back(static_cast<int>(i));
        }
    }
    if (free_nodes_.empty()) throw DomainError("grid has no interior nodes");

    const int k = vertices_per_cell();
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(cell_count() * k * k));
    for (Eigen::Index c = 0; c < cell_count(); ++c) {
        const auto verts = cell(c);
        const auto gop = gradient_operator(c);
        const Eigen::MatrixXd local = weight(c) * gop.transpose() * gop;
        for (int a = 0; a < k; ++a) {
            const int fa = free_index(verts[static_cast<std::size_t>(a)]);
            if (fa < 0) continue;
            for (int b = 0; b < k; ++b) {
                const int fb = free_index(verts[static_cast<std::size_t>(b)]);
                if (fb >= 0) trip.emplace_back(fa, fb, local(a, b));
            }
        }
    }
    stiffness_.resize(free_count(), free_count());
    stiffness_.setFromTriplets(trip.begin(), trip.end());
    stiffness_factor_ = std::make_shared<Eigen::SimplicialLDLT<SparseMatrix>>(stiffness_);
    if (stiffness_factor_->info() != Eigen::Success) throw DomainError("stiffness factorization failed");
}

Eigen::VectorXd Grid::solve_stiffness(const Eigen::VectorXd& rhs) const { return stiffness_factor_->solve(rhs); }

Eigen::VectorXd Grid::restrict_to_free(const Eigen::VectorXd& full) const {
    if (full.size() != node_count()) throw DomainError("nodal vector has wrong length");
    Eigen::VectorXd out(free_count());
    for (Eigen::Index i = 0; i < free_count(); ++i) out(i) = full(free_nodes_[static_cast<std::size_t>(i)]);
    return out;
}

Eigen::VectorXd Grid::extend_from_free(const Eigen::VectorXd& free) const {
    if (free.size() != free_count()) throw DomainError("free vector has wrong length");
    Eigen::VectorXd out = Eigen::VectorXd::Zero(node_count());
    for (Eigen::Index i = 0; i < free_count(); ++i) out(free_nodes_[static_cast<std::size_t>(i)]) = free(i);
    return out;
}

// ---------------------------------------------------------------------------
// RadialGrid

namespace {

// Relative position of the centroid of rho^{n-1} d rho on [a, b]. Binomial expansion in
// h = b - a keeps every term positive, so tiny cells far from the origin lose nothing.
double radial_centroid(double a, double b, int n) {
    const double h = b - a;
    double num = 0, den = 0, binom = 1, ap = std::pow(a, n - 1), hk = 1;
    for (int k = 0; k <= n - 1; ++k) {
        const double term = binom * ap * hk;
        num += term / (k + 2);
        den += term / (k + 1);
        binom = binom * (n - 1 - k) / (k + 1);
        hk *= h;
        ap = a > 0 ? ap / a : (k + 1 == n - 1 ? 1.0 : 0.0);
    }
    return num / den;
}

std::vector<double> radial_nodes(double radius, const RadialMeshSpec& spec) {
    if (spec.cells < 2) throw DomainError("radial grid needs at least 2 cells");
    if (!(spec.growth > 1)) throw DomainError("grading growth must exceed 1");
    const double h = radius / spec.cells;
    auto graded = [&](double smallest) {
        std::vector<double> sizes;
        if (smallest > 0)
            for (double s = smallest; s < h; s *= spec.growth) sizes.push_back(s);
        return sizes;
    };
    const auto left = graded(spec.center_spacing);
    const auto right = graded(spec.boundary_spacing);
    double used = 0;
    for (double s : left) used += s;
    for (double s : right) used += s;
    const double middle = radius - used;
    if (middle < h) throw DomainError("graded layers do not fit inside the radius");
    const int mid_cells = std::max(1, static_cast<int>(std::lround(middle / h)));

    std::vector<double> nodes{0.0};
    for (double s : left) nodes.push_back(nodes.back() + s);
    const double start = nodes.back();
    for (int i = 1; i <= mid_cells; ++i) nodes.push_back(start + middle * i / mid_cells);
    for (auto it = right.rbegin(); it != right.rend(); ++it) nodes.push_back(nodes.back() + *it);
    nodes.back() = radius;
    return nodes;
}

}  // namespace

std::shared_ptr<const RadialGrid> RadialGrid::create(const Norm& norm, double radius, const RadialMeshSpec& spec,
                                                     double p) {
    return create(norm, wulff_geometry(norm, p), radius, spec);
}

std::shared_ptr<const RadialGrid> RadialGrid::create(const Norm& norm, const WulffGeometry& geometry, double radius,
                                                     const RadialMeshSpec& spec) {
    return std::shared_ptr<const RadialGrid>(new RadialGrid(norm, geometry, radius, spec));
}

RadialGrid::RadialGrid(const Norm& norm, const WulffGeometry& geometry, double radius, const RadialMeshSpec& spec)
    : Grid(norm, norm.dim(), 1), radius_(radius), geometry_(geometry) {
    if (!(radius > 0)) throw DomainError("radius must be positive");
    if (geometry.n != norm.dim()) throw DomainError("geometry dimension differs from norm dimension");
    const auto nodes = radial_nodes(radius, spec);
    const auto nn = static_cast<Eigen::Index>(nodes.size());
    coords_.resize(1, nn);
    for (Eigen::Index i = 0; i < nn; ++i) coords_(0, i) = nodes[static_cast<std::size_t>(i)];
    const int n = ambient_dim_;
    for (Eigen::Index i = 0; i + 1 < nn; ++i) {
        const double a = nodes[static_cast<std::size_t>(i)];
        const double b = nodes[static_cast<std::size_t>(i + 1)];
        cells_.push_back(static_cast<int>(i));
        cells_.push_back(static_cast<int>(i + 1));
        weights_.push_back(geometry.omega * (std::pow(b, n) - std::pow(a, n)) / n);
        grad_ops_.push_back(-1 / (b - a));
        grad_ops_.push_back(1 / (b - a));
        const double theta = radial_centroid(a, b, n);
        centroid_.push_back(1 - theta);
        centroid_.push_back(theta);
        mesh_size_ = std::max(mesh_size_, b - a);
    }
    volume_ = geometry.omega * std::pow(radius, n) / n;
    upslope_scale_ = std::pow(geometry.upslope_ratio, 2 / geometry.p);
    std::vector<bool> pinned(static_cast<std::size_t>(nn), false);
    pinned.back() = true;
    finalize(pinned);
}

// ---------------------------------------------------------------------------
// TensorGrid2D

std::shared_ptr<const TensorGrid2D> TensorGrid2D::create(const Norm& norm, const Rectangle& rect, int m1, int m2) {
    return std::shared_ptr<const TensorGrid2D>(new TensorGrid2D(norm, rect, m1, m2));
}

TensorGrid2D::TensorGrid2D(const Norm& norm, const Rectangle& rect, int m1, int m2)
    : Grid(norm, 2, 2), rect_(rect), m1_(m1), m2_(m2) {
    if (norm.dim() != 2) throw DomainError("planar grid needs a two-dimensional norm");
    if (m1 < 2 || m2 < 2) throw DomainError("planar grid needs at least 2 cells per direction");
    if (!(rect.x1 > rect.x0) || !(rect.y1 > rect.y0)) throw DomainError("degenerate rectangle");
    const double hx = (rect.x1 - rect.x0) / m1;
    const double hy = (rect.y1 - rect.y0) / m2;
    coords_.resize(2, static_cast<Eigen::Index>(m1 + 1) * (m2 + 1));
    std::vector<bool> pinned(static_cast<std::size_t>(coords_.cols()), false);
    for (int j = 0; j <= m2; ++j) {
        for (int i = 0; i <= m1; ++i) {
            const auto id = node(i, j);
            coords_(0, id) = rect.x0 + i * hx;
            coords_(1, id) = rect.y0 + j * hy;
            pinned[static_cast<std::size_t>(id)] = i == 0 || j == 0 || i == m1 || j == m2;
        }
    }
    auto add_triangle = [&](Eigen::Index a, Eigen::Index b, Eigen::Index c) {
        Eigen::Matrix2d d;
        d.col(0) = coords_.col(b) - coords_.col(a);
        d.col(1) = coords_.col(c) - coords_.col(a);
        Eigen::Matrix<double, 2, 3> ref;
        ref << -1, 1, 0, -1, 0, 1;
        const Eigen::Matrix<double, 2, 3> g = d.transpose().inverse() * ref;
        for (Eigen::Index v : {a, b, c}) cells_.push_back(static_cast<int>(v));
        weights_.push_back(std::abs(d.determinant()) / 2);
        centroid_.insert(centroid_.end(), 3, 1.0 / 3);
        for (int col = 0; col < 3; ++col)
            for (int row = 0; row < 2; ++row) grad_ops_.push_back(g(row, col));
    };
    for (int j = 0; j < m2; ++j) {
        for (int i = 0; i < m1; ++i) {
            add_triangle(node(i, j), node(i + 1, j), node(i + 1, j + 1));
            add_triangle(node(i, j), node(i + 1, j + 1), node(i, j + 1));
        }
    }
    volume_ = (rect.x1 - rect.x0) * (rect.y1 - rect.y0);
    mesh_size_ = std::hypot(hx, hy);
    finalize(pinned);
}

// ---------------------------------------------------------------------------
// DiscreteFunction

DiscreteFunction::DiscreteFunction(std::shared_ptr<const Grid> grid, Eigen::VectorXd values)
    : grid_(std::move(grid)), values_(std::move(values)) {
    if (!grid_) throw DomainError("discrete function needs a grid");
    if (values_.size() != grid_->node_count()) throw DomainError("nodal vector has wrong length");
    for (Eigen::Index i = 0; i < values_.size(); ++i)
        if (grid_->pinned(i) && values_(i) != 0) throw DomainError("boundary values must vanish");
}

DiscreteFunction DiscreteFunction::zero(std::shared_ptr<const Grid> grid) {
    const auto nn = grid->node_count();
    return {std::move(grid), Eigen::VectorXd::Zero(nn)};
}

DiscreteFunction DiscreteFunction::sample(std::shared_ptr<const Grid> grid,
                                          const std::function<double(const Eigen::VectorXd&)>& f) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(grid->node_count());
    for (Eigen::Index i = 0; i < v.size(); ++i)
        if (!grid->pinned(i)) v(i) = f(grid->coordinates().col(i));
    return {std::move(grid), std::move(v)};
}

DiscreteFunction DiscreteFunction::from_free(std::shared_ptr<const Grid> grid, const Eigen::VectorXd& free_values) {
    Eigen::VectorXd v = grid->extend_from_free(free_values);
    return {std::move(grid), std::move(v)};
}

double DiscreteFunction::interior_min() const {
    double m = std::numeric_limits<double>::infinity();
    for (int i : grid_->free_nodes()) m = std::min(m, values_(i));
    return m;
}

// ---------------------------------------------------------------------------
// Energy

namespace {

struct CellState {
    double g[2]{0, 0};
    double mean{0};       // centroid value
    double mean_plus{0};  // centroid of the nodal clamp max(u, 0)
};

CellState cell_state(const Grid& grid, Eigen::Index c, const Eigen::VectorXd& u) {
    CellState s;
    const auto verts = grid.cell(c);
    const auto gop = grid.gradient_operator(c);
    const int k = grid.vertices_per_cell();
    // Operator columns sum to zero; differencing against the first vertex avoids cancellation.
    const double u0 = u(verts[0]);
    for (int a = 0; a < k; ++a) {
        const double ua = u(verts[static_cast<std::size_t>(a)]);
        if (a > 0)
            for (int d = 0; d < grid.cell_dim(); ++d) s.g[d] += gop(d, a) * (ua - u0);
        const double beta = grid.centroid_weight(c, a);
        s.mean += beta * ua;
        s.mean_plus += beta * std::max(ua, 0.0);
    }
    return s;
}

// Regularized gradient density Psi = ((h^2 + delta^2)^{p/2} - delta^p) / p.
double psi(double h, double p, double delta) {
    if (delta == 0) return std::pow(h, p) / p;
    return (std::pow(h * h + delta * delta, p / 2) - std::pow(delta, p)) / p;
}

double flux_factor(double h, double p, double delta) {
    const double a = h * h + delta * delta;
    if (a == 0) return p == 2 ? 1.0 : 0.0;
    return std::pow(a, (p - 2) / 2);
}

void check_grid(const ProblemParams& params, const Grid& grid, const Eigen::VectorXd& values) {
    if (params.n != grid.ambient_dim()) throw DomainError("problem dimension differs from grid dimension");
    if (values.size() != grid.node_count()) throw DomainError("nodal vector has wrong length");
}

}  // namespace

Eigen::MatrixXd discrete_gradient(const DiscreteFunction& u) {
    const Grid& grid = u.grid();
    Eigen::MatrixXd out(grid.cell_dim(), grid.cell_count());
    for (Eigen::Index c = 0; c < grid.cell_count(); ++c) {
        const auto s = cell_state(grid, c, u.values());
        for (int d = 0; d < grid.cell_dim(); ++d) out(d, c) = s.g[d];
    }
    return out;
}

EnergyParts energy_parts(const ProblemParams& params, const Grid& grid, const Eigen::VectorXd& values) {
    check_grid(params, grid, values);
    const double pstar = params.critical_term ? params.pstar() : 0.0;
    EnergyParts e;
    for (Eigen::Index c = 0; c < grid.cell_count(); ++c) {
        const auto s = cell_state(grid, c, values);
        const double w = grid.weight(c);
        e.gradient += w * psi(grid.gradient_norm(s.g), params.p, params.flux_delta);
        if (s.mean_plus > 0) {
            e.lower += w * std::pow(s.mean_plus, params.q);
            if (params.critical_term) e.critical += w * std::pow(s.mean_plus, pstar);
        }
    }
    e.value = e.gradient - params.lambda / params.q * e.lower - (params.critical_term ? e.critical / pstar : 0.0);
    return e;
}

double energy_J(const ProblemParams& params, const DiscreteFunction& u) {
    return energy_parts(params, u.grid(), u.values()).value;
}

Moments moments(const ProblemParams& params, const Grid& grid, const Eigen::VectorXd& values) {
    check_grid(params, grid, values);
    const double pstar = params.pstar();
    Moments m;
    for (Eigen::Index c = 0; c < grid.cell_count(); ++c) {
        const auto s = cell_state(grid, c, values);
        const double w = grid.weight(c);
        m.gradient += w * std::pow(grid.gradient_norm(s.g), params.p);
        m.lp += w * std::pow(std::abs(s.mean), params.p);
        if (s.mean_plus > 0) {
            m.lower += w * std::pow(s.mean_plus, params.q);
            m.critical += w * std::pow(s.mean_plus, pstar);
        }
    }
    return m;
}

Eigen::VectorXd energy_gradient(const ProblemParams& params, const Grid& grid, const Eigen::VectorXd& values) {
    check_grid(params, grid, values);
    const double pstar = params.critical_term ? params.pstar() : 0.0;
    const int k = grid.vertices_per_cell();
    const int dim = grid.cell_dim();
    Eigen::VectorXd out = Eigen::VectorXd::Zero(grid.node_count());
    for (Eigen::Index c = 0; c < grid.cell_count(); ++c) {
        const auto s = cell_state(grid, c, values);
        const double w = grid.weight(c);
        const auto verts = grid.cell(c);
        const auto gop = grid.gradient_operator(c);
        double hg[2]{0, 0};
        grid.half_square_gradient(s.g, hg);
        const double f = flux_factor(grid.gradient_norm(s.g), params.p, params.flux_delta);
        double source = 0;
        if (s.mean_plus > 0) {
            source = params.lambda * std::pow(s.mean_plus, params.q - 1);
            if (params.critical_term) source += std::pow(s.mean_plus, pstar - 1);
        }
        for (int a = 0; a < k; ++a) {
            const int node = verts[static_cast<std::size_t>(a)];
            double contrib = 0;
            for (int d = 0; d < dim; ++d) contrib += gop(d, a) * hg[d];
            contrib *= f;
            if (values(node) > 0) contrib -= source * grid.centroid_weight(c, a);
            out(node) += w * contrib;
        }
    }
    for (Eigen::Index i = 0; i < out.size(); ++i)
        if (grid.pinned(i)) out(i) = 0;
    return out;
}

namespace {

SparseMatrix assemble_hessian(const ProblemParams& params, const Grid& grid, const Eigen::VectorXd& values,
                              double floor, bool with_sources) {
    const double pstar = params.critical_term ? params.pstar() : 0.0;
    const int k = grid.vertices_per_cell();
    const int dim = grid.cell_dim();
    const double p = params.p;
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(grid.cell_count() * k * k));
    for (Eigen::Index c = 0; c < grid.cell_count(); ++c) {
        const auto s = cell_state(grid, c, values);
        const double w = grid.weight(c);
        const auto verts = grid.cell(c);
        const auto gop = grid.gradient_operator(c);

        double hg[2]{0, 0}, m[4]{0, 0, 0, 0};
        grid.half_square_gradient(s.g, hg);
        grid.half_square_hessian(s.g, m);
        const double h = grid.gradient_norm(s.g);
        double a = h * h + params.flux_delta * params.flux_delta;
        if (floor > 0) a = std::max(a, floor * floor);
        if (a == 0) a = 1e-300;
        const double f1 = std::pow(a, (p - 2) / 2);
        const double f2 = (p - 2) * std::pow(a, (p - 4) / 2);
        Eigen::Matrix2d local_h;
        for (int i = 0; i < dim; ++i)
            for (int j = 0; j < dim; ++j) local_h(i, j) = f1 * m[i * dim + j] + (floor > 0 ? 0.0 : f2 * hg[i] * hg[j]);
        if (floor > 0) {
            // Keep the preconditioner positive definite for p < 2.
            const double scale = std::min(1.0, p - 1);
            for (int i = 0; i < dim; ++i)
                for (int j = 0; j < dim; ++j) local_h(i, j) *= scale;
        }
        const Eigen::MatrixXd block =
            w * gop.transpose() * local_h.topLeftCorner(dim, dim) * gop;

        double source = 0;
        if (with_sources && s.mean_plus > 0) {
            source = params.lambda * (params.q - 1) * std::pow(s.mean_plus, params.q - 2);
            if (params.critical_term) source += (pstar - 1) * std::pow(s.mean_plus, pstar - 2);
        }
        for (int i = 0; i < k; ++i) {
            const int ni = verts[static_cast<std::size_t>(i)];
            const int fi = grid.free_index(ni);
            if (fi < 0) continue;
            for (int j = 0; j < k; ++j) {
                const int nj = verts[static_cast<std::size_t>(j)];
                const int fj = grid.free_index(nj);
                if (fj < 0) continue;
                double v = block(i, j);
                if (source != 0 && values(ni) > 0 && values(nj) > 0)
                    v -= w * source * grid.centroid_weight(c, i) * grid.centroid_weight(c, j);
                trip.emplace_back(fi, fj, v);
            }
        }
    }
    SparseMatrix hm(grid.free_count(), grid.free_count());
    hm.setFromTriplets(trip.begin(), trip.end());
    return hm;
}

}  // namespace

SparseMatrix energy_hessian(const ProblemParams& params, const Grid& grid, const Eigen::VectorXd& values) {
    check_grid(params, grid, values);
    return assemble_hessian(params, grid, values, 0.0, true);
}

SparseMatrix gradient_term_hessian(const ProblemParams& params, const Grid& grid, const Eigen::VectorXd& values,
                                   double floor) {
    check_grid(params, grid, values);
    return assemble_hessian(params, grid, values, floor, false);
}

double weak_residual(const ProblemParams& params, const DiscreteFunction& u, const DiscreteFunction& v) {
    if (&u.grid() != &v.grid()) throw DomainError("test function lives on another grid");
    return energy_gradient(params, u.grid(), u.values()).dot(v.values());
}

double residual_norm(const ProblemParams& params, const Grid& grid, const Eigen::VectorXd& values) {
    const Eigen::VectorXd r = grid.restrict_to_free(energy_gradient(params, grid, values));
    return std::sqrt(std::max(0.0, r.dot(grid.solve_stiffness(r))));
}

double residual_norm(const ProblemParams& params, const DiscreteFunction& u) {
    return residual_norm(params, u.grid(), u.values());
}

}  // namespace anisobn
