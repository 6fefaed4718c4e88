#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Sparse>

#include "anisobn/anisotropy.hpp"
#include "anisobn/bubbles.hpp"

namespace anisobn {

using SparseMatrix = Eigen::SparseMatrix<double>;

/// Exponents, coupling and regularization defining the energy
/// J(u) = (1/p) int H(grad u)^p - (lambda/q) int (u+)^q - (1/p*) int (u+)^{p*}.
struct ProblemParams {
    int n{3};
    double p{2};
    double q{2};
    double lambda{0};
    double flux_delta{1e-8};
    bool critical_term{true};

    [[nodiscard]] double pstar() const { return critical_exponent(n, p); }
    /// Throws DomainError unless 1 < p < n, p <= q < p* (q >= 1 when the critical term is off).
    void validate() const;
};

/// Conforming P1 discretization on simplices (intervals in the radial variable or
/// triangles in the plane) with one gradient per cell and one-point quadrature at the
/// centroid of the cell measure, exact for linear functions.
class Grid {
public:
    virtual ~Grid() = default;
    Grid(const Grid&) = delete;
    Grid& operator=(const Grid&) = delete;

    [[nodiscard]] int ambient_dim() const noexcept { return ambient_dim_; }
    [[nodiscard]] int cell_dim() const noexcept { return cell_dim_; }
    [[nodiscard]] int vertices_per_cell() const noexcept { return cell_dim_ + 1; }
    [[nodiscard]] Eigen::Index node_count() const noexcept { return coords_.cols(); }
    [[nodiscard]] Eigen::Index cell_count() const noexcept { return static_cast<Eigen::Index>(weights_.size()); }
    [[nodiscard]] Eigen::Index free_count() const noexcept { return static_cast<Eigen::Index>(free_nodes_.size()); }
    [[nodiscard]] bool radial() const noexcept { return cell_dim_ == 1; }

    /// Node coordinates, one column per node (the radius in radial mode).
    [[nodiscard]] const Eigen::MatrixXd& coordinates() const noexcept { return coords_; }
    [[nodiscard]] std::span<const int> cell(Eigen::Index c) const {
        return {cells_.data() + c * vertices_per_cell(), static_cast<std::size_t>(vertices_per_cell())};
    }
    [[nodiscard]] double weight(Eigen::Index c) const { return weights_[static_cast<std::size_t>(c)]; }
    /// Barycentric coordinate of vertex a at the centroid of the cell measure
    /// (rho^{n-1} d rho in radial mode, area on triangles).
    [[nodiscard]] double centroid_weight(Eigen::Index c, int a) const {
        return centroid_[static_cast<std::size_t>(c * vertices_per_cell() + a)];
    }
    /// cell_dim x (cell_dim + 1) matrix mapping vertex values to the cell gradient.
    [[nodiscard]] Eigen::Map<const Eigen::MatrixXd> gradient_operator(Eigen::Index c) const {
        const int k = vertices_per_cell();
        return {grad_ops_.data() + c * cell_dim_ * k, cell_dim_, k};
    }
    [[nodiscard]] bool pinned(Eigen::Index node) const { return free_index_[static_cast<std::size_t>(node)] < 0; }
    [[nodiscard]] int free_index(Eigen::Index node) const { return free_index_[static_cast<std::size_t>(node)]; }
    [[nodiscard]] std::span<const int> free_nodes() const noexcept { return free_nodes_; }
    [[nodiscard]] double domain_volume() const noexcept { return volume_; }
    [[nodiscard]] const Norm& norm() const noexcept { return norm_; }
    /// Largest cell diameter.
    [[nodiscard]] double mesh_size() const noexcept { return mesh_size_; }

    /// Anisotropic length of a cell gradient and the derivatives of its half square.
    [[nodiscard]] double gradient_norm(const double* g) const;
    void half_square_gradient(const double* g, double* out) const;
    void half_square_hessian(const double* g, double* out) const;  // row-major cell_dim^2

    /// Euclidean Dirichlet stiffness on free nodes and its factorization.
    [[nodiscard]] const SparseMatrix& stiffness() const noexcept { return stiffness_; }
    [[nodiscard]] Eigen::VectorXd solve_stiffness(const Eigen::VectorXd& rhs) const;

    [[nodiscard]] Eigen::VectorXd restrict_to_free(const Eigen::VectorXd& full) const;
    [[nodiscard]] Eigen::VectorXd extend_from_free(const Eigen::VectorXd& free) const;

protected:
    Grid(Norm norm, int ambient_dim, int cell_dim) : norm_(std::move(norm)), ambient_dim_(ambient_dim), cell_dim_(cell_dim) {}
    /// Builds free-node maps and the stiffness factorization once cells are in place.
    void finalize(const std::vector<bool>& pinned);

    Norm norm_;
    int ambient_dim_;
    int cell_dim_;
    Eigen::MatrixXd coords_;
    std::vector<int> cells_;
    std::vector<double> weights_;
    std::vector<double> grad_ops_;
    std::vector<double> centroid_;
    double volume_{0};
    double mesh_size_{0};
    double upslope_scale_{1};  // squared orientation factor for increasing radial profiles

private:
    std::vector<int> free_index_;
    std::vector<int> free_nodes_;
    SparseMatrix stiffness_;
    std::shared_ptr<Eigen::SimplicialLDLT<SparseMatrix>> stiffness_factor_;
};

struct RadialMeshSpec {
    int cells{2000};               // uniform cells before grading
    double center_spacing{0};      // smallest cell at the centre, 0 for none
    double boundary_spacing{0};    // smallest cell at the boundary, 0 for none
    double growth{1.05};           // ratio between neighbouring graded cells
};

/// H-radial functions u = f(H0hat(x)) on the Wulff ball {H0hat < radius}.
class RadialGrid final : public Grid {
public:
    static std::shared_ptr<const RadialGrid> create(const Norm& norm, double radius, const RadialMeshSpec& spec,
                                                    double p = 2.0);
    static std::shared_ptr<const RadialGrid> create(const Norm& norm, const WulffGeometry& geometry, double radius,
                                                    const RadialMeshSpec& spec);

    [[nodiscard]] double radius() const noexcept { return radius_; }
    [[nodiscard]] const WulffGeometry& geometry() const noexcept { return geometry_; }
    [[nodiscard]] double omega() const noexcept { return geometry_.omega; }
    [[nodiscard]] std::span<const double> nodes() const { return {coords_.data(), static_cast<std::size_t>(coords_.cols())}; }

private:
    RadialGrid(const Norm& norm, const WulffGeometry& geometry, double radius, const RadialMeshSpec& spec);
    double radius_;
    WulffGeometry geometry_;
};

/// Rectangle split into (m1 x m2) squares, two triangles each; boundary ring pinned.
class TensorGrid2D final : public Grid {
public:
    static std::shared_ptr<const TensorGrid2D> create(const Norm& norm, const Rectangle& rect, int m1, int m2);

    [[nodiscard]] const Rectangle& rectangle() const noexcept { return rect_; }
    [[nodiscard]] int m1() const noexcept { return m1_; }
    [[nodiscard]] int m2() const noexcept { return m2_; }
    [[nodiscard]] Eigen::Index node(int i, int j) const { return static_cast<Eigen::Index>(j) * (m1_ + 1) + i; }

private:
    TensorGrid2D(const Norm& norm, const Rectangle& rect, int m1, int m2);
    Rectangle rect_;
    int m1_, m2_;
};

/// Nodal values of a discrete W^{1,p}_0 function; zero at pinned nodes.
class DiscreteFunction {
public:
    DiscreteFunction(std::shared_ptr<const Grid> grid, Eigen::VectorXd values);

    static DiscreteFunction zero(std::shared_ptr<const Grid> grid);
    /// Samples f at node coordinates and zeroes pinned nodes.
    static DiscreteFunction sample(std::shared_ptr<const Grid> grid,
                                   const std::function<double(const Eigen::VectorXd&)>& f);
    static DiscreteFunction from_free(std::shared_ptr<const Grid> grid, const Eigen::VectorXd& free_values);

    [[nodiscard]] const Grid& grid() const noexcept { return *grid_; }
    [[nodiscard]] const std::shared_ptr<const Grid>& grid_ptr() const noexcept { return grid_; }
    [[nodiscard]] const Eigen::VectorXd& values() const noexcept { return values_; }
    [[nodiscard]] Eigen::VectorXd free_values() const { return grid_->restrict_to_free(values_); }
    /// Minimum over free nodes.
    [[nodiscard]] double interior_min() const;

    DiscreteFunction scaled(double t) const { return {grid_, t * values_}; }

private:
    std::shared_ptr<const Grid> grid_;
    Eigen::VectorXd values_;
};

/// Cell gradients, one column per cell; linear in u.
Eigen::MatrixXd discrete_gradient(const DiscreteFunction& u);

struct EnergyParts {
    double gradient{0};   // int Psi_delta(grad u), Psi_delta -> H^p/p as delta -> 0
    double lower{0};      // int (u+)^q
    double critical{0};   // int (u+)^{p*}
    double value{0};      // J(u)
};

EnergyParts energy_parts(const ProblemParams& params, const Grid& grid, const Eigen::VectorXd& values);
double energy_J(const ProblemParams& params, const DiscreteFunction& u);

/// dJ/du_i for every node (pinned entries are set to 0).
Eigen::VectorXd energy_gradient(const ProblemParams& params, const Grid& grid, const Eigen::VectorXd& values);
/// Second derivative of J restricted to free nodes.
SparseMatrix energy_hessian(const ProblemParams& params, const Grid& grid, const Eigen::VectorXd& values);
/// Hessian of the gradient term alone with gradients floored at `floor`, used as preconditioner.
SparseMatrix gradient_term_hessian(const ProblemParams& params, const Grid& grid, const Eigen::VectorXd& values,
                                   double floor);

double weak_residual(const ProblemParams& params, const DiscreteFunction& u, const DiscreteFunction& v);
/// Dual norm of J'(u) against the Euclidean Dirichlet energy of test functions.
double residual_norm(const ProblemParams& params, const DiscreteFunction& u);
double residual_norm(const ProblemParams& params, const Grid& grid, const Eigen::VectorXd& values);

/// int H(grad u)^p, int |u|^p, int (u+)^q and int (u+)^{p*} without regularization.
struct Moments {
    double gradient{0};
    double lp{0};
    double lower{0};
    double critical{0};
};
Moments moments(const ProblemParams& params, const Grid& grid, const Eigen::VectorXd& values);

}  // namespace anisobn
