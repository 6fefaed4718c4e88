#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "anisobn/anisotropy.hpp"
#include "anisobn/bubbles.hpp"
#include "anisobn/mesh.hpp"

namespace anisobn {

/// Raised for malformed or out-of-range experiment configurations.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct NormSpec {
    std::string family{"euclidean"};
    int dim{3};
    std::vector<std::vector<double>> matrix;
    std::vector<double> shift;
    double r{2};
    double delta{0};
    bool numeric_dual{false};

    [[nodiscard]] Norm build() const;
};

struct DomainSpec {
    std::string type{"wulff_ball"};
    double radius{1};
    Rectangle rectangle{-1, 1, -1, 1};
};

struct GridSpec {
    int cells{2000};
    double center_spacing{0};
    double boundary_spacing{0};
    double growth{1.05};
    int m1{48};
    int m2{48};
};

struct SweepSpec {
    std::optional<double> min;  // defaults depend on the regime
    std::optional<double> max;
    int points{9};
    int bisection_steps{6};
};

struct EpsilonSweep {
    int k_min{4};
    int k_max{16};
    double q{2.5};
};

struct Tolerances {
    double eigen{1e-8};
    double solve{1e-6};
    double fit{0.05};
    double log_coefficient{0.05};
    double pohozaev{0.01};
};

/// One experiment: every subcommand reads the sections it needs.
struct ExperimentConfig {
    int schema_version{1};
    NormSpec norm;
    int n{3};
    double p{2};
    double q{2};
    std::optional<double> lambda;         // absolute value
    std::optional<double> lambda_factor;  // multiple of lambda1 when q = p
    std::vector<double> audit_lambdas{0.0, -1.0};
    DomainSpec domain;
    GridSpec grid;
    SweepSpec sweep;
    EpsilonSweep epsilon;
    Tolerances tol;
    int samples{1000};
    int max_iter{200000};
    int eigen_starts{3};
    std::string seed_path{"eigen"};  // "eigen" or "bubble"
    double bubble_epsilon{1e-4};
    std::uint64_t seed{1};
    std::string output_dir{"outputs"};

    [[nodiscard]] ProblemParams params(double lambda_value) const { return ProblemParams{n, p, q, lambda_value}; }
};

/// Parses and validates; throws ConfigError with the offending key.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);
nlohmann::json to_json(const ExperimentConfig& c);
/// FNV-1a 64 of the canonical (sorted-key, compact) JSON form, as 16 hex digits.
std::string config_hash(const ExperimentConfig& c);

}  // namespace anisobn
