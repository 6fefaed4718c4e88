#include "anisobn/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>

namespace anisobn {

using nlohmann::json;

namespace {

void check_keys(const json& j, const std::string& where, const std::set<std::string>& allowed) {
    if (!j.is_object()) throw ConfigError(where + " must be an object");
    for (const auto& [key, value] : j.items())
        if (!allowed.contains(key)) throw ConfigError("unknown key '" + key + "' in " + where);
}

template <typename T>
void read(const json& j, const char* key, T& out, const std::string& where) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception&) {
        throw ConfigError(where + "." + key + " has the wrong type");
    }
}

template <typename T>
void read(const json& j, const char* key, std::optional<T>& out, const std::string& where) {
    if (!j.contains(key) || j.at(key).is_null()) return;
    T v{};
    read(j, key, v, where);
    out = v;
}

void require(bool ok, const std::string& message) {
    if (!ok) throw ConfigError(message);
}

}  // namespace

Norm NormSpec::build() const {
    auto matrix_of = [&] {
        require(!matrix.empty(), "norm.matrix is required for " + family);
        const auto d = static_cast<Eigen::Index>(matrix.size());
        Matrix a(d, d);
        for (Eigen::Index i = 0; i < d; ++i) {
            require(static_cast<Eigen::Index>(matrix[static_cast<std::size_t>(i)].size()) == d, "norm.matrix must be square");
            for (Eigen::Index k = 0; k < d; ++k) a(i, k) = matrix[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)];
        }
        return a;
    };
    try {
        Norm h = [&] {
            if (family == "euclidean") return Norm::euclidean(dim);
            if (family == "ellipsoid") return Norm::ellipsoid(matrix_of());
            if (family == "shifted_ellipsoid") {
                Vector b(static_cast<Eigen::Index>(shift.size()));
                for (std::size_t i = 0; i < shift.size(); ++i) b(static_cast<Eigen::Index>(i)) = shift[i];
                return Norm::shifted_ellipsoid(matrix_of(), b);
            }
            if (family == "lr_regularized") return Norm::lr_regularized(dim, r, delta);
            throw ConfigError("unknown norm family '" + family + "'");
        }();
        return numeric_dual ? h.with_numeric_dual() : h;
    } catch (const DomainError& e) {
        throw ConfigError(std::string("norm: ") + e.what());
    }
}

ExperimentConfig parse_config(const json& j) {
    check_keys(j, "config",
               {"schema_version", "norm", "problem", "domain", "grid", "lambda_sweep", "epsilon_sweep", "tolerances",
                "samples", "max_iter", "eigen_starts", "seed_path", "bubble_epsilon", "seed", "output_dir"});
    ExperimentConfig c;
    read(j, "schema_version", c.schema_version, "config");
    require(c.schema_version == 1, "unsupported schema_version " + std::to_string(c.schema_version));

    if (j.contains("norm")) {
        const json& s = j.at("norm");
        check_keys(s, "norm", {"family", "dim", "matrix", "shift", "r", "delta", "dual"});
        read(s, "family", c.norm.family, "norm");
        read(s, "dim", c.norm.dim, "norm");
        read(s, "matrix", c.norm.matrix, "norm");
        read(s, "shift", c.norm.shift, "norm");
        read(s, "r", c.norm.r, "norm");
        read(s, "delta", c.norm.delta, "norm");
        std::string dual = "closed_form";
        read(s, "dual", dual, "norm");
        require(dual == "closed_form" || dual == "numeric", "norm.dual must be closed_form or numeric");
        c.norm.numeric_dual = dual == "numeric";
        if (!c.norm.matrix.empty()) c.norm.dim = static_cast<int>(c.norm.matrix.size());
    }
    c.n = c.norm.dim;
    if (j.contains("problem")) {
        const json& s = j.at("problem");
        check_keys(s, "problem", {"n", "p", "q", "lambda", "lambda_factor", "audit_lambdas"});
        int n = c.n;
        read(s, "n", n, "problem");
        require(n == c.n, "problem.n must equal the norm dimension");
        read(s, "p", c.p, "problem");
        c.q = c.p;
        read(s, "q", c.q, "problem");
        read(s, "lambda", c.lambda, "problem");
        read(s, "lambda_factor", c.lambda_factor, "problem");
        read(s, "audit_lambdas", c.audit_lambdas, "problem");
        require(!(c.lambda && c.lambda_factor), "give problem.lambda or problem.lambda_factor, not both");
    }
    require(c.n >= 2, "dimension must be at least 2");
    require(c.p > 1 && c.p < c.n, "need 1 < p < n");
    require(c.q >= c.p && c.q < ProblemParams{c.n, c.p, c.q, 0}.pstar(), "need p <= q < p*");
    require(!c.lambda_factor || c.q == c.p, "lambda_factor needs q = p");

    if (j.contains("domain")) {
        const json& s = j.at("domain");
        check_keys(s, "domain", {"type", "radius", "x0", "x1", "y0", "y1"});
        read(s, "type", c.domain.type, "domain");
        read(s, "radius", c.domain.radius, "domain");
        read(s, "x0", c.domain.rectangle.x0, "domain");
        read(s, "x1", c.domain.rectangle.x1, "domain");
        read(s, "y0", c.domain.rectangle.y0, "domain");
        read(s, "y1", c.domain.rectangle.y1, "domain");
    }
    require(c.domain.type == "wulff_ball" || c.domain.type == "rectangle", "domain.type must be wulff_ball or rectangle");
    require(c.domain.radius > 0, "domain.radius must be positive");
    if (c.domain.type == "rectangle") {
        const Rectangle& r = c.domain.rectangle;
        require(c.n == 2, "rectangle domains need n = 2");
        require(r.x1 > r.x0 && r.y1 > r.y0, "degenerate rectangle");
    }

    if (j.contains("grid")) {
        const json& s = j.at("grid");
        check_keys(s, "grid", {"cells", "center_spacing", "boundary_spacing", "growth", "m1", "m2"});
        read(s, "cells", c.grid.cells, "grid");
        read(s, "center_spacing", c.grid.center_spacing, "grid");
        read(s, "boundary_spacing", c.grid.boundary_spacing, "grid");
        read(s, "growth", c.grid.growth, "grid");
        read(s, "m1", c.grid.m1, "grid");
        read(s, "m2", c.grid.m2, "grid");
    }
    require(c.grid.cells >= 3 && c.grid.m1 >= 3 && c.grid.m2 >= 3, "grid too coarse");
    require(c.grid.center_spacing >= 0 && c.grid.boundary_spacing >= 0 && c.grid.growth > 1, "bad grid grading");

    if (j.contains("lambda_sweep")) {
        const json& s = j.at("lambda_sweep");
        check_keys(s, "lambda_sweep", {"min", "max", "points", "bisection_steps"});
        read(s, "min", c.sweep.min, "lambda_sweep");
        read(s, "max", c.sweep.max, "lambda_sweep");
        read(s, "points", c.sweep.points, "lambda_sweep");
        read(s, "bisection_steps", c.sweep.bisection_steps, "lambda_sweep");
    }
    require(c.sweep.points >= 2 && c.sweep.bisection_steps >= 0, "lambda_sweep needs >= 2 points");
    require(!(c.sweep.min && c.sweep.max) || *c.sweep.max > *c.sweep.min, "lambda_sweep.max must exceed min");

    if (j.contains("epsilon_sweep")) {
        const json& s = j.at("epsilon_sweep");
        check_keys(s, "epsilon_sweep", {"k_min", "k_max", "q"});
        read(s, "k_min", c.epsilon.k_min, "epsilon_sweep");
        read(s, "k_max", c.epsilon.k_max, "epsilon_sweep");
        read(s, "q", c.epsilon.q, "epsilon_sweep");
    }
    require(c.epsilon.k_max - c.epsilon.k_min >= 3 && c.epsilon.k_min >= 0, "epsilon_sweep needs at least 4 points");
    require(c.epsilon.q >= c.p && c.epsilon.q < ProblemParams{c.n, c.p, c.p, 0}.pstar(),
            "epsilon_sweep.q must lie in [p, p*)");

    if (j.contains("tolerances")) {
        const json& s = j.at("tolerances");
        check_keys(s, "tolerances", {"eigen", "solve", "fit", "log_coefficient", "pohozaev"});
        read(s, "eigen", c.tol.eigen, "tolerances");
        read(s, "solve", c.tol.solve, "tolerances");
        read(s, "fit", c.tol.fit, "tolerances");
        read(s, "log_coefficient", c.tol.log_coefficient, "tolerances");
        read(s, "pohozaev", c.tol.pohozaev, "tolerances");
    }
    require(c.tol.eigen > 0 && c.tol.solve > 0 && c.tol.fit > 0 && c.tol.log_coefficient > 0 && c.tol.pohozaev > 0,
            "tolerances must be positive");

    read(j, "samples", c.samples, "config");
    read(j, "max_iter", c.max_iter, "config");
    read(j, "eigen_starts", c.eigen_starts, "config");
    read(j, "seed_path", c.seed_path, "config");
    read(j, "bubble_epsilon", c.bubble_epsilon, "config");
    read(j, "seed", c.seed, "config");
    read(j, "output_dir", c.output_dir, "config");
    require(c.samples >= 1 && c.max_iter >= 1 && c.eigen_starts >= 1, "samples, max_iter, eigen_starts must be >= 1");
    require(c.seed_path == "eigen" || c.seed_path == "bubble", "seed_path must be eigen or bubble");
    require(c.bubble_epsilon > 0, "bubble_epsilon must be positive");

    (void)c.norm.build();  // surfaces norm errors before any work
    return c;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path);
    json j;
    try {
        j = json::parse(in, nullptr, true, true);  // comments allowed
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    return parse_config(j);
}

json to_json(const ExperimentConfig& c) {
    json norm{{"family", c.norm.family}, {"dim", c.norm.dim}, {"dual", c.norm.numeric_dual ? "numeric" : "closed_form"}};
    if (!c.norm.matrix.empty()) norm["matrix"] = c.norm.matrix;
    if (!c.norm.shift.empty()) norm["shift"] = c.norm.shift;
    if (c.norm.family == "lr_regularized") {
        norm["r"] = c.norm.r;
        norm["delta"] = c.norm.delta;
    }
    json problem{{"n", c.n}, {"p", c.p}, {"q", c.q}, {"audit_lambdas", c.audit_lambdas}};
    if (c.lambda) problem["lambda"] = *c.lambda;
    if (c.lambda_factor) problem["lambda_factor"] = *c.lambda_factor;
    json domain{{"type", c.domain.type}};
    if (c.domain.type == "wulff_ball") domain["radius"] = c.domain.radius;
    else domain.update({{"x0", c.domain.rectangle.x0}, {"x1", c.domain.rectangle.x1}, {"y0", c.domain.rectangle.y0},
                        {"y1", c.domain.rectangle.y1}});
    json sweep{{"points", c.sweep.points}, {"bisection_steps", c.sweep.bisection_steps}};
    if (c.sweep.min) sweep["min"] = *c.sweep.min;
    if (c.sweep.max) sweep["max"] = *c.sweep.max;
    return json{{"schema_version", c.schema_version},
                {"norm", norm},
                {"problem", problem},
                {"domain", domain},
                {"grid",
                 {{"cells", c.grid.cells},
                  {"center_spacing", c.grid.center_spacing},
                  {"boundary_spacing", c.grid.boundary_spacing},
                  {"growth", c.grid.growth},
                  {"m1", c.grid.m1},
                  {"m2", c.grid.m2}}},
                {"lambda_sweep", sweep},
                {"epsilon_sweep", {{"k_min", c.epsilon.k_min}, {"k_max", c.epsilon.k_max}, {"q", c.epsilon.q}}},
                {"tolerances",
                 {{"eigen", c.tol.eigen},
                  {"solve", c.tol.solve},
                  {"fit", c.tol.fit},
                  {"log_coefficient", c.tol.log_coefficient},
                  {"pohozaev", c.tol.pohozaev}}},
                {"samples", c.samples},
                {"max_iter", c.max_iter},
                {"eigen_starts", c.eigen_starts},
                {"seed_path", c.seed_path},
                {"bubble_epsilon", c.bubble_epsilon},
                {"seed", c.seed},
                {"output_dir", c.output_dir}};
}

std::string config_hash(const ExperimentConfig& c) {
    json j = to_json(c);
    j.erase("output_dir");  // where results go does not change them
    const std::string text = j.dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace anisobn
