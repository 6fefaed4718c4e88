#include "anisobn/runner.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <sstream>
#include <thread>

#include "anisobn/eigenvalue.hpp"
#include "anisobn/mountain_pass.hpp"
#include "anisobn/pohozaev.hpp"

namespace anisobn::runner {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void parallel_for(int count, int jobs, const std::function<void(int)>& body) {
    const int workers = std::clamp(jobs, 1, std::max(count, 1));
    if (workers == 1) {
        for (int i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (int i = next++; i < count; i = next++) {
                try {
                    body(i);
                } catch (...) {
                    std::lock_guard lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                }
            }
        });
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);
}

std::string number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

class Csv {
public:
    explicit Csv(const std::vector<std::string>& header) {
        for (std::size_t i = 0; i < header.size(); ++i) out_ << (i ? "," : "") << header[i];
        out_ << '\n';
    }
    template <typename... Ts>
    void row(const Ts&... cells) {
        bool first = true;
        ((out_ << (first ? "" : ",") << cell(cells), first = false), ...);
        out_ << '\n';
    }
    [[nodiscard]] std::string str() const { return out_.str(); }

private:
    static std::string cell(double v) { return number(v); }
    static std::string cell(int v) { return std::to_string(v); }
    static std::string cell(bool v) { return v ? "1" : "0"; }
    static std::string cell(const std::string& v) { return v; }
    std::ostringstream out_;
};

struct Artifacts {
    fs::path dir;
    std::vector<std::string> written;

    void text(const std::string& name, const std::string& content) {
        write_atomic(dir / name, content);
        written.push_back((dir.filename() / name).generic_string());
    }
    void json_file(const std::string& name, const json& j) { text(name, j.dump(2) + "\n"); }
};

TaskOutcome finish(Artifacts& a, int code, std::string status, std::string message = {}) {
    return {code, std::move(status), std::move(message), a.written};
}

// ---------------------------------------------------------------------------
// Shared experiment plumbing

std::shared_ptr<const Grid> make_grid(const ExperimentConfig& c, const Norm& h) {
    if (c.domain.type == "rectangle") return TensorGrid2D::create(h, c.domain.rectangle, c.grid.m1, c.grid.m2);
    return RadialGrid::create(h, c.domain.radius,
                              RadialMeshSpec{c.grid.cells, c.grid.center_spacing, c.grid.boundary_spacing, c.grid.growth},
                              c.p);
}

struct Context {
    Norm norm;
    std::shared_ptr<const Grid> grid;
    EigenResult eig;
    double sobolev;
    double threshold;
    double cap_lambda;
};

Context make_context(const ExperimentConfig& c) {
    Norm h = c.norm.build();
    auto grid = make_grid(c, h);
    auto eig = solve_lambda1(ProblemParams{c.n, c.p, c.p, 0.0}, default_eigen_init(grid), c.tol.eigen);
    const double s = sobolev_constant(h, c.n, c.p);
    return {h, grid, std::move(eig), s, sobolev_threshold(s, c.n, c.p), capital_lambda(s, grid->domain_volume(), c.n, c.p)};
}

DiscreteFunction path_seed(const ExperimentConfig& c, const Context& ctx) {
    if (c.seed_path == "eigen") return ctx.eig.u1;
    if (c.domain.type == "rectangle") {
        const TruncatedBubble tb = truncated_bubble(ctx.norm, c.p, c.bubble_epsilon, c.domain.rectangle);
        const Norm& h = ctx.norm;
        return DiscreteFunction::sample(ctx.grid, [&](const Eigen::VectorXd& x) {
            return tb.v(h.dual_value(Vector(-x)));
        });
    }
    const TruncatedBubble tb = truncated_bubble(ctx.norm, c.p, c.bubble_epsilon, c.domain.radius);
    return DiscreteFunction::sample(ctx.grid, [&](const Eigen::VectorXd& x) { return tb.v(x(0)); });
}

double resolve_lambda(const ExperimentConfig& c, const Context& ctx) {
    if (c.lambda) return *c.lambda;
    if (c.lambda_factor) return *c.lambda_factor * ctx.eig.lambda1;
    throw ConfigError("problem.lambda or problem.lambda_factor is required");
}

struct SolveRun {
    ProblemParams params;
    MPResult result;
    bool converged_error{false};  // iteration budget ran out
};

SolveRun run_solver(const ExperimentConfig& c, const Context& ctx, double lambda, bool enforce, bool require_below) {
    const ProblemParams params = c.params(lambda);
    MPOptions opt;
    opt.tol = c.tol.solve;
    opt.max_iter = c.max_iter;
    opt.threshold = ctx.threshold;
    opt.lambda1 = ctx.eig.lambda1;
    opt.enforce_preconditions = enforce;
    opt.require_path_below = require_below;
    opt.seed = c.seed;
    try {
        return {params, mp_solve(params, path_seed(c, ctx), opt)};
    } catch (const ConvergenceError<MPResult>& e) {
        return {params, e.best(), true};
    }
}

json path_json(const PathReport& r) {
    json j{{"t_star", r.t_star}, {"sup_energy", r.sup_energy}, {"threshold", r.threshold}, {"below", r.below},
           {"lambda", r.lambda}, {"t_bar", r.t_bar}};
    if (!std::isnan(r.epsilon)) j["epsilon"] = r.epsilon;
    if (!std::isnan(r.bound)) j["bound"] = r.bound;
    return j;
}

json audit_json(const PohozaevAudit& a) {
    return {{"interior_terms", a.interior_terms}, {"boundary_term", a.boundary_term}, {"lambda_side", a.lambda_side},
            {"residual", a.residual},             {"full_residual", a.full_residual}, {"test_defect", a.test_defect},
            {"lp_norm", a.lp_norm},               {"star_shaped", a.star_shaped}};
}

json result_json(const SolveRun& run) {
    const MPResult& r = run.result;
    return {{"lambda", run.params.lambda},
            {"n", run.params.n},
            {"p", run.params.p},
            {"q", run.params.q},
            {"classification", to_string(r.classification)},
            {"level", r.level},
            {"residual", r.residual},
            {"positive", r.positive},
            {"iterations", r.iterations},
            {"threshold", r.threshold},
            {"monotone", r.monotone},
            {"iteration_budget_exhausted", run.converged_error},
            {"note", r.note},
            {"path", path_json(r.path)}};
}

std::string solution_csv(const DiscreteFunction& u) {
    const Grid& g = u.grid();
    std::vector<std::string> header = g.radial() ? std::vector<std::string>{"rho", "u"}
                                                 : std::vector<std::string>{"x", "y", "u"};
    Csv csv(header);
    for (Eigen::Index i = 0; i < g.node_count(); ++i) {
        if (g.radial()) csv.row(g.coordinates()(0, i), u.values()(i));
        else csv.row(g.coordinates()(0, i), g.coordinates()(1, i), u.values()(i));
    }
    return csv.str();
}

// ---------------------------------------------------------------------------
// Bubble asymptotics

constexpr std::size_t fit_points = 8;

struct Law {
    std::string name;
    AsymptoticLaw law;
    double expected;  // exponent, or |log eps| coefficient for the log law
    bool checked;
};

}  // namespace

void write_atomic(const fs::path& path, const std::string& content) {
    fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out << content;
        if (!out.flush()) throw std::runtime_error("write failed for " + tmp.string());
    }
    fs::rename(tmp, path);
}

TaskOutcome cmd_verify_norms(const ExperimentConfig& c, const fs::path& task_dir, int) {
    Artifacts out{task_dir, {}};
    const Norm h = c.norm.build();
    const AxiomReport r = verify_norm_axioms(h, c.samples, c.seed);
    out.json_file("report.json", {{"family", r.family},
                                  {"dual_mode", r.dual_mode},
                                  {"samples", r.samples},
                                  {"homogeneity", r.homogeneity},
                                  {"triangle", r.triangle},
                                  {"lipschitz", r.lipschitz},
                                  {"euler", r.euler},
                                  {"gradient_modulus", r.gradient_modulus},
                                  {"gradient_fd", r.gradient_fd},
                                  {"dual_homogeneity", r.dual_homogeneity},
                                  {"dual_triangle", r.dual_triangle},
                                  {"duality_grad_dual", r.duality_grad_dual},
                                  {"duality_dual_grad", r.duality_dual_grad},
                                  {"ellipticity_lower", r.ellipticity.lower},
                                  {"ellipticity_upper", r.ellipticity.upper},
                                  {"uniform_convexity_flag", r.ellipticity.flagged},
                                  {"worst_identity", r.worst_identity()},
                                  {"passes", r.passes()}});
    if (r.passes()) return finish(out, Ok, "passed");
    return finish(out, ToleranceFailure, "failed",
                  r.ellipticity.flagged ? "uniform convexity flagged" : "axiom residual above tolerance");
}

TaskOutcome cmd_bubble_asymptotics(const ExperimentConfig& c, const fs::path& task_dir, int jobs) {
    Artifacts out{task_dir, {}};
    const Norm h = c.norm.build();
    const double n = c.n, p = c.p, q = c.epsilon.q;
    const WulffGeometry geometry = wulff_geometry(h, p);
    const int count = c.epsilon.k_max - c.epsilon.k_min + 1;
    std::vector<QuadReport> rows(static_cast<std::size_t>(count));
    parallel_for(count, jobs, [&](int i) {
        const double eps = std::ldexp(1.0, -(c.epsilon.k_min + i));
        const TruncatedBubble tb = c.domain.type == "rectangle" ? truncated_bubble(h, p, eps, c.domain.rectangle)
                                                                : truncated_bubble(h, p, eps, c.domain.radius);
        rows[static_cast<std::size_t>(i)] = bubble_norms(tb, q, &geometry);
    });
    Csv csv({"epsilon", "grad_Hp", "lpstar", "lp", "lq", "quad_err"});
    std::vector<double> eps, grad, crit, lp, lq;
    for (const auto& r : rows) {
        csv.row(r.epsilon, r.gradHp, r.lpstar, r.lp, r.lq, r.quad_err);
        eps.push_back(r.epsilon);
        grad.push_back(r.gradHp);
        crit.push_back(r.lpstar);
        lp.push_back(r.lp);
        lq.push_back(r.lq);
    }
    out.text("sweep.csv", csv.str());

    const double q_exponent = n * (p - 1) / p - q * (n - p) / p;
    std::vector<std::pair<Law, const std::vector<double>*>> laws{
        {{"grad_Hp", AsymptoticLaw::PowerPlusO1, -(n - p) / p, true}, &grad},
        {{"lpstar", AsymptoticLaw::PowerPlusO1, -n / p, true}, &crit},
        {{"lq", AsymptoticLaw::PowerPlusO1, q_exponent, q_exponent < 0}, &lq}};
    if (std::abs(n - p * p) < 1e-12)
        laws.push_back({{"lp", AsymptoticLaw::Log, geometry.omega * (p - 1) / p, true}, &lp});
    else if (n > p * p)
        laws.push_back({{"lp", AsymptoticLaw::PowerPlusO1, -(n - p * p) / p, true}, &lp});
    else
        laws.push_back({{"lp", AsymptoticLaw::PowerPlusO1, 0.0, false}, &lp});  // bounded

    json fits = json::object();
    bool ok = true;
    for (const auto& [law, values] : laws) {
        // Only the smallest eps separate the leading term from the O(1) remainder.
        const std::size_t skip = eps.size() > fit_points ? eps.size() - fit_points : 0;
        const FitReport f = fit_asymptotic(std::span(eps).subspan(skip), std::span(*values).subspan(skip), law.law);
        json entry{{"law", to_string(f.law)},   {"exponent", f.exponent}, {"coefficient", f.coefficient},
                   {"constant", f.constant},    {"residual", f.residual}, {"points", f.points},
                   {"expected", law.expected},  {"checked", law.checked}};
        if (law.checked) {
            const bool match = law.law == AsymptoticLaw::Log
                                   ? std::abs(f.coefficient / law.expected - 1) <= c.tol.log_coefficient
                                   : std::abs(f.exponent - law.expected) <= c.tol.fit;
            entry["match"] = match;
            ok = ok && match;
        }
        fits[law.name] = entry;
    }
    out.json_file("fits.json", {{"n", c.n}, {"p", p}, {"q", q}, {"omega", geometry.omega}, {"fits", fits}, {"passes", ok}});
    return ok ? finish(out, Ok, "matched") : finish(out, ToleranceFailure, "fit mismatch");
}

TaskOutcome cmd_eigen(const ExperimentConfig& c, const fs::path& task_dir, int jobs) {
    Artifacts out{task_dir, {}};
    const Norm h = c.norm.build();
    const auto grid = make_grid(c, h);
    const ProblemParams params{c.n, c.p, c.p, 0.0};
    std::vector<EigenResult> runs(static_cast<std::size_t>(c.eigen_starts), EigenResult{0, DiscreteFunction::zero(grid), 0, 0, {}, true});
    std::vector<std::string> errors(runs.size());
    parallel_for(c.eigen_starts, jobs, [&](int i) {
        const auto init = random_eigen_init(grid, c.seed + static_cast<std::uint64_t>(i));
        try {
            runs[static_cast<std::size_t>(i)] = solve_lambda1(params, init, c.tol.eigen, c.max_iter);
        } catch (const ConvergenceError<EigenResult>& e) {
            runs[static_cast<std::size_t>(i)] = e.best();
            errors[static_cast<std::size_t>(i)] = e.what();
        }
    });
    const EigenResult& best = runs.front();
    double spread = 0;
    json starts = json::array();
    for (std::size_t i = 0; i < runs.size(); ++i) {
        spread = std::max(spread, std::abs(runs[i].lambda1 / best.lambda1 - 1));
        starts.push_back({{"seed", c.seed + i},
                          {"lambda1", runs[i].lambda1},
                          {"iterations", runs[i].iterations},
                          {"residual", runs[i].residual},
                          {"monotone", runs[i].monotone},
                          {"error", errors[i]}});
    }
    Csv history({"iteration", "rayleigh"});
    for (std::size_t i = 0; i < best.history.size(); ++i) history.row(static_cast<int>(i), best.history[i]);
    out.text("history.csv", history.str());
    out.text("eigenfunction.csv", solution_csv(best.u1));
    const bool failed = std::any_of(errors.begin(), errors.end(), [](const std::string& e) { return !e.empty(); });
    const bool agree = spread <= 1e-6;
    out.json_file("eigen.json", {{"lambda1", best.lambda1},
                                 {"iterations", best.iterations},
                                 {"residual", best.residual},
                                 {"monotone", best.monotone},
                                 {"nodes", grid->node_count()},
                                 {"start_spread", spread},
                                 {"starts_agree", agree},
                                 {"starts", starts}});
    if (failed) return finish(out, SolverFailure, "not converged");
    if (!agree || !best.monotone) return finish(out, ToleranceFailure, "starts disagree or descent not monotone");
    return finish(out, Ok, "converged");
}

TaskOutcome cmd_solve(const ExperimentConfig& c, const fs::path& task_dir, int) {
    Artifacts out{task_dir, {}};
    const Context ctx = make_context(c);
    const double lambda = resolve_lambda(c, ctx);
    // lambda <= 0 is the non-existence regime: run unconstrained and attach the Pohozaev certificate.
    const bool certificate = lambda <= 0;
    std::optional<SolveRun> solved;
    try {
        solved = run_solver(c, ctx, lambda, !certificate, true);
    } catch (const DomainError& e) {
        out.json_file("result.json", {{"lambda", lambda}, {"classification", "PreconditionFailed"}, {"message", e.what()}});
        return finish(out, Invalid, "precondition failed", e.what());
    }
    const SolveRun& run = *solved;
    const PohozaevAudit audit = pohozaev_audit(run.params, run.result.u);
    json result = result_json(run);
    result["lambda1"] = ctx.eig.lambda1;
    result["capital_lambda"] = ctx.cap_lambda;
    result["pohozaev"] = audit_json(audit);
    if (certificate) {
        result["pohozaev"]["certificate"] =
            !(audit.lp_norm >= 0.01 && passes_joint_audit(audit, c.tol.pohozaev));
    }
    out.json_file("result.json", result);
    Csv trace({"iteration", "level", "residual"});
    for (const auto& row : run.result.trace) trace.row(row.iteration, row.level, row.residual);
    out.text("trace.csv", trace.str());
    Csv path({"t", "energy"});
    for (std::size_t i = 0; i < run.result.path.t.size(); ++i) path.row(run.result.path.t[i], run.result.path.energy[i]);
    out.text("path.csv", path.str());
    out.text("solution.csv", solution_csv(run.result.u));
    if (run.result.classification == MPStatus::Converged) return finish(out, Ok, "Converged");
    return finish(out, SolverFailure, to_string(run.result.classification), run.result.note);
}

TaskOutcome cmd_sweep_lambda(const ExperimentConfig& c, const fs::path& task_dir, int jobs) {
    Artifacts out{task_dir, {}};
    const Context ctx = make_context(c);
    const double l1 = ctx.eig.lambda1;
    const bool linear = c.q == c.p;
    std::string regime;
    double ref_lo = 0, ref_hi = 0;
    if (linear && c.n >= c.p * c.p) regime = "p_linear_high_dimension", ref_lo = 0, ref_hi = l1;
    else if (linear) regime = "p_linear_low_dimension", ref_lo = l1 - ctx.cap_lambda, ref_hi = l1;
    else if (c.n > kappa(c.p, c.q)) regime = "superlinear_above_kappa";
    else regime = "superlinear_at_or_below_kappa";
    const double lo = c.sweep.min.value_or(linear ? 0.02 * l1 : 0.1);
    const double hi = c.sweep.max.value_or(linear ? 1.05 * l1 : 100.0);
    if (!(hi > lo)) throw ConfigError("lambda_sweep range is empty");
    const bool geometric = !linear && lo > 0;

    std::map<double, SolveRun> runs;
    std::mutex runs_mutex;
    auto evaluate = [&](const std::vector<double>& lambdas) {
        std::vector<std::optional<SolveRun>> batch(lambdas.size());
        parallel_for(static_cast<int>(lambdas.size()), jobs, [&](int i) {
            batch[static_cast<std::size_t>(i)] = run_solver(c, ctx, lambdas[static_cast<std::size_t>(i)], false, false);
        });
        std::lock_guard lock(runs_mutex);
        for (std::size_t i = 0; i < lambdas.size(); ++i) runs.emplace(lambdas[i], std::move(*batch[i]));
    };
    auto success = [&](double l) { return runs.at(l).result.classification == MPStatus::Converged; };

    std::vector<double> grid_points;
    for (int i = 0; i < c.sweep.points; ++i) {
        const double t = static_cast<double>(i) / (c.sweep.points - 1);
        grid_points.push_back(geometric ? lo * std::pow(hi / lo, t) : lo + t * (hi - lo));
    }
    evaluate(grid_points);

    // Bisect every success/failure transition between neighbouring samples.
    std::vector<std::pair<double, double>> brackets;
    for (std::size_t i = 0; i + 1 < grid_points.size(); ++i)
        if (success(grid_points[i]) != success(grid_points[i + 1])) brackets.emplace_back(grid_points[i], grid_points[i + 1]);
    for (int step = 0; step < c.sweep.bisection_steps && !brackets.empty(); ++step) {
        std::vector<double> mids;
        for (const auto& [a, b] : brackets) mids.push_back(geometric ? std::sqrt(a * b) : (a + b) / 2);
        evaluate(mids);
        for (std::size_t k = 0; k < brackets.size(); ++k) {
            auto& [a, b] = brackets[k];
            (success(mids[k]) == success(a) ? a : b) = mids[k];
        }
    }

    // Largest contiguous run of successes; endpoints at the bracket midpoints.
    std::vector<double> lambdas;
    for (const auto& [l, run] : runs) lambdas.push_back(l);
    std::size_t best_start = 0, best_len = 0, segments = 0;
    for (std::size_t i = 0; i < lambdas.size();) {
        if (!success(lambdas[i])) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j + 1 < lambdas.size() && success(lambdas[j + 1])) ++j;
        ++segments;
        if (j - i + 1 > best_len) best_start = i, best_len = j - i + 1;
        i = j + 1;
    }
    json window{{"regime", regime}, {"lambda1", l1}, {"capital_lambda", ctx.cap_lambda}, {"threshold", ctx.threshold},
                {"kappa", kappa(c.p, c.q)}, {"range", {lo, hi}}, {"segments", segments}};
    if (best_len > 0) {
        const std::size_t first = best_start, last = best_start + best_len - 1;
        const double w_lo = first == 0 ? lambdas[first] : (lambdas[first - 1] + lambdas[first]) / 2;
        const double w_hi = last + 1 == lambdas.size() ? lambdas[last] : (lambdas[last] + lambdas[last + 1]) / 2;
        window["window"] = {w_lo, w_hi};
        window["window_open_below"] = first == 0;
        window["window_open_above"] = last + 1 == lambdas.size();
        if (ref_hi > ref_lo) {
            const double overlap = std::max(0.0, std::min(w_hi, ref_hi) - std::max(w_lo, ref_lo));
            window["reference"] = {ref_lo, ref_hi};
            window["coverage"] = overlap / (ref_hi - ref_lo);
        }
        if (regime == "superlinear_at_or_below_kappa") window["lambda0"] = w_lo;
    } else {
        window["window"] = nullptr;
    }
    Csv csv({"lambda", "classification", "level", "residual", "iterations", "positive"});
    for (const auto& [l, run] : runs)
        csv.row(l, to_string(run.result.classification), run.result.level, run.result.residual, run.result.iterations,
                run.result.positive);
    out.text("sweep.csv", csv.str());
    out.json_file("window.json", window);
    return best_len > 0 ? finish(out, Ok, "window located") : finish(out, SolverFailure, "no successful run");
}

TaskOutcome cmd_pohozaev(const ExperimentConfig& c, const fs::path& task_dir, int jobs) {
    Artifacts out{task_dir, {}};
    const Context ctx = make_context(c);
    std::vector<double> lambdas = c.audit_lambdas;
    if (c.lambda || c.lambda_factor) lambdas.push_back(resolve_lambda(c, ctx));
    std::vector<std::optional<SolveRun>> solved(lambdas.size());
    parallel_for(static_cast<int>(lambdas.size()), jobs, [&](int i) {
        solved[static_cast<std::size_t>(i)] = run_solver(c, ctx, lambdas[static_cast<std::size_t>(i)], false, false);
    });
    json audits = json::array();
    Csv csv({"lambda", "classification", "lp_norm", "lambda_side", "boundary_term", "residual", "test_defect",
             "passes_joint"});
    bool consistent = true, solver_ok = true;
    for (const auto& slot : solved) {
        const SolveRun& run = *slot;
        const PohozaevAudit a = pohozaev_audit(run.params, run.result.u);
        const bool joint = passes_joint_audit(a, c.tol.pohozaev);
        bool expected;
        if (run.params.lambda <= 0) {
            expected = !(a.lp_norm >= 0.01 && joint);  // nobody may pass
        } else {
            solver_ok = solver_ok && run.result.classification == MPStatus::Converged;
            expected = run.result.classification != MPStatus::Converged || joint;
        }
        consistent = consistent && expected;
        json entry = audit_json(a);
        entry["lambda"] = run.params.lambda;
        entry["classification"] = to_string(run.result.classification);
        entry["passes_joint"] = joint;
        entry["consistent"] = expected;
        audits.push_back(entry);
        csv.row(run.params.lambda, to_string(run.result.classification), a.lp_norm, a.lambda_side, a.boundary_term,
                a.residual, a.test_defect, joint);
    }
    out.text("audits.csv", csv.str());
    out.json_file("audits.json", {{"tolerance", c.tol.pohozaev}, {"audits", audits}, {"consistent", consistent}});
    if (!consistent) return finish(out, ToleranceFailure, "audit inconsistent with the identity");
    if (!solver_ok) return finish(out, SolverFailure, "positive-lambda solve did not converge");
    return finish(out, Ok, "certificate holds");
}

namespace {

std::string utc_now() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

using Command = TaskOutcome (*)(const ExperimentConfig&, const fs::path&, int);

Command command_for(const std::string& name) {
    static const std::map<std::string, Command> table{{"verify-norms", cmd_verify_norms},
                                                      {"bubble-asymptotics", cmd_bubble_asymptotics},
                                                      {"eigen", cmd_eigen},
                                                      {"solve", cmd_solve},
                                                      {"sweep-lambda", cmd_sweep_lambda},
                                                      {"pohozaev", cmd_pohozaev}};
    const auto it = table.find(name);
    if (it == table.end()) throw ConfigError("unknown task " + name);
    return it->second;
}

}  // namespace

int run_tasks(const ExperimentConfig& c, const std::vector<std::string>& names, int jobs) {
    for (const auto& name : names) (void)command_for(name);
    const std::string hash = config_hash(c);
    const fs::path run_dir = fs::path(c.output_dir) / hash;
    const std::string started = utc_now();
    std::vector<TaskOutcome> outcomes(names.size());
    // Tasks share the job budget: outer level over tasks, inner level inside each task.
    const int outer = std::clamp(jobs, 1, static_cast<int>(names.size()));
    const int inner = std::max(1, jobs / outer);
    parallel_for(static_cast<int>(names.size()), outer, [&](int i) {
        const std::string& name = names[static_cast<std::size_t>(i)];
        TaskOutcome& o = outcomes[static_cast<std::size_t>(i)];
        try {
            o = command_for(name)(c, run_dir / name, inner);
        } catch (const ConfigError& e) {
            o = {Invalid, "invalid", e.what(), {}};
        } catch (const DomainError& e) {
            o = {Invalid, "precondition failed", e.what(), {}};
        } catch (const std::exception& e) {
            o = {SolverFailure, "error", e.what(), {}};
        }
    });

    json manifest;
    const fs::path manifest_path = run_dir / "manifest.json";
    if (fs::exists(manifest_path)) {
        std::ifstream in(manifest_path);
        manifest = json::parse(in, nullptr, false);
        if (manifest.is_discarded()) manifest = json::object();
    }
    manifest["config_hash"] = hash;
    manifest["tool_version"] = tool_version;
    manifest["config"] = to_json(c);
    int worst = Ok;
    for (std::size_t i = 0; i < names.size(); ++i) {
        const TaskOutcome& o = outcomes[i];
        manifest["tasks"][names[i]] = {{"status", o.status},       {"exit_code", o.exit_code}, {"message", o.message},
                                       {"artifacts", o.artifacts}, {"started", started},       {"finished", utc_now()}};
        worst = std::max(worst, o.exit_code);
    }
    write_atomic(manifest_path, manifest.dump(2) + "\n");
    return worst;
}

}  // namespace anisobn::runner
