#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "anisobn/runner.hpp"

namespace {

constexpr const char* columns = R"(Artifacts, under <out>/<config-hash>/<task>/:
  verify-norms        report.json
  bubble-asymptotics  sweep.csv   epsilon,gradHp,lpstar,lp,lq,quad_err
                      fits.json
  eigen               history.csv iteration,rayleigh
                      eigenfunction.csv  rho,u (radial) or x,y,u (rectangle)
                      eigen.json
  solve               trace.csv   iteration,level,residual
                      path.csv    t,energy  (J along t*w, t in [0, t_bar])
                      solution.csv rho,u or x,y,u
                      result.json (classification, level, path, pohozaev)
  sweep-lambda        sweep.csv   lambda,classification,level,residual,iterations,positive
                      window.json
  pohozaev            audits.csv  lambda,classification,lp_norm,lambda_side,boundary_term,residual,test_defect,passes_joint
                      audits.json
manifest.json sits next to the task directories.
Exit codes: 0 ok, 2 invalid config or failed precondition, 3 tolerance failure, 4 solver failure.)";

}  // namespace

int main(int argc, char** argv) {
    using namespace anisobn;
    CLI::App app{"Anisotropic critical p-Laplacian experiments"};
    app.footer(columns);
    app.set_version_flag("--version", runner::tool_version);
    app.require_subcommand(1);

    std::string config_path, out_dir;
    std::int64_t seed = -1;
    int jobs = 1;
    app.add_option("--config", config_path, "JSON experiment file")->required()->check(CLI::ExistingFile);
    app.add_option("--out", out_dir, "output root (overrides output_dir)");
    app.add_option("--seed", seed, "RNG seed (overrides seed)")->check(CLI::NonNegativeNumber);
    app.add_option("--jobs", jobs, "worker threads")->check(CLI::PositiveNumber);
    app.fallthrough();

    std::vector<std::string> selected;
    for (const auto& name : runner::tasks) {
        auto* sub = app.add_subcommand(name);
        sub->callback([&selected, name] { selected.push_back(name); });
    }
    auto* all = app.add_subcommand("all", "run every task");
    all->callback([&selected] { selected = runner::tasks; });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : runner::Invalid;
    }

    try {
        ExperimentConfig c = load_config(config_path);
        if (!out_dir.empty()) c.output_dir = out_dir;
        if (seed >= 0) c.seed = static_cast<std::uint64_t>(seed);
        const int code = runner::run_tasks(c, selected, jobs);
        std::cout << (std::filesystem::path(c.output_dir) / config_hash(c)).string() << "\n";
        return code;
    } catch (const ConfigError& e) {
        std::cerr << "invalid config: " << e.what() << "\n";
        return runner::Invalid;
    }
}
