#include <atomic>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <thread>

#include "CLI11.hpp"
#include "attsync/observer.hpp"
#include "attsync/scenario.hpp"
#include "attsync/sim_io.hpp"

namespace {

using namespace attsync;

void apply_overrides(Scenario& s, double dt, double t_end, const std::string& observer,
                     const std::string& out_dir) {
    if (dt > 0.0) {
        s.sim.dt = dt;
    }
    if (t_end > 0.0) {
        s.sim.t_end = t_end;
    }
    if (observer == "continuous") {
        s.observer = ObserverType::Continuous;
    } else if (observer == "hybrid") {
        s.observer = ObserverType::Hybrid;
    }
    if (!out_dir.empty()) {
        s.out_dir = out_dir;
    }
}

int run_simulate(const std::vector<std::string>& paths, double dt, double t_end,
                 const std::string& observer, const std::string& out_dir, int jobs, bool plots) {
    std::atomic<int> failures{0};
    std::atomic<std::size_t> next{0};
    std::mutex io_mutex;

    auto worker = [&]() {
        for (std::size_t idx = next.fetch_add(1); idx < paths.size(); idx = next.fetch_add(1)) {
            try {
                Scenario s = load_scenario(paths[idx]);
                apply_overrides(s, dt, t_end, observer, out_dir);
                const RunResult result = run_scenario(s);
                write_run_outputs(result, s, s.out_dir, plots);
                std::lock_guard lock(io_mutex);
                std::cout << s.name << ": " << result.log.rows.size() << " samples, "
                          << result.log.jumps.size() << " jumps, final |e| = "
                          << result.log.rows.back().back() << ", outputs in " << s.out_dir << "\n";
            } catch (const std::exception& e) {
                std::lock_guard lock(io_mutex);
                std::cerr << paths[idx] << ": " << e.what() << "\n";
                ++failures;
            }
        }
    };

    const int n_threads = std::max(1, std::min<int>(jobs, static_cast<int>(paths.size())));
    std::vector<std::thread> pool;
    for (int i = 0; i < n_threads; ++i) {
        pool.emplace_back(worker);
    }
    for (auto& th : pool) {
        th.join();
    }
    return failures == 0 ? 0 : 1;
}

int run_replicate(const std::string& out_dir, double dt, double t_end) {
    Scenario s = paper_preset();
    apply_overrides(s, dt, t_end, "", "");
    std::filesystem::create_directories(out_dir);
    save_scenario(s, (std::filesystem::path(out_dir) / "scenario.json").string());

    for (const ObserverType type : {ObserverType::Hybrid, ObserverType::Continuous}) {
        s.observer = type;
        const std::string label = type == ObserverType::Hybrid ? "hybrid" : "continuous";
        const RunResult result = run_scenario(s);
        write_run_outputs(result, s, (std::filesystem::path(out_dir) / label).string());

        std::cout << label << ": " << result.log.jumps.size() << " jump event(s)";
        if (!result.log.jumps.empty()) {
            std::cout << " (first at t = " << result.log.jumps.front().t << ", "
                      << result.log.jumps.front().edges.size() << " edges)";
        }
        const auto& last = result.log.rows.back();
        double worst_rbar = 0.0;
        for (int k = 0; k < result.n_edges; ++k) {
            worst_rbar = std::max(worst_rbar, last[2 + k]);
        }
        std::cout << ", max |Rbar_k(" << last[0] << ")|_I = " << worst_rbar
                  << ", |e| = " << last.back() << ", wall " << std::fixed << std::setprecision(2)
                  << result.wall_seconds << " s\n";
        std::cout.unsetf(std::ios::fixed);
    }
    std::cout << "outputs in " << out_dir << "\n";
    return 0;
}

int run_check_params(const std::string& path) {
    const Scenario s = load_scenario(path);
    const ParamReport report = check_params(s.params);
    for (const ParamCheck& c : report.checks) {
        std::cout << (c.ok ? "PASS" : "FAIL") << "  " << c.name;
        if (!c.detail.empty()) {
            std::cout << "  (" << c.detail << ")";
        }
        std::cout << "\n";
    }
    std::cout << (report.all_ok() ? "all parameter checks passed" : "parameter checks FAILED")
              << "\n";
    return report.all_ok() ? 0 : 1;
}

int run_gradcheck(int samples, std::uint64_t seed) {
    const ObserverParams p = paper_preset().params;
    const GradientAudit audit = run_gradient_audit(p, samples, seed);
    std::cout << "samples: " << audit.samples << "\n";
    std::cout << "max relative error, rotational gradient: " << audit.max_rel_err_rot << "\n";
    std::cout << "max relative error, xi gradient:         " << audit.max_rel_err_xi << "\n";
    const bool ok = audit.max_rel_err() < 1e-6;
    std::cout << (ok ? "gradient audit passed" : "gradient audit FAILED (tolerance 1e-6)") << "\n";
    return ok ? 0 : 1;
}

int run_check_bpe(const std::string& path, double window, double mu, bool mu_given) {
    const Scenario s = load_scenario(path);
    const TreeTopology topo = s.topology();
    const BearingTrajectory traj = sample_bearings(s, 0.0, s.sim.t_end, s.sim.dt);

    if (mu_given) {
        BpeConfig cfg;
        cfg.window = window;
        cfg.mu = mu;
        const BpeReport rep = check_bpe(topo, traj, cfg);
        std::cout << "window T = " << window << " s, mu = " << mu
                  << ", worst window eigenvalue = " << rep.min_eig << "\n";
        std::cout << (rep.pass ? "PASS" : "FAIL") << "\n";
        return rep.pass ? 0 : 1;
    }
    const double best = certify_bpe(topo, traj, window);
    std::cout << "window T = " << window << " s, largest passing mu = " << best << "\n";
    std::cout << (best > 0.0 ? "PASS (bearing excitation certified)" : "FAIL (no positive mu passes)")
              << "\n";
    return best > 0.0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Distributed attitude and formation estimation on SO(3): scenario simulator"};
    app.require_subcommand(1);

    auto* sim = app.add_subcommand("simulate", "Run scenario files and write CSV/SVG outputs");
    std::vector<std::string> paths;
    std::string out_dir, observer;
    double dt = 0.0, t_end = 0.0;
    int jobs = 1;
    bool no_plots = false;
    sim->add_option("scenarios", paths, "Scenario JSON files")->required()->expected(-1);
    sim->add_option("--out", out_dir, "Output directory override");
    sim->add_option("--dt", dt, "Step size override [s]");
    sim->add_option("--t-end", t_end, "Horizon override [s]");
    sim->add_option("--observer", observer, "Observer override")
        ->check(CLI::IsMember({"continuous", "hybrid"}));
    sim->add_option("--jobs", jobs, "Parallel scenario workers")->check(CLI::PositiveNumber);
    sim->add_flag("--no-plots", no_plots, "Skip SVG plot generation");

    auto* rep = app.add_subcommand("replicate-paper",
                                   "Run the five-agent rotating-pyramid preset with both observers");
    std::string rep_out = "out/replication";
    double rep_dt = 0.0, rep_t_end = 0.0;
    rep->add_option("--out", rep_out, "Output directory");
    rep->add_option("--dt", rep_dt, "Step size override [s]");
    rep->add_option("--t-end", rep_t_end, "Horizon override [s]");

    auto* chk = app.add_subcommand("check-params", "Validate the observer parameter set of a scenario");
    std::string chk_path;
    chk->add_option("scenario", chk_path, "Scenario JSON file")->required();

    auto* grad = app.add_subcommand("gradcheck",
                                    "Finite-difference audit of the analytic potential gradients");
    int samples = 500;
    std::uint64_t seed = 1234;
    grad->add_option("--samples", samples, "Random sample count")->check(CLI::PositiveNumber);
    grad->add_option("--seed", seed, "RNG seed");

    auto* bpe = app.add_subcommand("check-bpe", "Bearing persistence-of-excitation check");
    std::string bpe_path;
    double window = 12.0, mu = 0.0;
    bpe->add_option("scenario", bpe_path, "Scenario JSON file")->required();
    bpe->add_option("--window", window, "Integration window T [s]")->required();
    auto* mu_opt = bpe->add_option("--mu", mu, "Excitation level (omitted: search by bisection)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (sim->parsed()) {
            return run_simulate(paths, dt, t_end, observer, out_dir, jobs, !no_plots);
        }
        if (rep->parsed()) {
            return run_replicate(rep_out, rep_dt, rep_t_end);
        }
        if (chk->parsed()) {
            return run_check_params(chk_path);
        }
        if (grad->parsed()) {
            return run_gradcheck(samples, seed);
        }
        if (bpe->parsed()) {
            return run_check_bpe(bpe_path, window, mu, mu_opt->count() > 0);
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
