#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <numbers>

#include "attsync/scenario.hpp"
#include "attsync/sim_io.hpp"
#include "test_support.hpp"

using namespace attsync;

namespace {
constexpr double kPi = std::numbers::pi;
}

TEST_CASE("paper preset encodes the published experiment") {
    const Scenario s = paper_preset();
    CHECK(s.n_agents == 5);
    CHECK(s.edges.size() == 4);
    CHECK(s.observer == ObserverType::Hybrid);
    CHECK(s.params.xi_set.size() == 1);
    CHECK(s.params.xi_set[0] == doctest::Approx(0.08 * kPi).epsilon(1e-15));
    CHECK(s.params.gamma == 1.9251);
    CHECK(s.params.delta == 0.0030);
    CHECK(s.params.k_R == 1.1);
    CHECK(s.params.k_xi == 5.0);
    CHECK(s.k_p == 1.0);

    // Initial relative attitude errors sit exactly at the pi-rotation
    // about e3 on every edge.
    const TreeTopology topo = s.topology();
    std::vector<Rotation> truth, est;
    for (int i = 0; i < 5; ++i) {
        truth.push_back(s.truth_R0[i].rotation());
        est.push_back(s.est_R0[i].rotation());
    }
    const auto r_bar =
        relative_error_from_measurements(topo, measure_relative(topo, truth), est);
    const Mat3 expected = angle_axis(kPi, Vec3::UnitZ()).matrix();
    for (const Rotation& r : r_bar) {
        CHECK((r.matrix() - expected).norm() < 1e-9);
        CHECK(dist_identity(r) == doctest::Approx(1.0).epsilon(1e-12));
    }

    // That state is a critical point of the potential with xi = 0, away
    // from the attractor.
    for (const Rotation& r : r_bar) {
        CHECK(grad_r(r, 0.0, s.params).norm() < 1e-9);
        CHECK(std::abs(grad_xi(r, 0.0, s.params)) < 1e-9);
    }

    CHECK(check_params(s.params).all_ok());
}

TEST_CASE("preset round-trips through serialization") {
    const Scenario s = paper_preset();
    const std::string once = save_scenario_string(s);
    const Scenario reloaded = load_scenario_string(once, "roundtrip");
    const std::string twice = save_scenario_string(reloaded);
    CHECK(once == twice);
}

TEST_CASE("scenario validation errors carry field paths") {
    const std::string missing_edges = R"({
      "topology": {"agents": 2},
      "truth": {}, "estimates": {}, "observer": {}
    })";
    CHECK_THROWS_WITH_AS(load_scenario_string(missing_edges), "topology.edges: missing field",
                         ValidationError);

    Scenario s = paper_preset();
    std::string text = save_scenario_string(s);
    const std::string needle = "\"axis\": [\n          0.0,\n          0.0,\n          1.0\n        ]";
    const auto pos = text.find(needle);
    REQUIRE(pos != std::string::npos);
    text.replace(pos, needle.size(),
                 "\"axis\": [\n          1.0,\n          1.0,\n          0.0\n        ]");
    CHECK_THROWS_AS(load_scenario_string(text), ValidationError);

    CHECK_THROWS_AS(load_scenario_string("{ not json"), ParseError);
    CHECK_THROWS_AS(load_scenario("does-not-exist.json"), ParseError);
}

TEST_CASE("synthesize directive resolves at load time") {
    const std::string text = R"({
      "name": "synth",
      "topology": {"agents": 2, "edges": [[1, 2]]},
      "truth": {
        "attitude_initial": [{"angle": 0, "axis": [0, 0, 1]}, {"angle": 0, "axis": [0, 0, 1]}],
        "angular_velocity": [{"constant": [0, 0, 1]}, {"constant": [0, 1, 0]}],
        "position": [
          {"initial": [0, 0, 0], "profile": {"type": "constant"}},
          {"initial": [2, 0, 0], "profile": {"type": "spin", "axis": [0, 0, 1], "rate": 0.5}}
        ]
      },
      "estimates": {
        "attitude_initial": [{"angle": 1.0, "axis": [1, 0, 0]}, {"angle": 0, "axis": [0, 0, 1]}],
        "position_initial": [[0, 0, 0], [1, 1, 1]],
        "xi_initial": [0]
      },
      "observer": {
        "type": "hybrid",
        "synthesize": {
          "A": {"diag": [5, 8.57, 12]},
          "xi_set": [0.25132741228718347],
          "gamma_fraction": 0.95, "delta_fraction": 0.9,
          "k_R": 1.1, "k_xi": 5
        }
      },
      "sim": {"dt": 0.001, "t_end": 1.0}
    })";
    const Scenario s = load_scenario_string(text);
    CHECK(s.params.gamma > 0.0);
    CHECK(s.params.gamma < 4.0 * 5.0 / (kPi * kPi));
    CHECK(s.params.delta > 0.0);
    CHECK(s.params.u.x() == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(check_params(s.params).all_ok());
}

TEST_CASE("ground-truth rates match the profile algebra") {
    const Scenario s = paper_preset();

    SUBCASE("the apex agent never moves") {
        for (double t : {0.0, 1.7, 12.0, 29.5}) {
            const GroundTruthRates g = ground_truth_velocity(s, t);
            CHECK(g.v_inertial[4].norm() < 1e-15);
        }
    }

    SUBCASE("corner speed is the rigid-rotation speed") {
        const double expected = (kPi / 6.0) * Vec3::UnitZ().cross(Vec3(-2, -2, -2)).norm();
        for (double t : {0.0, 3.3, 10.0}) {
            const GroundTruthRates g = ground_truth_velocity(s, t);
            CHECK(g.v_inertial[0].norm() == doctest::Approx(expected).epsilon(1e-12));
        }
    }

    SUBCASE("closed-form velocity agrees with the finite difference") {
        for (int i = 0; i < 5; ++i) {
            for (double t : {0.1, 4.2, 17.9}) {
                const Vec3 fd = finite_difference_velocity(s.position[i], t);
                const Vec3 an = s.position[i].velocity(t);
                CHECK((fd - an).norm() < 1e-6);
            }
        }
    }

    SUBCASE("angular velocities respect the highest-rate profile bound") {
        const double bound = Vec3(1.5, 4.0, 5.0).norm();
        for (double t = 0.0; t < 30.0; t += 0.37) {
            const GroundTruthRates g = ground_truth_velocity(s, t);
            for (const Vec3& w : g.omega_body) {
                CHECK(w.norm() <= bound + 1e-12);
            }
        }
    }

    SUBCASE("integrated truth rotations stay valid") {
        Scenario short_run = paper_preset();
        short_run.sim.t_end = 0.5;
        const RunResult result = run_scenario(short_run);
        CHECK(result.log.rows.size() > 100);
    }
}

TEST_CASE("hybrid preset run jumps once at t = 0 and dissipates") {
    Scenario s = paper_preset();
    s.sim.t_end = 1.0;
    const RunResult result = run_scenario(s);

    REQUIRE(result.log.jumps.size() == 1);
    const JumpRecord& jump = result.log.jumps.front();
    CHECK(jump.t == 0.0);
    CHECK(jump.j == 1);
    CHECK(jump.edges == std::vector<int>{1, 2, 3, 4});
    CHECK(jump.ut_before - jump.ut_after >= s.params.delta);

    // xi jumps from 0 to 0.08 pi: row 0 is pre-jump, row 1 post-jump.
    const int xi0 = result.column("xi_1");
    CHECK(result.log.rows[0][xi0] == 0.0);
    CHECK(result.log.rows[1][xi0] == 0.08 * kPi);

    // The potential never increases along the flow after the jump.
    const int ut = result.column("U_T");
    for (std::size_t i = 2; i < result.log.rows.size(); ++i) {
        CHECK(result.log.rows[i][ut] <= result.log.rows[i - 1][ut] + 1e-8);
    }

    CHECK(result.jump_bound >= 1);
    CHECK(static_cast<long>(result.log.jumps.size()) <= result.jump_bound);
}

TEST_CASE("continuous preset run never jumps and dissipates") {
    Scenario s = paper_preset();
    s.observer = ObserverType::Continuous;
    s.sim.t_end = 1.0;
    const RunResult result = run_scenario(s);

    CHECK(result.log.jumps.empty());
    const int vt = result.column("V_T");
    const int ut = result.column("U_T");
    for (std::size_t i = 1; i < result.log.rows.size(); ++i) {
        CHECK(result.log.rows[i][vt] <= result.log.rows[i - 1][vt] + 1e-8);
        // With xi pinned at zero the two potentials coincide.
        CHECK(result.log.rows[i][ut] == doctest::Approx(result.log.rows[i][vt]).epsilon(1e-12));
    }
}

TEST_CASE("scenario runs are deterministic") {
    Scenario s = paper_preset();
    s.sim.t_end = 0.2;
    const RunResult a = run_scenario(s);
    const RunResult b = run_scenario(s);
    REQUIRE(a.log.rows.size() == b.log.rows.size());
    for (std::size_t i = 0; i < a.log.rows.size(); ++i) {
        CHECK(a.log.rows[i] == b.log.rows[i]);
    }
}

TEST_CASE("log schema matches the documented header") {
    Scenario s = paper_preset();
    s.sim.t_end = 0.01;
    const RunResult result = run_scenario(s);
    const std::vector<std::string> expected{
        "t",        "j",        "rbar_1",   "rbar_2",   "rbar_3",   "rbar_4",
        "xi_1",     "xi_2",     "xi_3",     "xi_4",     "U_T",      "V_T",
        "ptilde_1", "ptilde_2", "ptilde_3", "ptilde_4", "ptilde_5", "e_norm"};
    CHECK(result.log.columns == expected);
}

TEST_CASE("run outputs land on disk") {
    Scenario s = paper_preset();
    s.sim.t_end = 0.05;
    const RunResult result = run_scenario(s);
    const std::string dir = "scenario_io_test_out";
    write_run_outputs(result, s, dir);
    CHECK(std::filesystem::exists(dir + "/trajectory.csv"));
    CHECK(std::filesystem::exists(dir + "/jumps.csv"));
    CHECK(std::filesystem::exists(dir + "/summary.json"));
    CHECK(std::filesystem::exists(dir + "/rbar.svg"));
    std::filesystem::remove_all(dir);
}
