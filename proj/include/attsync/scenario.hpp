#pragma once

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "attsync/formation.hpp"
#include "attsync/observer.hpp"
#include "attsync/runtime.hpp"
#include "attsync/so3.hpp"
#include "attsync/topology.hpp"

namespace attsync {

struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Rotation initializer kept in angle-axis form so configs round-trip
/// exactly.
struct AxisAngle {
    double angle = 0.0;
    Vec3 axis = Vec3::UnitZ();
    Rotation rotation() const { return angle_axis(angle, axis); }
};

/// One angular-velocity component: c, a sin(bt) + c or a cos(bt) + c.
struct SinusoidComponent {
    enum class Kind { Constant, Sine, Cosine };
    Kind kind = Kind::Constant;
    double a = 0.0;
    double b = 0.0;
    double c = 0.0;

    double eval(double t) const {
        switch (kind) {
            case Kind::Sine:
                return a * std::sin(b * t) + c;
            case Kind::Cosine:
                return a * std::cos(b * t) + c;
            default:
                return c;
        }
    }
};

struct OmegaProfile {
    std::array<SinusoidComponent, 3> comp{};

    Vec3 eval(double t) const { return Vec3(comp[0].eval(t), comp[1].eval(t), comp[2].eval(t)); }
    static OmegaProfile constant(const Vec3& w);
};

/// Ground-truth position motion: fixed, or rigidly spinning about an
/// axis through the origin, p(t) = R_a(rate t, axis)^T p(0).
struct PositionProfile {
    enum class Kind { Constant, Spin };
    Kind kind = Kind::Constant;
    Vec3 p0 = Vec3::Zero();
    Vec3 axis = Vec3::UnitZ();
    double rate = 0.0;

    Vec3 position(double t) const;
    /// Closed-form derivative of position().
    Vec3 velocity(double t) const;
};

/// Centered finite difference of a position profile, for auditing the
/// closed-form velocity.
Vec3 finite_difference_velocity(const PositionProfile& profile, double t, double h = 1e-4);

enum class ObserverType { Continuous, Hybrid };

/// A full simulation description: topology, ground-truth generators,
/// initial estimates, observer selection and parameters, integration
/// settings and output location.
struct Scenario {
    std::string name;
    int n_agents = 0;
    std::vector<std::pair<int, int>> edges;

    std::vector<AxisAngle> truth_R0;
    std::vector<OmegaProfile> omega;
    std::vector<PositionProfile> position;

    std::vector<AxisAngle> est_R0;
    std::vector<Vec3> est_p0;
    std::vector<double> xi0;

    ObserverType observer = ObserverType::Hybrid;
    ObserverParams params;
    double k_p = 1.0;

    SimConfig sim;
    std::string out_dir = "out";

    TreeTopology topology() const { return TreeTopology::validate(n_agents, edges); }
};

Scenario load_scenario(const std::string& path);
Scenario load_scenario_string(const std::string& text, const std::string& origin = "<string>");
std::string save_scenario_string(const Scenario& s);
void save_scenario(const Scenario& s, const std::string& path);

/// The five-agent rotating-pyramid setup on the path graph, with the
/// published observer parameters and initial estimates.
Scenario paper_preset();

struct GroundTruthRates {
    std::vector<Vec3> omega_body;
    std::vector<Vec3> v_inertial;
};

/// Closed-form profile evaluation at time t.
GroundTruthRates ground_truth_velocity(const Scenario& s, double t);
std::vector<Vec3> truth_positions(const Scenario& s, double t);

/// Body-frame linear velocities v_i^i = R_i^T v_i for the given truth
/// attitudes.
std::vector<Vec3> body_velocities(const GroundTruthRates& rates,
                                  const std::vector<Rotation>& truth);

/// Inertial bearings sampled on a uniform grid, for excitation checks.
BearingTrajectory sample_bearings(const Scenario& s, double t_begin, double t_end, double dt);

struct RunOptions {
    bool record_errors = false;  ///< keep stacked ptilde per logged row
};

struct RunResult {
    SimLog log;
    int n_agents = 0;
    int n_edges = 0;
    ObserverType observer = ObserverType::Hybrid;
    double u_t0 = 0.0;     ///< total potential at (0, 0)
    long jump_bound = 0;   ///< ceil(U_T(0,0) / delta), hybrid runs only
    Vec3 centroid0 = Vec3::Zero();
    double e0_norm = 0.0;
    double wall_seconds = 0.0;
    std::vector<Eigen::VectorXd> p_tilde_rows;  ///< filled when record_errors

    int column(const std::string& name) const;
};

/// Builds the coupled plant/observer hybrid system and executes it.
RunResult run_scenario(const Scenario& s, const RunOptions& opt = {});

/// Reference integration of the decoupled error dynamics
/// ptilde_dot = -k_p L_B(t) ptilde on the scenario grid, using only the
/// closed-form ground truth. Returns one row per logged sample.
std::vector<Eigen::VectorXd> integrate_error_ode(const Scenario& s, const Eigen::VectorXd& p_tilde0);

}  // namespace attsync
