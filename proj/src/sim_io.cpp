#include "attsync/sim_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>

#include "json.hpp"

namespace attsync {

namespace {

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::ofstream open_out(const std::string& path) {
    std::filesystem::path p(path);
    if (p.has_parent_path()) {
        std::filesystem::create_directories(p.parent_path());
    }
    std::ofstream out(path);
    if (!out) {
        throw std::runtime_error("cannot write " + path);
    }
    return out;
}

}  // namespace

void write_log_csv(const SimLog& log, const std::string& path) {
    std::ofstream out = open_out(path);
    for (std::size_t c = 0; c < log.columns.size(); ++c) {
        out << (c ? "," : "") << log.columns[c];
    }
    out << "\n";
    for (const auto& row : log.rows) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            out << (c ? "," : "") << fmt_double(row[c]);
        }
        out << "\n";
    }
}

void write_jumps_csv(const SimLog& log, const std::string& path) {
    std::ofstream out = open_out(path);
    out << "t,j,edges,UT_before,UT_after\n";
    for (const JumpRecord& rec : log.jumps) {
        out << fmt_double(rec.t) << "," << rec.j << ",";
        for (std::size_t i = 0; i < rec.edges.size(); ++i) {
            out << (i ? ";" : "") << rec.edges[i];
        }
        out << "," << fmt_double(rec.ut_before) << "," << fmt_double(rec.ut_after) << "\n";
    }
}

void write_summary_json(const RunResult& result, const Scenario& scenario,
                        const std::string& path) {
    using nlohmann::json;
    json j;
    j["scenario"] = scenario.name;
    j["observer"] = result.observer == ObserverType::Hybrid ? "hybrid" : "continuous";
    j["agents"] = result.n_agents;
    j["edges"] = result.n_edges;
    j["dt"] = scenario.sim.dt;
    j["t_end"] = scenario.sim.t_end;
    j["integrator"] = "rk4-so3-projected";
    j["runtime_seconds"] = result.wall_seconds;
    j["jump_count"] = static_cast<int>(result.log.jumps.size());
    j["U_T0"] = result.u_t0;
    j["delta"] = scenario.params.delta;
    j["jump_bound"] = result.jump_bound;
    j["e0_norm"] = result.e0_norm;

    if (!result.log.rows.empty()) {
        const auto& last = result.log.rows.back();
        json final;
        final["t"] = last[0];
        json rbar = json::array(), ptilde = json::array();
        for (int k = 0; k < result.n_edges; ++k) {
            rbar.push_back(last[2 + k]);
        }
        for (int i = 0; i < result.n_agents; ++i) {
            ptilde.push_back(last[2 + 2 * result.n_edges + 2 + i]);
        }
        final["rbar"] = rbar;
        final["ptilde"] = ptilde;
        final["e_norm"] = last.back();
        j["final"] = final;
    }

    json events = json::array();
    for (const JumpRecord& rec : result.log.jumps) {
        events.push_back({{"t", rec.t},
                          {"j", rec.j},
                          {"edges", rec.edges},
                          {"UT_before", rec.ut_before},
                          {"UT_after", rec.ut_after}});
    }
    j["jumps"] = events;

    std::ofstream out = open_out(path);
    out << j.dump(2) << "\n";
}

void write_svg_lines(const std::string& path, const std::string& title, const std::string& x_label,
                     const std::string& y_label, const std::vector<double>& x,
                     const std::vector<SvgSeries>& series, bool log_y) {
    const int width = 860, height = 480;
    const int ml = 70, mr = 170, mt = 40, mb = 50;
    const double plot_w = width - ml - mr, plot_h = height - mt - mb;

    auto transform_y = [log_y](double v) { return log_y ? std::log10(std::max(v, 1e-16)) : v; };

    double xmin = x.front(), xmax = x.back();
    double ymin = std::numeric_limits<double>::infinity(), ymax = -ymin;
    for (const SvgSeries& s : series) {
        for (double v : s.y) {
            const double ty = transform_y(v);
            ymin = std::min(ymin, ty);
            ymax = std::max(ymax, ty);
        }
    }
    if (!(ymax > ymin)) {
        ymax = ymin + 1.0;
    }
    const double ypad = 0.05 * (ymax - ymin);
    ymin -= ypad;
    ymax += ypad;

    auto px = [&](double v) { return ml + (v - xmin) / (xmax - xmin) * plot_w; };
    auto py = [&](double v) { return mt + (1.0 - (transform_y(v) - ymin) / (ymax - ymin)) * plot_h; };

    static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                    "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

    std::ofstream out = open_out(path);
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
        << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << width / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">"
        << title << "</text>\n";
    out << "<rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << plot_w << "\" height=\""
        << plot_h << "\" fill=\"none\" stroke=\"black\"/>\n";

    // Axis ticks: 6 along x, 6 along the (possibly log) y range.
    for (int i = 0; i <= 5; ++i) {
        const double vx = xmin + (xmax - xmin) * i / 5.0;
        out << "<line x1=\"" << px(vx) << "\" y1=\"" << mt + plot_h << "\" x2=\"" << px(vx)
            << "\" y2=\"" << mt + plot_h + 5 << "\" stroke=\"black\"/>\n";
        char label[32];
        std::snprintf(label, sizeof(label), "%g", vx);
        out << "<text x=\"" << px(vx) << "\" y=\"" << mt + plot_h + 18
            << "\" text-anchor=\"middle\">" << label << "</text>\n";

        const double ty = ymin + (ymax - ymin) * i / 5.0;
        const double yy = mt + (1.0 - (ty - ymin) / (ymax - ymin)) * plot_h;
        out << "<line x1=\"" << ml - 5 << "\" y1=\"" << yy << "\" x2=\"" << ml << "\" y2=\"" << yy
            << "\" stroke=\"black\"/>\n";
        std::snprintf(label, sizeof(label), log_y ? "1e%.1f" : "%g", ty);
        out << "<text x=\"" << ml - 8 << "\" y=\"" << yy + 4 << "\" text-anchor=\"end\">" << label
            << "</text>\n";
    }
    out << "<text x=\"" << ml + plot_w / 2 << "\" y=\"" << height - 12
        << "\" text-anchor=\"middle\">" << x_label << "</text>\n";
    out << "<text x=\"18\" y=\"" << mt + plot_h / 2
        << "\" text-anchor=\"middle\" transform=\"rotate(-90 18 " << mt + plot_h / 2 << ")\">"
        << y_label << "</text>\n";

    for (std::size_t si = 0; si < series.size(); ++si) {
        const char* color = palette[si % (sizeof(palette) / sizeof(palette[0]))];
        out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.3\" points=\"";
        // Thin long traces: at most ~2000 points per polyline.
        const std::size_t stride = std::max<std::size_t>(1, x.size() / 2000);
        for (std::size_t i = 0; i < x.size(); i += stride) {
            out << px(x[i]) << "," << py(series[si].y[i]) << " ";
        }
        out << px(x.back()) << "," << py(series[si].y.back());
        out << "\"/>\n";
        const double ly = mt + 16.0 * (si + 1);
        out << "<line x1=\"" << ml + plot_w + 10 << "\" y1=\"" << ly << "\" x2=\""
            << ml + plot_w + 34 << "\" y2=\"" << ly << "\" stroke=\"" << color
            << "\" stroke-width=\"2\"/>\n";
        out << "<text x=\"" << ml + plot_w + 40 << "\" y=\"" << ly + 4 << "\">" << series[si].label
            << "</text>\n";
    }
    out << "</svg>\n";
}

void write_standard_plots(const RunResult& result, const std::string& dir) {
    const SimLog& log = result.log;
    if (log.rows.empty()) {
        return;
    }
    std::vector<double> t(log.rows.size());
    for (std::size_t i = 0; i < log.rows.size(); ++i) {
        t[i] = log.rows[i][0];
    }
    auto column = [&](int c) {
        std::vector<double> y(log.rows.size());
        for (std::size_t i = 0; i < log.rows.size(); ++i) {
            y[i] = log.rows[i][c];
        }
        return y;
    };

    const int m = result.n_edges, n = result.n_agents;
    std::vector<SvgSeries> rbar, xi, ptilde, enorm;
    for (int k = 0; k < m; ++k) {
        rbar.push_back({"|Rbar_" + std::to_string(k + 1) + "|_I", column(2 + k)});
        xi.push_back({"xi_" + std::to_string(k + 1), column(2 + m + k)});
    }
    for (int i = 0; i < n; ++i) {
        ptilde.push_back({"|ptilde_" + std::to_string(i + 1) + "|", column(2 + 2 * m + 2 + i)});
    }
    enorm.push_back({"|e|", column(static_cast<int>(log.columns.size()) - 1)});

    const std::filesystem::path base(dir);
    write_svg_lines((base / "rbar.svg").string(), "Relative attitude error norms", "t [s]",
                    "|Rbar_k|_I", t, rbar, false);
    write_svg_lines((base / "xi.svg").string(), "Auxiliary variables", "t [s]", "xi_k [rad]", t, xi,
                    false);
    write_svg_lines((base / "ptilde.svg").string(), "Position estimation error norms", "t [s]",
                    "|ptilde_i| [m]", t, ptilde, false);
    write_svg_lines((base / "e_norm.svg").string(), "Reduced position error norm", "t [s]", "|e|",
                    t, enorm, true);
}

void write_run_outputs(const RunResult& result, const Scenario& scenario, const std::string& dir,
                       bool plots) {
    const std::filesystem::path base(dir);
    std::filesystem::create_directories(base);
    write_log_csv(result.log, (base / "trajectory.csv").string());
    write_jumps_csv(result.log, (base / "jumps.csv").string());
    write_summary_json(result, scenario, (base / "summary.json").string());
    if (plots) {
        write_standard_plots(result, dir);
    }
}

}  // namespace attsync
