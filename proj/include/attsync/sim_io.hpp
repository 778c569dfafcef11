#pragma once

#include <string>
#include <vector>

#include "attsync/runtime.hpp"
#include "attsync/scenario.hpp"

namespace attsync {

/// Writes the trajectory log with its header row; values carry 17
/// significant digits so re-parsing is exact.
void write_log_csv(const SimLog& log, const std::string& path);

/// Jump events as t,j,edges,UT_before,UT_after with edge ids separated
/// by ';' inside the field.
void write_jumps_csv(const SimLog& log, const std::string& path);

/// Machine-readable run digest: final error norms, jump statistics, the
/// initial potential and its jump-count bound, and the integration setup.
void write_summary_json(const RunResult& result, const Scenario& scenario, const std::string& path);

struct SvgSeries {
    std::string label;
    std::vector<double> y;
};

/// Minimal multi-series line chart. Log-scale floors values at 1e-16.
void write_svg_lines(const std::string& path, const std::string& title, const std::string& x_label,
                     const std::string& y_label, const std::vector<double>& x,
                     const std::vector<SvgSeries>& series, bool log_y);

/// The standard plot set for a run: per-edge attitude errors, xi traces,
/// per-agent position errors and the reduced error norm.
void write_standard_plots(const RunResult& result, const std::string& dir);

/// Convenience wrapper: log + jumps + summary + plots under dir.
void write_run_outputs(const RunResult& result, const Scenario& scenario, const std::string& dir,
                       bool plots = true);

}  // namespace attsync
