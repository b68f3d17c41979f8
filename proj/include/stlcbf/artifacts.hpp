#pragma once

#include <string>
#include <vector>

#include "stlcbf/bf_tree.hpp"
#include "stlcbf/sim.hpp"

namespace stlcbf {

/// Columns t, x0..x{n-1}, u0..u{m-1}, b0, chosen_k (leaf label, empty when none).
void write_trajectory_csv(const Trajectory& traj, const BfTree& tree, const std::string& path);
/// Columns t, b0.
void write_barrier_csv(const Trajectory& traj, const std::string& path);
/// Columns t, u0..u{m-1}.
void write_inputs_csv(const Trajectory& traj, const std::string& path);

/// Reads t, x and u back from a trajectory CSV (b0 too when present).
Trajectory read_trajectory_csv(const std::string& path);

struct Series {
    std::string name;
    std::vector<double> x;
    std::vector<double> y;
};

struct PlotSpec {
    std::string title;
    std::string x_label;
    std::string y_label;
    bool equal_aspect = false;
    /// Draw a dashed horizontal line at y = 0.
    bool zero_line = false;
};

/// Minimal SVG line chart.
void write_svg_plot(const std::vector<Series>& series, const PlotSpec& spec, const std::string& path);

/// paths.svg, barrier.svg and inputs.svg in `dir`. Paths are drawn in the
/// plane of each agent (3 states per agent) when `agents` > 0, else in the
/// first two state components (or x over t for scalar states).
std::vector<std::string> emit_plots(const Trajectory& traj, const std::string& dir, std::size_t agents);

}  // namespace stlcbf
