#pragma once

// Time-domain sampling of solutions, problem and result files, SVG plots.

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "comfort/kinematics.hpp"

namespace comfort {

inline constexpr int kFormatVersion = 1;

struct TrajectorySample {
  double u = 0.0;
  double t = 0.0;
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;
  double v = 0.0;
  double a_T = 0.0;
  double a_N = 0.0;
  double kappa = 0.0;
  double omega = 0.0;
};

/// `count` samples uniform in u. Throws NonPositiveSpeedError when the
/// speed is not positive inside (0,1).
std::vector<TrajectorySample> sample_trajectory(const DofVector& dofs, int count);

/// Problem files are JSON. Unknown fields are rejected; ParseError::field()
/// names the offending field, e.g. "weights.w_T".
ProblemSpec parse_problem(const std::string& json_text);
ProblemSpec read_problem(const std::filesystem::path& path);
/// Canonical JSON: fixed key order, every field written.
std::string problem_to_json(const ProblemSpec& spec);
void write_problem(const std::filesystem::path& path, const ProblemSpec& spec);

using Metadata = std::vector<std::pair<std::string, std::string>>;

/// CSV with a "# format_version" line, "# key: value" metadata lines and the
/// header u,t,x,y,theta,v,a_T,a_N,kappa,omega; 17 significant digits.
void write_result(const std::filesystem::path& path, const std::vector<TrajectorySample>& samples,
                  const Metadata& metadata = {});
std::string result_to_csv(const std::vector<TrajectorySample>& samples,
                          const Metadata& metadata = {});

struct ResultFile {
  Metadata metadata;
  std::vector<TrajectorySample> samples;
};

ResultFile read_result(const std::filesystem::path& path);
ResultFile parse_result(const std::string& csv_text);

struct PlotOptions {
  int markers = 11;  ///< equal-time markers including both ends
  std::string title;
  ObstacleField obstacles;
};

/// Path polyline, obstacle outlines and markers at equal time intervals.
/// Requires at least two samples.
std::string plot_svg(const std::vector<TrajectorySample>& samples, const PlotOptions& options = {});
void emit_plot(const std::vector<TrajectorySample>& samples, const std::filesystem::path& path,
               const PlotOptions& options = {});

/// Positions of the equal-time markers used by plot_svg.
std::vector<Vec2> equal_time_points(const std::vector<TrajectorySample>& samples, int markers);

}  // namespace comfort
