#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "moo/dpo.hpp"
#include "moo/optimizer.hpp"

namespace moo::io {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// 17 significant digits, which reparse to the identical double.
std::string format_double(double x);

/// step,theta_0..theta_{d-1},loss_0..,w_0..,gnorm_0..,dnorm
std::string trajectory_csv_header(std::size_t dim, std::size_t num_objectives);
std::string trajectory_to_csv(const Trajectory& traj);

/// Parses the CSV back into records. converged_at and final_params are not
/// stored in the CSV and are left empty.
Trajectory trajectory_from_csv(const std::string& text);

/// {"objective": id, "pairs": [{"x": .., "yw": .., "yl": ..}, ...]}
std::string dataset_to_json(const dpo::PreferenceDataset& dataset);
dpo::PreferenceDataset dataset_from_json(const std::string& text);

struct SvgSeries {
  std::string label;
  std::vector<std::pair<double, double>> points;
};

/// Parameter-space plot: one polyline per series, the unit circle, and
/// markers for the start and the optimum.
std::string trajectory_svg(const std::vector<SvgSeries>& series, std::pair<double, double> start,
                           std::pair<double, double> optimum);

std::string read_file(const std::filesystem::path& path);
/// Truncates and writes. Throws std::runtime_error on failure.
void write_file(const std::filesystem::path& path, const std::string& contents);

}  // namespace moo::io
