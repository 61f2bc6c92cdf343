#pragma once

#include <cstdint>
#include <filesystem>

#include <Eigen/Dense>

#include "otrom/measure.hpp"
#include "otrom/rom.hpp"
#include "otrom/transport.hpp"

namespace otrom::io {

inline constexpr std::uint32_t format_version = 1;

/// "OTRM" header then N_T x N_h little-endian doubles, time-major.
void save_trajectory(const measure::Trajectory& traj, const std::filesystem::path& path);
measure::Trajectory load_trajectory(const std::filesystem::path& path);

/// "OTRP": shape, storage kind, solver stats and stored entries as (i, j, value) triplets.
void save_plan(const transport::TransportPlan& plan, const std::filesystem::path& path);
transport::TransportPlan load_plan(const std::filesystem::path& path);

/// "OTRX": rows, cols, column-major doubles.
void save_matrix(const Eigen::MatrixXd& m, const std::filesystem::path& path);
Eigen::MatrixXd load_matrix(const std::filesystem::path& path);

/// Directory with manifest.json plus binary plan, checkpoint and basis files.
void save_model(const rom::RomModel& model, const std::filesystem::path& dir);
rom::RomModel load_model(const std::filesystem::path& dir);

/// time,error,kind rows followed by a mean row; 17 significant digits.
void export_error_report_csv(const rom::ErrorReport& report, const std::filesystem::path& path);

}  // namespace otrom::io
