#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "otrom/error.hpp"
#include "otrom/fomgen.hpp"
#include "otrom/rom.hpp"

namespace otrom::cli {

struct RomSection {
    std::size_t n_checkpoints = 3;
    std::optional<std::size_t> n_total_synthetic;  // defaults to the training snapshot count
    std::optional<double> epsilon;
    double epsilon_relative = 1e-2;
    double marginal_tol = 1e-9;
    int max_iters = 100000;
    rom::MappingKind mapping = rom::MappingKind::Linear;
    rom::RegressionKind regression = rom::RegressionKind::Gpr;
    bool correction = false;
    double pod_threshold = 0.9999;
    measure::SignStrategy sign_strategy = measure::SignStrategy::Split;
};

struct EvalSection {
    std::vector<double> test_time_offsets{0.5};  // fractions of the training save interval
    std::vector<std::size_t> sweep_checkpoints{2, 3, 5, 9, 17};
};

struct RunConfig {
    fomgen::FomConfig fom;
    std::size_t ref_refinement = 2;     // reference dt = dt / ref_refinement
    std::size_t ref_save_division = 2;  // reference saves this many times per training save
    RomSection rom;
    EvalSection eval;
    std::filesystem::path work_dir = "otrom_work";

    fomgen::FomConfig reference_fom() const;
};

/// Strict parse: unknown keys, wrong types and out-of-range values throw ConfigInvalid.
RunConfig parse_config(const std::string& json_text);
RunConfig load_config(const std::filesystem::path& path);

/// 0 ok, 2 config error, 3 missing or unreadable artifact, 4 numerical failure.
int exit_code_for(ErrorCode code);

void cmd_generate(const RunConfig& cfg);
void cmd_train(const RunConfig& cfg);
void cmd_infer(const RunConfig& cfg, double t, const std::optional<std::filesystem::path>& output);
void cmd_evaluate(const RunConfig& cfg);
void cmd_sweep(const RunConfig& cfg, const std::optional<std::vector<std::size_t>>& checkpoints);

/// Test times: every training time plus each offset * dt_save, kept inside [0, t_f].
std::vector<double> test_times(const RunConfig& cfg, const measure::Trajectory& train);

rom::TrainOptions train_options(const RunConfig& cfg, std::size_t n_checkpoints, std::size_t n_training_snapshots);

int run(int argc, char** argv);

}  // namespace otrom::cli
