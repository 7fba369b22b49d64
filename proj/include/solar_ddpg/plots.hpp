#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "solar_ddpg/battery_env.hpp"

namespace solar_ddpg {

// One row of the mean-day profile; std is the population standard deviation.
struct ProfileRow {
    std::string series;  // gc, charge, discharge, solar
    int slot = 0;
    double mean = 0.0;
    double std = 0.0;
    std::size_t count = 0;
};

/// 48 rows per series, series in the order gc, charge, discharge, solar.
/// charge is the stored energy after the step; discharge sums both
/// discharge flows.
std::vector<ProfileRow> daily_profile(std::span<const StepRecord> steps);

struct PlotExport {
    std::vector<std::filesystem::path> written;
    std::vector<std::filesystem::path> missing;  // non-empty means nothing was written
};

/// Turns a sweep directory (sweep.csv plus size_<c>/ subdirectories) or a
/// single training run directory (result.json, training_log.csv,
/// eval_steps.csv) into three tidy CSV files under `out_dir`:
///   fig3_training_curves.csv  capacity,iteration,validation_reward,mean_train_reward
///   fig4_test_reward.csv      capacity,test_reward,oracle_cost,no_battery_cost
///   fig5_daily_profile.csv    series,slot,time,mean,std,count
/// The profile comes from the run whose capacity is closest to 1 kWh.
PlotExport export_plots(const std::filesystem::path& run_dir, const std::filesystem::path& out_dir);

}  // namespace solar_ddpg
