#pragma once

#include <array>
#include <span>
#include <vector>

#include "solar_ddpg/battery_env.hpp"

namespace solar_ddpg {

/// Cost with no battery: solar offsets GC directly (and, when the config lets
/// solar serve controlled load, any surplus then offsets CL).
double no_battery_cost(std::span<const HalfHourRecord> trace, const EnvConfig& config);

/// Rule-based dispatch: take all the solar the battery can hold, discharge to
/// cover the GC that leftover solar does not, and fill from the grid in the
/// controlled window when there is no solar.
Action greedy_policy(const Observation& obs, bool in_window);
Policy make_greedy_policy(const EnvConfig& config);

struct DiscretizedSchedule {
    int soc_levels = 0;
    int action_levels = 0;
    std::vector<std::array<int, 3>> actions;  // per step: solar, grid, discharge level indices
    double total_cost = 0.0;    // continuous rollout of `actions`
    double lattice_cost = 0.0;  // optimal value of the snapped-SoC model
};

// Request level j of A is j / (A - 1) * capacity, for every component.
Action action_from_levels(const std::array<int, 3>& levels, int action_levels, double capacity);

/// Backward induction on SoC levels i / (K - 1) * capacity, with each settled
/// next charge snapped to the nearest level. The schedule is then executed on
/// the continuous battery, picking at each step the action that minimizes the
/// settled cost plus the lattice value of the snapped successor, so the
/// reported total_cost is always achievable.
DiscretizedSchedule perfect_foresight_dp(std::span<const HalfHourRecord> trace, const EnvConfig& config, int soc_levels,
                                         int action_levels);

RolloutResult rollout_schedule(std::span<const HalfHourRecord> trace, const EnvConfig& config,
                               const DiscretizedSchedule& schedule);

enum class ExhaustiveDynamics {
    Lattice,    // SoC snapped to the nearest of K levels after every step, as in the DP
    Continuous  // plain environment settlement, K unused
};

/// Minimum total cost over all A^(3T) discretized request sequences.
/// Throws ResourceGuardError when the search space exceeds `max_sequences`.
double enumerate_exhaustive(std::span<const HalfHourRecord> trace, const EnvConfig& config, int soc_levels,
                            int action_levels, ExhaustiveDynamics dynamics = ExhaustiveDynamics::Lattice,
                            double max_sequences = 5e7);

}  // namespace solar_ddpg
